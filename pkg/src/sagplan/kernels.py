"""Hot inner loops: odd-even transposition schedules, plan checking and the
permutation-space BFS used for exact tiny-grid solving.

Every public function here has a compiled body (numba) and a vectorised
numpy body. ``_accel.HAVE_NUMBA`` picks one at import time; both are always
importable so the benchmark can compare them.
"""
import math

import numpy as np

from ._accel import HAVE_NUMBA, njit

# failure codes reported by check_plan
OK = 0
ADJACENCY = 1
STALE = 2
DUPLICATE = 3
VERTEX = 4
EDGE = 5

RULE_NAMES = {
    ADJACENCY: "adjacency",
    STALE: "stale",
    DUPLICATE: "duplicate",
    VERTEX: "injectivity",
    EDGE: "edge",
}


# --------------------------------------------------------------------------
# odd-even transposition schedules
# --------------------------------------------------------------------------

@njit(cache=True)
def _oets_nb(keys):
    nlines, length = keys.shape
    k = keys.copy()
    cap = 64
    rnd = np.empty(cap, np.int32)
    lin = np.empty(cap, np.int32)
    pos = np.empty(cap, np.int32)
    count = 0
    nrounds = 0
    parity = 0
    idle = 0
    while idle < 2 and length > 1:
        swapped = False
        for ln in range(nlines):
            for i in range(parity, length - 1, 2):
                if k[ln, i] > k[ln, i + 1]:
                    t = k[ln, i]
                    k[ln, i] = k[ln, i + 1]
                    k[ln, i + 1] = t
                    if count == cap:
                        cap *= 2
                        r2 = np.empty(cap, np.int32)
                        l2 = np.empty(cap, np.int32)
                        p2 = np.empty(cap, np.int32)
                        r2[:count] = rnd[:count]
                        l2[:count] = lin[:count]
                        p2[:count] = pos[:count]
                        rnd, lin, pos = r2, l2, p2
                    rnd[count] = nrounds
                    lin[count] = ln
                    pos[count] = i
                    count += 1
                    swapped = True
        if swapped:
            nrounds += 1
            idle = 0
        else:
            idle += 1
        parity ^= 1
    return rnd[:count], lin[:count], pos[:count], nrounds


def _oets_np(keys):
    k = np.array(keys, dtype=np.int64, copy=True)
    nlines, length = k.shape
    rnds, lins, poss = [], [], []
    nrounds = 0
    parity = 0
    idle = 0
    while idle < 2 and length > 1:
        left = np.arange(parity, length - 1, 2)
        if left.size == 0:
            idle += 1
            parity ^= 1
            continue
        a = k[:, left]
        b = k[:, left + 1]
        mask = a > b
        if mask.any():
            ln, j = np.nonzero(mask)
            i = left[j]
            k[ln, i], k[ln, i + 1] = k[ln, i + 1], k[ln, i].copy()
            rnds.append(np.full(ln.size, nrounds, np.int32))
            lins.append(ln.astype(np.int32))
            poss.append(i.astype(np.int32))
            nrounds += 1
            idle = 0
        else:
            idle += 1
        parity ^= 1
    if not rnds:
        e = np.empty(0, np.int32)
        return e, e.copy(), e.copy(), 0
    return np.concatenate(rnds), np.concatenate(lins), np.concatenate(poss), nrounds


def oets_schedule(keys):
    """Sort every row of ``keys`` by odd-even transposition.

    Returns ``(round, line, pos, nrounds)``: swap ``j`` exchanges entries
    ``pos[j]`` and ``pos[j]+1`` of line ``line[j]`` during round ``round[j]``.
    Rounds without any swap are dropped, so consecutive rounds may share a
    parity. Swaps within one round are disjoint by construction.
    """
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    if keys.ndim != 2:
        raise ValueError("keys must be 2-d (lines x positions)")
    if keys.size == 0:
        e = np.empty(0, np.int32)
        return e, e.copy(), e.copy(), 0
    if HAVE_NUMBA:
        r, ln, p, n = _oets_nb(keys)
        return r, ln, p, int(n)
    return _oets_np(keys)


# --------------------------------------------------------------------------
# plan checking
# --------------------------------------------------------------------------

@njit(cache=True)
def _check_nb(rows, cols, pos0, moves, offsets):
    n = rows * cols
    nrob = pos0.shape[0]
    pos = pos0.copy()
    occ = np.full(n, -1, np.int64)
    for r in range(nrob):
        occ[pos[r]] = r
    moving = np.full(nrob, -1, np.int64)  # step stamp
    dest = np.zeros(nrob, np.int64)
    into = np.full(n, -1, np.int64)  # step stamp of last arrival
    into_cnt = np.zeros(n, np.int64)
    nsteps = offsets.shape[0] - 1
    for s in range(nsteps):
        lo = offsets[s]
        hi = offsets[s + 1]
        best_r = nrob + 1
        best_c = 0
        # pass 1: per-move sanity
        for j in range(lo, hi):
            r = moves[j, 0]
            u = moves[j, 1]
            v = moves[j, 2]
            code = 0
            if r < 0 or r >= nrob or u < 0 or u >= n or v < 0 or v >= n:
                code = ADJACENCY
            else:
                ur = u // cols
                uc = u % cols
                vr = v // cols
                vc = v % cols
                if abs(ur - vr) + abs(uc - vc) != 1:
                    code = ADJACENCY
                elif pos[r] != u:
                    code = STALE
                elif moving[r] == s:
                    code = DUPLICATE
            if code != 0:
                rr = r if r >= 0 else 0
                if rr < best_r or (rr == best_r and code < best_c):
                    best_r = rr
                    best_c = code
                continue
            moving[r] = s
            dest[r] = v
            if into[v] != s:
                into[v] = s
                into_cnt[v] = 0
            into_cnt[v] += 1
        if best_c != 0:
            return s, best_r, best_c, pos
        # pass 2: vertex and edge conflicts
        for j in range(lo, hi):
            r = moves[j, 0]
            u = moves[j, 1]
            v = moves[j, 2]
            code = 0
            if into_cnt[v] > 1:
                code = VERTEX
            else:
                o = occ[v]
                if o >= 0 and o != r:
                    if moving[o] != s:
                        code = VERTEX
                    elif dest[o] == u:
                        code = EDGE
            if code != 0:
                if r < best_r or (r == best_r and code < best_c):
                    best_r = r
                    best_c = code
        if best_c != 0:
            return s, best_r, best_c, pos
        for j in range(lo, hi):
            occ[moves[j, 1]] = -1
        for j in range(lo, hi):
            r = moves[j, 0]
            occ[moves[j, 2]] = r
            pos[r] = moves[j, 2]
    return -1, -1, 0, pos


def _check_step_np(rows, cols, pos, occ, mv):
    """Return (robot, code) of the lowest failing robot in one step, or None."""
    n = rows * cols
    nrob = pos.shape[0]
    r, u, v = mv[:, 0], mv[:, 1], mv[:, 2]
    code = np.zeros(len(mv), np.int64)
    bad_range = (r < 0) | (r >= nrob) | (u < 0) | (u >= n) | (v < 0) | (v >= n)
    rs = np.where(bad_range, 0, r)
    us = np.where(bad_range, 0, u)
    vs = np.where(bad_range, 0, v)
    manh = np.abs(us // cols - vs // cols) + np.abs(us % cols - vs % cols)
    code[bad_range | (manh != 1)] = ADJACENCY
    stale = (code == 0) & (pos[rs] != us)
    code[stale] = STALE
    ok = code == 0
    # duplicates: every occurrence after the first of a robot id
    order = np.argsort(np.where(ok, rs, -1), kind="stable")
    dup = np.zeros(len(mv), bool)
    so = rs[order]
    same = (so[1:] == so[:-1]) & ok[order][1:] & ok[order][:-1]
    dup[order[1:][same]] = True
    code[dup] = DUPLICATE
    if (code != 0).any():
        bad = np.nonzero(code)[0]
        key = np.where(rs[bad] < 0, 0, rs[bad]) * 8 + code[bad]
        j = bad[np.argmin(key)]
        return int(max(r[j], 0)), int(code[j])
    moving = np.zeros(nrob, bool)
    moving[r] = True
    dest = np.full(nrob, -1, np.int64)
    dest[r] = v
    cnt = np.bincount(v, minlength=n)
    o = occ[v]
    vert = (cnt[v] > 1) | ((o >= 0) & (o != r) & ~moving[np.maximum(o, 0)])
    edge = ~vert & (o >= 0) & (o != r) & moving[np.maximum(o, 0)] & (dest[np.maximum(o, 0)] == u)
    code[vert] = VERTEX
    code[edge] = EDGE
    if (code != 0).any():
        bad = np.nonzero(code)[0]
        key = r[bad] * 8 + code[bad]
        j = bad[np.argmin(key)]
        return int(r[j]), int(code[j])
    return None


def _check_np(rows, cols, pos0, moves, offsets):
    pos = pos0.copy()
    occ = np.full(rows * cols, -1, np.int64)
    occ[pos] = np.arange(pos.shape[0])
    for s in range(offsets.shape[0] - 1):
        mv = moves[offsets[s]:offsets[s + 1]]
        if mv.shape[0] == 0:
            continue
        bad = _check_step_np(rows, cols, pos, occ, mv)
        if bad is not None:
            return s, bad[0], bad[1], pos
        occ[mv[:, 1]] = -1
        occ[mv[:, 2]] = mv[:, 0]
        pos[mv[:, 0]] = mv[:, 2]
    return -1, -1, 0, pos


def check_plan(rows, cols, pos0, moves, offsets):
    """Replay a flattened plan against the two collision rules.

    ``moves`` is an ``(M, 3)`` array of ``(robot, from, to)`` rows and step
    ``s`` owns ``moves[offsets[s]:offsets[s+1]]``. Returns
    ``(step, robot, code, final_positions)``; ``step == -1`` means valid.
    """
    pos0 = np.ascontiguousarray(pos0, dtype=np.int64)
    moves = np.ascontiguousarray(moves, dtype=np.int64).reshape(-1, 3)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    if HAVE_NUMBA:
        s, r, c, pos = _check_nb(rows, cols, pos0, moves, offsets)
    else:
        s, r, c, pos = _check_np(rows, cols, pos0, moves, offsets)
    return int(s), int(r), int(c), pos


# --------------------------------------------------------------------------
# permutation ranking and BFS over a Cayley graph
# --------------------------------------------------------------------------

@njit(cache=True)
def _rank_nb(perm):
    n = perm.shape[0]
    rank = 0
    for i in range(n):
        smaller = 0
        for j in range(i + 1, n):
            if perm[j] < perm[i]:
                smaller += 1
        rank = rank * (n - i) + smaller
    return rank


@njit(cache=True)
def _unrank_nb(rank, n, out):
    digits = np.empty(n, np.int64)
    for i in range(n - 1, -1, -1):
        base = n - i
        digits[i] = rank % base
        rank //= base
    used = np.zeros(n, np.bool_)
    for i in range(n):
        d = digits[i]
        for v in range(n):
            if not used[v]:
                if d == 0:
                    out[i] = v
                    used[v] = True
                    break
                d -= 1


@njit(cache=True)
def _bfs_nb(n, gens):
    total = 1
    for i in range(2, n + 1):
        total *= i
    dist = np.full(total, -1, np.int8)
    parent = np.full(total, -1, np.int8)
    queue = np.empty(total, np.int64)
    ident = np.arange(n)
    r0 = _rank_nb(ident)
    dist[r0] = 0
    queue[0] = r0
    head = 0
    tail = 1
    cur = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    ng = gens.shape[0]
    while head < tail:
        r = queue[head]
        head += 1
        _unrank_nb(r, n, cur)
        d = dist[r]
        for g in range(ng):
            for i in range(n):
                nxt[i] = cur[gens[g, i]]
            q = _rank_nb(nxt)
            if dist[q] < 0:
                dist[q] = d + 1
                parent[q] = g
                queue[tail] = q
                tail += 1
    return dist, parent


def rank_perms(perms):
    """Lehmer rank of every row of ``perms`` (vectorised, n <= 12)."""
    perms = np.asarray(perms, dtype=np.int64)
    m, n = perms.shape
    rank = np.zeros(m, np.int64)
    for i in range(n):
        smaller = (perms[:, i + 1:] < perms[:, i:i + 1]).sum(axis=1)
        rank = rank * (n - i) + smaller
    return rank


def unrank_perms(ranks, n):
    """Inverse of :func:`rank_perms`."""
    ranks = np.asarray(ranks, dtype=np.int64).copy()
    m = ranks.shape[0]
    digits = np.empty((m, n), np.int64)
    for i in range(n - 1, -1, -1):
        base = n - i
        digits[:, i] = ranks % base
        ranks //= base
    out = np.empty((m, n), np.int64)
    avail = np.tile(np.arange(n), (m, 1))
    rows = np.arange(m)
    for i in range(n):
        d = digits[:, i]
        out[:, i] = avail[rows, d]
        # drop the used entry, shifting the tail left
        keep = np.ones((m, n - i), bool)
        keep[rows, d] = False
        avail = avail[keep].reshape(m, n - i - 1)
    return out


def _bfs_np(n, gens):
    total = math.factorial(n)
    dist = np.full(total, -1, np.int8)
    parent = np.full(total, -1, np.int8)
    r0 = int(rank_perms(np.arange(n)[None, :])[0])
    dist[r0] = 0
    frontier = np.array([r0], np.int64)
    depth = 0
    ng = gens.shape[0]
    while frontier.size:
        perms = unrank_perms(frontier, n)
        cand, keys = [], []
        idx = np.arange(frontier.size, dtype=np.int64)
        for g in range(ng):
            q = rank_perms(perms[:, gens[g]])
            fresh = dist[q] < 0
            cand.append(q[fresh])
            keys.append(idx[fresh] * ng + g)
        q = np.concatenate(cand)
        key = np.concatenate(keys)
        # first arrival in (queue position, generator) order, as the
        # compiled FIFO search does
        order = np.lexsort((key, q))
        q, key = q[order], key[order]
        first = np.ones(q.size, bool)
        first[1:] = q[1:] != q[:-1]
        q, key = q[first], key[first]
        order = np.argsort(key, kind="stable")
        q, key = q[order], key[order]
        dist[q] = depth + 1
        parent[q] = key % ng
        depth += 1
        frontier = q
    return dist, parent


def bfs_permutations(n, gens):
    """Breadth-first search from the identity over ``S_n``.

    A state ``p`` steps to ``p[g]`` for each generator row ``g``. Returns
    ``(dist, parent)`` indexed by Lehmer rank; ``parent`` holds the generator
    index used on the first arrival (-1 for the root and unreached states).
    """
    gens = np.ascontiguousarray(gens, dtype=np.int64)
    if gens.shape[0] > 127:
        raise ValueError("too many generators for int8 parent table")
    if HAVE_NUMBA:
        return _bfs_nb(n, gens)
    return _bfs_np(n, gens)


def rank_perm(perm):
    p = np.ascontiguousarray(perm, dtype=np.int64)
    if HAVE_NUMBA:
        return int(_rank_nb(p))
    return int(rank_perms(p[None, :])[0])
