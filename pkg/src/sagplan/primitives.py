"""Motion primitives on a fully occupied grid.

Everything here is built from *swap rounds*: sets of vertex-disjoint grid
edges whose two robots should trade places. :func:`compile_rounds` turns a
swap round into a constant number of real synchronized steps by covering
the edges with disjoint 3x2 / 2x3 blocks and replaying precomputed optimal
block plans in lockstep. Herding, line exchange and tree exchange only
decide which swap rounds to emit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from . import kernels
from .errors import (
    BranchError,
    DisjointnessError,
    GroupTooLarge,
    OverlapError,
    SizeMismatch,
)
from .grid import Configuration, GridGraph, Plan

# --------------------------------------------------------------------------
# exchange table: every permutation of a 3x2 block, solved optimally
# --------------------------------------------------------------------------


def _valid_block_steps(rows, cols):
    """All synchronized steps of a fully occupied rows x cols block.

    Enumerated directly from the collision rules: each vertex keeps its robot
    or sends it to a neighbour, targets form a bijection and no edge is used
    in both directions. The empty step is excluded.
    """
    n = rows * cols
    choices = []
    for v in range(n):
        r, c = divmod(v, cols)
        opts = [v]
        for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols:
                opts.append(rr * cols + cc)
        choices.append(opts)
    steps = []
    for f in product(*choices):
        if len(set(f)) != n or all(f[v] == v for v in range(n)):
            continue
        if any(f[f[v]] == v and f[v] != v for v in range(n)):
            continue
        steps.append(f)
    return steps


@dataclass
class ExchangeTable:
    """Shortest in-place plan for each of the 720 permutations of a block.

    ``seq[rank]`` lists step ids (padded with -1), ``length[rank]`` its size
    and ``step_moves[i]`` the block-local ``(from, to)`` pairs of step ``i``.
    Ranks index the relative occupancy permutation reached from identity.
    """

    rows: int
    cols: int
    step_moves: list = field(default_factory=list)
    seq: np.ndarray = None
    length: np.ndarray = None

    @property
    def diameter(self) -> int:
        return int(self.length.max())

    def plan_for(self, perm) -> list[np.ndarray]:
        r = kernels.rank_perm(perm)
        return [self.step_moves[i] for i in self.seq[r, : self.length[r]]]

    @classmethod
    def build(cls, rows=3, cols=2) -> "ExchangeTable":
        n = rows * cols
        steps = _valid_block_steps(rows, cols)
        step_moves = [
            np.array([(u, f[u]) for u in range(n) if f[u] != u], dtype=np.int64) for f in steps
        ]
        start = tuple(range(n))
        prev = {start: None}
        frontier = [start]
        while frontier:
            nxt = []
            for occ in frontier:
                for i, f in enumerate(steps):
                    new = [0] * n
                    for u in range(n):
                        new[f[u]] = occ[u]
                    new = tuple(new)
                    if new not in prev:
                        prev[new] = (occ, i)
                        nxt.append(new)
            frontier = nxt
        total = len(prev)
        seqs = {}
        for state in prev:
            path = []
            s = state
            while prev[s] is not None:
                s, i = prev[s]
                path.append(i)
            seqs[state] = path[::-1]
        depth = max(len(p) for p in seqs.values())
        states = np.array(list(seqs), dtype=np.int64)
        ranks = kernels.rank_perms(states)
        seq = np.full((total, max(depth, 1)), -1, np.int64)
        length = np.zeros(total, np.int64)
        for rank, state in zip(ranks, seqs):
            p = seqs[state]
            seq[rank, : len(p)] = p
            length[rank] = len(p)
        return cls(rows, cols, step_moves, seq, length)


@lru_cache(maxsize=None)
def exchange_table(rows=3, cols=2) -> ExchangeTable:
    return ExchangeTable.build(rows, cols)


def build_exchange_table() -> ExchangeTable:
    """The cached 3x2 (three rows, two columns) table."""
    return exchange_table(3, 2)


# --------------------------------------------------------------------------
# block partitions
# --------------------------------------------------------------------------


@dataclass
class BlockPartition:
    """Disjoint blocks of one shape inside a ``rows x cols`` frame.

    ``blocks[b]`` lists the block's vertex ids in block-local row-major
    order; ``block_of[v]`` / ``slot_of[v]`` invert that (-1 if uncovered).
    """

    rows: int
    cols: int
    shape: tuple
    anchors: list
    blocks: np.ndarray = None
    block_of: np.ndarray = None
    slot_of: np.ndarray = None

    def __post_init__(self):
        h, w = self.shape
        n = self.rows * self.cols
        blocks = []
        for r0, c0 in self.anchors:
            if r0 < 0 or c0 < 0 or r0 + h > self.rows or c0 + w > self.cols:
                raise ValueError(f"block at {(r0, c0)} leaves the grid")
            blocks.append([(r0 + i) * self.cols + c0 + j for i in range(h) for j in range(w)])
        self.blocks = np.array(blocks, dtype=np.int64).reshape(-1, h * w)
        self.block_of = np.full(n, -1, np.int64)
        self.slot_of = np.full(n, -1, np.int64)
        for b, blk in enumerate(self.blocks):
            if (self.block_of[blk] >= 0).any():
                raise ValueError("blocks overlap")
            self.block_of[blk] = b
            self.slot_of[blk] = np.arange(h * w)

    def covers(self, u, v):
        bu, bv = self.block_of[u], self.block_of[v]
        return (bu >= 0) & (bu == bv)


def _tilings(length):
    """Two disjoint 3-interval tilings of ``range(length)`` that jointly
    contain every adjacent pair (and hence every index)."""
    if length == 3:
        return [[0]]
    cands = []
    for off in range(3):
        cands.append(list(range(off, length - 2, 3)))
        cands.append(list(range(length - 3 - off, -1, -3))[::-1])
    pairs = set(range(length - 1))
    for a in cands:
        for b in cands:
            got = set()
            for s in a + b:
                got.update((s, s + 1))
            if got >= pairs:
                return [a, b]
    raise AssertionError(f"no tiling pair for length {length}")


@lru_cache(maxsize=None)
def partition_family(rows: int, cols: int) -> tuple:
    """At most four block partitions covering every edge of the frame."""
    if cols >= 3 and rows >= 2:
        shape, pair_len, til_len, transpose = (2, 3), rows, cols, False
    elif rows >= 3 and cols == 2:
        shape, pair_len, til_len, transpose = (3, 2), cols, rows, True
    else:
        raise ValueError(f"no 3x2 block fits in a {rows}x{cols} frame")
    pairings = [list(range(0, pair_len - 1, 2))]
    if pair_len >= 3:
        pairings.append(list(range(1, pair_len - 1, 2)))
    fam = []
    for pairing in pairings:
        for tiling in _tilings(til_len):
            if transpose:
                anchors = [(t, p) for p in pairing for t in tiling]
            else:
                anchors = [(p, t) for p in pairing for t in tiling]
            fam.append(BlockPartition(rows, cols, shape, anchors))
    return tuple(fam)


def partition_rounds(grid: GridGraph, edges) -> list[tuple[BlockPartition, np.ndarray]]:
    """Split an edge set into rounds, one per partition of the family.

    Returns ``[(partition, edges_in_that_round), ...]`` for non-empty
    rounds, in family order.
    """
    e = _edge_array(edges)
    return _assign(grid.rows, grid.cols, e)


def _assign(rows, cols, e):
    # every edge goes to the last partition covering it, so the final
    # round always works on complete blocks and the earlier rounds get
    # the leftovers
    fam = partition_family(rows, cols)
    left = np.ones(e.shape[0], bool)
    picked = {}
    for k in range(len(fam) - 1, -1, -1):
        if not left.any():
            break
        hit = left & fam[k].covers(e[:, 0], e[:, 1])
        if hit.any():
            picked[k] = e[hit]
            left &= ~hit
    if left.any():
        raise DisjointnessError(f"edges not coverable: {e[left].tolist()}")
    return [(fam[k], picked[k]) for k in sorted(picked)]


def _edge_array(edges) -> np.ndarray:
    if isinstance(edges, np.ndarray):
        return edges.reshape(-1, 2).astype(np.int64)
    return np.array(sorted(tuple(sorted(x)) for x in edges), dtype=np.int64).reshape(-1, 2)


def check_disjoint(rows, cols, e):
    e = _edge_array(e)
    if e.size == 0:
        return e
    flat = e.reshape(-1)
    if np.unique(flat).size != flat.size:
        raise DisjointnessError("edges share a vertex")
    n = rows * cols
    if (flat < 0).any() or (flat >= n).any():
        raise DisjointnessError("edge endpoint outside the grid")
    d = np.abs(e[:, 0] // cols - e[:, 1] // cols) + np.abs(e[:, 0] % cols - e[:, 1] % cols)
    if (d != 1).any():
        raise DisjointnessError("pair is not a grid edge")
    return e


# --------------------------------------------------------------------------
# compiling swap rounds into steps
# --------------------------------------------------------------------------


_NO_MOVES = np.empty((0, 2), np.int64)


def compile_round(rows, cols, e, pad=True) -> list[np.ndarray]:
    """Steps (``(k, 2)`` from/to vertex arrays) realising one swap round.

    Every partition but the last runs for exactly the table diameter
    (waiting once its blocks are done) unless ``pad`` is off, so the
    partitions start at fixed offsets whatever the grid size.
    """
    out = []
    if e.shape[0] == 0:
        return []
    rounds = _assign(rows, cols, e)
    for i, (part, pe) in enumerate(rounds):
        h, w = part.shape
        bu = part.block_of[pe[:, 0]]
        active, inv = np.unique(bu, return_inverse=True)
        perms = np.tile(np.arange(h * w), (active.size, 1))
        su, sv = part.slot_of[pe[:, 0]], part.slot_of[pe[:, 1]]
        perms[inv, su] = sv
        perms[inv, sv] = su
        steps = _emit_blocks(part.blocks[active], perms, (h, w))
        if pad and i < len(rounds) - 1:
            steps += [_NO_MOVES] * (exchange_table(h, w).diameter - len(steps))
        out.extend(steps)
    return out


def compile_rounds(rows, cols, rounds) -> list[np.ndarray]:
    steps = []
    for e in rounds:
        steps.extend(compile_round(rows, cols, _edge_array(e)))
    return steps


def steps_to_plan(occ, vsteps, vmap=None) -> tuple[Plan, np.ndarray]:
    """Attach robot ids to vertex-level steps by replaying them on ``occ``.

    ``vmap`` maps frame-local vertex ids to output ids (identity if None).
    Returns the plan and the final occupancy.
    """
    occ = np.array(occ, dtype=np.int64, copy=True)
    arrs = []
    for st in vsteps:
        f, t = st[:, 0], st[:, 1]
        rob = occ[f]
        if vmap is None:
            arrs.append(np.stack([rob, f, t], axis=1))
        else:
            arrs.append(np.stack([rob, vmap[f], vmap[t]], axis=1))
        occ[t] = rob
    return Plan.from_steps(arrs), occ


def apply_rounds(occ, rounds) -> np.ndarray:
    """Net effect of swap rounds on an occupancy array (no step compilation)."""
    occ = np.array(occ, copy=True)
    for e in rounds:
        e = _edge_array(e)
        if e.size:
            occ[e[:, 0]], occ[e[:, 1]] = occ[e[:, 1]], occ[e[:, 0]].copy()
    return occ


def flip(grid: GridGraph, config: Configuration, edges) -> Plan:
    """Exchange the two robots on each edge of a vertex-disjoint edge set.

    Every other robot ends where it started. Makespan is at most
    ``flip_bound()`` regardless of grid size.
    """
    e = check_disjoint(grid.rows, grid.cols, edges)
    steps = compile_round(grid.rows, grid.cols, e)
    plan, _ = steps_to_plan(config.occupancy(), steps)
    return plan


def flip_bound(rows=None, cols=None) -> int:
    """Rounds-per-flip times the worst lockstep block plan (``R * D6``)."""
    r = 4 if rows is None else len(partition_family(rows, cols))
    return r * build_exchange_table().diameter


# --------------------------------------------------------------------------
# paths, herding and line exchange
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PathSegment:
    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(int(v) for v in self.vertices))
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError("path repeats a vertex")

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def check(self, grid: GridGraph):
        for u, v in zip(self.vertices, self.vertices[1:]):
            if not grid.is_edge(u, v):
                raise ValueError(f"path step {u}->{v} is not a grid edge")
        return self

    def turns(self, grid: GridGraph) -> int:
        dirs = []
        for u, v in zip(self.vertices, self.vertices[1:]):
            dirs.append(abs(v - u) == 1)
        return sum(a != b for a, b in zip(dirs, dirs[1:]))


def _line_rounds(lines, rnd, ln, pos, nrounds):
    """Turn OETS output on stacked lines into lists of edge arrays."""
    lines = np.asarray(lines)
    if nrounds == 0:
        return []
    u = lines[ln, pos]
    v = lines[ln, pos + 1]
    order = np.argsort(rnd, kind="stable")
    rnd, u, v = rnd[order], u[order], v[order]
    cuts = np.searchsorted(rnd, np.arange(1, nrounds))
    return [np.stack(p, axis=1) for p in zip(np.split(u, cuts), np.split(v, cuts))]


def sort_rounds(lines, keys):
    """Swap rounds that stably sort ``keys`` ascending along each line."""
    rnd, ln, pos, n = kernels.oets_schedule(keys)
    return _line_rounds(lines, rnd, ln, pos, n)


def herd_rounds(lines, marked):
    """Swap rounds moving marked cells to the high-index end of each line."""
    return sort_rounds(lines, np.asarray(marked, dtype=np.int64))


def line_shift_rounds(lines, types):
    """Swap rounds exchanging type-1 and type-2 cells along each line.

    ``types`` is 0 (bystander), 1 or 2 per cell; on every line the type-1
    cells must all precede the type-2 cells and the counts must match. The
    three phases are: herd type 1 to the far end, herd type 2 to the near
    end, then undo a parallel herding computed from the goal layout.
    Bystanders keep their cells.
    """
    lines = np.asarray(lines)
    t = np.asarray(types, dtype=np.int64)
    one = t == 1
    two = t == 2
    rounds = herd_rounds(lines, one)
    lay = t.copy()
    for e_rnd in _positions_of(lines, rounds):
        _swap_cells(lay, e_rnd)
    # herd type 2 towards index 0: sort with 2 -> 0 ahead of everyone else
    key2 = np.where(lay == 2, 0, 1)
    r2 = sort_rounds(lines, key2)
    rounds += r2
    # goal layout: the two groups trade cell sets
    goal = np.where(one, 2, np.where(two, 1, 0))
    key3 = np.where(goal == 2, 0, np.where(goal == 1, 2, 1))
    r3 = sort_rounds(lines, key3)
    rounds += r3[::-1]
    return rounds


def _positions_of(lines, rounds):
    """Map edge rounds back to (line, pos) index pairs."""
    lines = np.asarray(lines)
    where = {}
    for li, line in enumerate(lines):
        for p, v in enumerate(line):
            where[int(v)] = (li, p)
    out = []
    for e in rounds:
        a = np.array([where[int(x)] for x in e[:, 0]], dtype=np.int64).reshape(-1, 2)
        b = np.array([where[int(x)] for x in e[:, 1]], dtype=np.int64).reshape(-1, 2)
        out.append((a, b))
    return out


def _swap_cells(arr, ab):
    a, b = ab
    if a.size == 0:
        return
    x = arr[a[:, 0], a[:, 1]].copy()
    arr[a[:, 0], a[:, 1]] = arr[b[:, 0], b[:, 1]]
    arr[b[:, 0], b[:, 1]] = x


def _members_on(path, config, group):
    pos = config.placement
    cells = set(path.vertices)
    idx = {v: i for i, v in enumerate(path.vertices)}
    out = []
    for r in sorted(set(int(g) for g in group)):
        v = int(pos[r])
        if v not in cells:
            raise ValueError(f"robot {r} is not on the path")
        out.append(idx[v])
    return out


def _finish(grid, config, rounds):
    steps = compile_rounds(grid.rows, grid.cols, rounds)
    plan, _ = steps_to_plan(config.occupancy(), steps)
    return plan


def herd(grid: GridGraph, path: PathSegment, config: Configuration, group, end="end") -> Plan:
    """Move ``group`` onto the ``len(group)`` path cells nearest ``end``.

    ``end`` is ``"end"`` (last vertex) or ``"start"``. Robots inside the
    group are interchangeable; everyone else keeps their relative order.
    """
    path.check(grid)
    if len(set(group)) > path.length // 2:
        raise GroupTooLarge(f"{len(set(group))} robots exceed floor({path.length}/2)")
    line = np.array(path.vertices if end == "end" else path.vertices[::-1])
    idx = _members_on(PathSegment(tuple(line)), config, group)
    marked = np.zeros((1, line.size), np.int64)
    marked[0, idx] = 1
    return _finish(grid, config, herd_rounds(line[None, :], marked))


def line_shift(grid: GridGraph, path: PathSegment, config: Configuration, group1, group2) -> Plan:
    """Trade the cells of two equal groups lying on disjoint parts of a path.

    Robots outside both groups end where they started.
    """
    path.check(grid)
    g1, g2 = set(int(g) for g in group1), set(int(g) for g in group2)
    if len(g1) != len(g2):
        raise SizeMismatch(f"group sizes differ: {len(g1)} vs {len(g2)}")
    if g1 & g2:
        raise OverlapError("a robot belongs to both groups")
    if not g1:
        return Plan()
    i1 = _members_on(path, config, g1)
    i2 = _members_on(path, config, g2)
    if max(i1) < min(i2):
        first, second = i1, i2
    elif max(i2) < min(i1):
        first, second = i2, i1
    else:
        raise OverlapError("groups interleave along the path")
    types = np.zeros((1, len(path)), np.int64)
    types[0, first] = 1
    types[0, second] = 2
    line = np.array(path.vertices)[None, :]
    return _finish(grid, config, line_shift_rounds(line, types))


# --------------------------------------------------------------------------
# tree exchange
# --------------------------------------------------------------------------


@dataclass
class EmbeddedTree:
    """A main path plus straight side branches hanging off it.

    Each side branch is ``(attach_vertex, PathSegment)`` where the segment's
    first vertex is adjacent to ``attach_vertex`` on the main path.
    """

    main_path: PathSegment
    side_branches: list = field(default_factory=list)
    column: int | None = None

    def vertices(self) -> set:
        out = set(self.main_path.vertices)
        for _, br in self.side_branches:
            out.update(br.vertices)
        return out

    def diameter(self, grid: GridGraph | None = None) -> int:
        """Longest path length, via two BFS sweeps over the tree."""
        adj = self._adjacency()
        if not adj:
            return 0

        def far(src):
            dist = {src: 0}
            todo = [src]
            while todo:
                nxt = []
                for u in todo:
                    for w in adj[u]:
                        if w not in dist:
                            dist[w] = dist[u] + 1
                            nxt.append(w)
                todo = nxt
            v = max(dist, key=lambda k: (dist[k], -k))
            return v, dist[v]

        a, _ = far(self.main_path.vertices[0])
        _, d = far(a)
        return d

    def _adjacency(self):
        adj = {}

        def link(a, b):
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)

        mp = self.main_path.vertices
        for v in mp:
            adj.setdefault(v, set())
        for a, b in zip(mp, mp[1:]):
            link(a, b)
        for att, br in self.side_branches:
            prev = att
            for v in br.vertices:
                link(prev, v)
                prev = v
        return adj

    def degree(self, v) -> int:
        return len(self._adjacency().get(v, ()))


def _branch_span(tree: EmbeddedTree, branch: PathSegment):
    """Index range of ``branch`` at one end of the main path."""
    mp = tree.main_path.vertices
    b = branch.vertices
    n = len(b)
    if tuple(mp[-n:]) == b or tuple(mp[-n:][::-1]) == b:
        lo, hi, at_end = len(mp) - n, len(mp), True
    elif tuple(mp[:n]) == b or tuple(mp[:n][::-1]) == b:
        lo, hi, at_end = 0, n, False
    else:
        raise BranchError("branch must be a terminal segment of the main path")
    attach = {att for att, _ in tree.side_branches}
    if any(v in attach for v in mp[lo:hi]):
        raise BranchError("branch contains a vertex of tree degree three or more")
    return lo, hi, at_end


def tree_shift_rounds(tree: EmbeddedTree, occ, group_in, group_out, grid_cols):
    """Swap rounds for :func:`tree_shift`; also returns the drain order.

    ``occ`` is the occupancy array in the frame the tree lives in.
    """
    occ = np.asarray(occ)
    pos = np.empty_like(occ)
    pos[occ] = np.arange(occ.size)
    mp = list(tree.main_path.vertices)
    branch = tree._branch  # set by tree_shift
    lo, hi, at_end = _branch_span(tree, branch)
    g_in, g_out = set(group_in), set(group_out)
    bcells = set(mp[lo:hi])
    for r in g_in:
        if int(pos[r]) not in bcells:
            raise ValueError(f"robot {r} of group_in is off the branch")
    tree_cells = tree.vertices()
    for r in g_out:
        v = int(pos[r])
        if v not in tree_cells or v in bcells:
            raise ValueError(f"robot {r} of group_out is not on the tree outside the branch")
    # orient the main path so the branch sits at its high end
    if not at_end:
        mp = mp[::-1]
        lo, hi = len(mp) - hi, len(mp) - lo
    index = {v: i for i, v in enumerate(mp)}
    rounds = []
    cur = occ.copy()

    def run(rs):
        nonlocal cur
        rounds.extend(rs)
        cur = apply_rounds(cur, rs)

    def where(r):
        return int(np.nonzero(cur == r)[0][0])

    # phase 1: exchange on the main path itself
    out_main = sorted((r for r in g_out if int(pos[r]) in index), key=lambda r: -index[int(pos[r])])
    ins = sorted(g_in, key=lambda r: index[int(pos[r])])
    j = len(out_main)
    if j:
        types = np.zeros((1, len(mp)), np.int64)
        types[0, [index[int(pos[r])] for r in out_main]] = 1
        types[0, [index[int(pos[r])] for r in ins[:j]]] = 2
        run(line_shift_rounds(np.array(mp)[None, :], types))
    remaining_in = ins[j:]
    side_out = [r for r in g_out if int(pos[r]) not in index]
    if not side_out:
        return rounds, []

    # phase 2: stage side-branch robots at the branch mouths
    branches = []
    for att, br in tree.side_branches:
        cells = list(br.vertices)
        mine = [r for r in side_out if int(pos[r]) in set(cells)]
        if mine:
            branches.append((att, cells, mine))
    stage = []
    lines_by_len = {}
    for att, cells, mine in branches:
        lines_by_len.setdefault(len(cells), []).append((cells, mine))
    for length, group in lines_by_len.items():
        lines = np.array([c[::-1] for c, _ in group])
        marked = np.zeros(lines.shape, np.int64)
        for li, (cells, mine) in enumerate(group):
            for r in mine:
                marked[li, length - 1 - cells.index(int(pos[r]))] = 1
        stage.append(herd_rounds(lines, marked))
    staging = _merge_parallel(stage)
    run(staging)

    # phase 3: drain branches one after another, closest to the branch first
    def priority(item):
        att, cells, mine = item
        return (hi - index[att], att % grid_cols, cells[0] % grid_cols, min(mine))

    order = sorted(branches, key=priority)
    todo_in = list(remaining_in)
    drained = []
    for att, cells, mine in order:
        k = len(mine)
        take = sorted(todo_in, key=lambda r: index[where(r)])[:k]
        todo_in = [r for r in todo_in if r not in take]
        line = cells[:k][::-1] + mp[index[att]:]
        types = np.zeros((1, len(line)), np.int64)
        at = {v: i for i, v in enumerate(line)}
        for r in mine:
            types[0, at[where(r)]] = 1
        for r in take:
            types[0, at[where(r)]] = 2
        run(line_shift_rounds(np.array(line)[None, :], types))
        drained.append((att, cells[0], tuple(sorted(mine))))

    # phase 4: undo the staging
    run([e for e in staging[::-1]])
    return rounds, drained


def _merge_parallel(round_lists):
    """Overlay several independent round sequences index by index."""
    depth = max((len(r) for r in round_lists), default=0)
    out = []
    for i in range(depth):
        parts = [r[i] for r in round_lists if i < len(r)]
        out.append(np.concatenate(parts))
    return out


def tree_shift(grid: GridGraph, tree: EmbeddedTree, config: Configuration, branch: PathSegment,
               group_in, group_out) -> Plan:
    """Trade ``group_in`` (on ``branch``) with ``group_out`` (elsewhere on the tree).

    The phases are: exchange along the main path, stage side-branch robots
    next to the main path, drain the branches in priority order while
    ``group_in`` robots refill them, then undo the staging. Robots of the
    tree outside both groups end where they started.
    """
    g_in, g_out = set(int(g) for g in group_in), set(int(g) for g in group_out)
    if len(g_in) != len(g_out):
        raise SizeMismatch(f"group sizes differ: {len(g_in)} vs {len(g_out)}")
    tree._branch = branch
    _branch_span(tree, branch)
    if not g_in:
        return Plan()
    rounds, _ = tree_shift_rounds(tree, config.occupancy(), g_in, g_out, grid.cols)
    return _finish(grid, config, rounds)


# --------------------------------------------------------------------------
# block phases: arbitrary permutations inside disjoint blocks, in lockstep
# --------------------------------------------------------------------------


class _SearchTable:
    """Block plans for shapes without a precomputed table (3x3), looked up
    lazily from the exhaustive search."""

    def __init__(self, rows, cols):
        from . import oracle

        self.rows, self.cols = rows, cols
        self._oracle = oracle
        self.step_moves = oracle.config_space(rows, cols).gen_moves
        self._cache = {}

    def sequences(self, ranks):
        out = []
        n = self.rows * self.cols
        for r in ranks:
            r = int(r)
            if r not in self._cache:
                perm = kernels.unrank_perms(np.array([r]), n)[0]
                self._cache[r] = self._oracle.generator_path(self.rows, self.cols, perm)
            out.append(self._cache[r])
        return out


def _padded_moves(step_moves):
    k = max(m.shape[0] for m in step_moves)
    out = np.full((len(step_moves), k, 2), -1, np.int64)
    for i, m in enumerate(step_moves):
        out[i, : m.shape[0]] = m
    return out


def _table_seq_matrix(table, ranks):
    if isinstance(table, ExchangeTable):
        return table.seq[ranks]
    seqs = table.sequences(ranks)
    depth = max((len(q) for q in seqs), default=0)
    out = np.full((len(seqs), max(depth, 1)), -1, np.int64)
    for i, q in enumerate(seqs):
        out[i, : len(q)] = q
    return out


@lru_cache(maxsize=None)
def block_table(rows, cols):
    if rows * cols == 6:
        t = exchange_table(rows, cols)
    elif (rows, cols) == (3, 3):
        t = _SearchTable(3, 3)
    else:
        raise ValueError(f"no block table for {rows}x{cols}")
    t.padded = _padded_moves(t.step_moves)
    return t


def _emit_blocks(blocks, perms, shape):
    """Lockstep steps for ``blocks`` (cells in row-major order) and their
    relative permutations, all of one shape."""
    table = block_table(*shape)
    ranks = kernels.rank_perms(perms)
    uranks, grp = np.unique(ranks, return_inverse=True)
    seq = _table_seq_matrix(table, uranks)[grp]
    steps = []
    for s in range(seq.shape[1]):
        sid = seq[:, s]
        act = sid >= 0
        if not act.any():
            break
        mv = table.padded[sid[act]]
        bl = blocks[act]
        ok = mv[..., 0] >= 0
        f = np.take_along_axis(bl, np.where(ok, mv[..., 0], 0), axis=1)[ok]
        t = np.take_along_axis(bl, np.where(ok, mv[..., 1], 0), axis=1)[ok]
        steps.append(np.stack([f, t], axis=1))
    return steps


def zip_steps(*parts):
    """Run several step lists on disjoint vertex sets side by side."""
    depth = max((len(p) for p in parts), default=0)
    out = []
    for s in range(depth):
        chunk = [p[s] for p in parts if s < len(p)]
        out.append(chunk[0] if len(chunk) == 1 else np.concatenate(chunk))
    return out


def compile_phase(phase, grid_cols) -> list[np.ndarray]:
    """Steps for one phase: a list of ``(cells, perm)`` block batches.

    ``cells`` holds each block's vertex ids in row-major order and ``perm``
    the relative permutation (new occupant of cell ``j`` is the old occupant
    of cell ``perm[j]``).
    """
    parts = []
    for cells, perm in phase:
        if cells.shape[0] == 0:
            continue
        rr = cells // grid_cols
        hs = rr.max(axis=1) - rr.min(axis=1) + 1
        for h in np.unique(hs):
            pick = hs == h
            parts.append(_emit_blocks(cells[pick], perm[pick], (int(h), cells.shape[1] // int(h))))
    return zip_steps(*parts)


def compile_phases(phases, grid_cols) -> list[np.ndarray]:
    steps = []
    for ph in phases:
        steps.extend(compile_phase(ph, grid_cols))
    return steps


def invert_phases(phases):
    """Phases undoing ``phases`` (reverse order, inverse block perms)."""
    return [[(c, np.argsort(p, axis=1)) for c, p in ph] for ph in phases[::-1]]


def pair_groups(n_lines, first=0):
    """Split consecutive lines into pairs, ending on a triple if odd."""
    if n_lines < 2:
        raise ValueError("need at least two lines to form blocks")
    groups = [tuple(range(first + i, first + i + 2)) for i in range(0, n_lines - 3, 2)]
    if n_lines % 2:
        groups.append(tuple(range(first + n_lines - 3, first + n_lines)))
    else:
        groups.append((first + n_lines - 2, first + n_lines - 1))
    return groups


def triple_groupings(n_lines, first=0):
    """Groupings of lines into triples whose union covers every line."""
    if n_lines < 3:
        raise ValueError("need at least three lines for two-wide windows")
    a = [tuple(range(first + i, first + i + 3)) for i in range(0, n_lines - 2, 3)]
    if n_lines % 3 == 0:
        return [a]
    return [a, [tuple(range(first + n_lines - 3, first + n_lines))]]


def _block_batch(lines, groups, idx, order):
    """Cells and row-major perms for every (group, window) block."""
    out = []
    by_size = {}
    for g in groups:
        by_size.setdefault(len(g), []).append(g[0])
    nw, w = idx.shape
    for p, firsts in by_size.items():
        firsts = np.array(firsts)
        li = firsts[:, None] + np.arange(p)  # (ng, p)
        cells = lines[li][:, :, idx]  # (ng, p, nw, w)
        loc = order[li]  # (ng, p, nw, w) window-local source index
        q = loc + (np.arange(p) * w)[None, :, None, None]
        cells = cells.transpose(0, 2, 1, 3).reshape(-1, p * w)
        q = q.transpose(0, 2, 1, 3).reshape(-1, p * w)
        keep = (q != np.arange(p * w)).any(axis=1)
        cells, q = cells[keep], q[keep]
        if cells.shape[0] == 0:
            continue
        srt = np.argsort(cells, axis=1)
        inv = np.argsort(srt, axis=1)
        perm = np.take_along_axis(inv, np.take_along_axis(q, srt, axis=1), axis=1)
        out.append((np.take_along_axis(cells, srt, axis=1), perm))
    return out


def band_sort(lines, keys, groupings, max_phases=100000):
    """Phases that stably sort ``keys`` ascending along every line.

    ``lines[i]`` lists the vertices of line ``i`` in order; lines inside one
    group must be geometrically adjacent and parallel. Each phase sorts
    short windows of every line at once (one table lookup per block),
    alternating two window tilings so neighbouring windows exchange tokens.
    """
    lines = np.asarray(lines, dtype=np.int64)
    cur = np.array(keys, dtype=np.int64, copy=True)
    nl, length = lines.shape
    if length >= 3:
        w = 3
        tilings = [np.array(t) for t in _tilings(length)]
    else:
        w = length
        tilings = [np.array([0])]
    plan = [(t, g) for g in groupings for t in tilings]
    phases = []
    idle = 0
    t = 0
    while not np.all(cur[:, :-1] <= cur[:, 1:]):
        starts, groups = plan[t % len(plan)]
        t += 1
        idx = starts[:, None] + np.arange(w)
        sub = cur[:, idx]
        order = np.argsort(sub, axis=-1, kind="stable")
        moved = (order != np.arange(w)).any()
        if not moved:
            idle += 1
            if idle > len(plan):
                raise AssertionError("window sort stalled")
            continue
        idle = 0
        mask = np.zeros(nl, bool)
        for g in groups:
            mask[list(g)] = True
        order[~mask] = np.arange(w)
        cur[:, idx] = np.take_along_axis(sub, order, axis=-1)
        phases.append(_block_batch(lines, groups, idx, order))
        if len(phases) > max_phases:
            raise AssertionError("window sort did not converge")
    return phases
