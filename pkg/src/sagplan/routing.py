"""One split-and-group iteration.

Geometry is handled through a *frame*: a 2D array of global vertex ids
oriented so that axis 0 runs along the longer side. Frame rows
``0 .. h1-1`` form the first half g1, the rest form g2, and "column ``i``"
always means frame column ``i``. Routes of g1 crossing robots run along
their frame row to the exit column and then down the column to the last
g1 row (the g1 side of the split line).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import primitives as prim
from .errors import CycleError
from .grid import Configuration, GridGraph, Plan
from .primitives import EmbeddedTree, PathSegment

# --------------------------------------------------------------------------
# split
# --------------------------------------------------------------------------


def grid_frame(grid: GridGraph) -> np.ndarray:
    f = np.arange(grid.n_vertices, dtype=np.int64).reshape(grid.rows, grid.cols)
    return f if grid.rows >= grid.cols else f.T


def orient(frame: np.ndarray) -> np.ndarray:
    """Same region, long side first (ties keep the current orientation)."""
    return frame if frame.shape[0] >= frame.shape[1] else frame.T


@dataclass
class SplitResult:
    grid: GridGraph
    frame: np.ndarray
    h1: int

    @property
    def g1(self) -> np.ndarray:
        return self.frame[: self.h1]

    @property
    def g2(self) -> np.ndarray:
        return self.frame[self.h1:]

    @property
    def width(self) -> int:
        return self.frame.shape[1]

    def _true_shape(self, part):
        rows = np.unique(part // self.grid.cols).size
        cols = np.unique(part % self.grid.cols).size
        return rows, cols

    @property
    def g1_shape(self) -> tuple[int, int]:
        """(rows, cols) of g1 in grid orientation."""
        return self._true_shape(self.g1)

    @property
    def g2_shape(self) -> tuple[int, int]:
        return self._true_shape(self.g2)

    @property
    def across_rows(self) -> bool:
        """True when the split line runs between two grid rows."""
        return bool(self.frame[0, -1] - self.frame[0, 0] == self.width - 1)

    def in_g1(self) -> np.ndarray:
        """Boolean per grid vertex (only meaningful inside the frame)."""
        mask = np.zeros(self.grid.n_vertices, bool)
        mask[self.g1.ravel()] = True
        return mask


def split(grid: GridGraph, frame: np.ndarray | None = None) -> SplitResult:
    """Cut perpendicular to the longer side; g1 gets the ceiling half.

    Square regions are split across rows.
    """
    f = grid_frame(grid) if frame is None else orient(np.asarray(frame))
    return SplitResult(grid, f, (f.shape[0] + 1) // 2)


# --------------------------------------------------------------------------
# demands and exit matching
# --------------------------------------------------------------------------


@dataclass
class ColumnDemand:
    """``k[i]``: robots in g2's column ``i`` whose goals lie in g1."""

    k: np.ndarray
    down: np.ndarray = None  # g1 robots per column whose goals lie in g2

    @property
    def total(self) -> int:
        return int(self.k.sum())

    def __iter__(self):
        return iter(self.k.tolist())


def _goal_sides(split_: SplitResult, config: Configuration, goal: Configuration):
    occ = config.occupancy()
    in1 = split_.in_g1()
    robots = occ[split_.frame]
    return robots, in1[goal.placement[robots]]


def count_demands(split_: SplitResult, config: Configuration, goal: Configuration) -> ColumnDemand:
    robots, goal_g1 = _goal_sides(split_, config, goal)
    h1 = split_.h1
    up = goal_g1[h1:].sum(axis=0)
    down = (~goal_g1[:h1]).sum(axis=0)
    return ColumnDemand(up.astype(np.int64), down.astype(np.int64))


@dataclass
class Route:
    """Horizontal along frame row ``row`` from ``start`` to ``column``, then
    down that column to the last g1 row."""

    robot: int
    row: int
    start: int
    column: int

    def length(self, h1) -> int:
        return abs(self.start - self.column) + (h1 - 1 - self.row)

    def path(self, frame, h1) -> PathSegment:
        step = 1 if self.column >= self.start else -1
        cells = [frame[self.row, x] for x in range(self.start, self.column + step, step)]
        cells += [frame[r, self.column] for r in range(self.row + 1, h1)]
        return PathSegment(cells)

    def turns(self) -> int:
        return 0


@dataclass
class ExitAssignment:
    split: SplitResult
    routes: list = field(default_factory=list)

    @property
    def exits(self) -> dict:
        return {r.robot: r.column for r in self.routes}

    def total_length(self) -> int:
        return sum(r.length(self.split.h1) for r in self.routes)

    def paths(self) -> dict:
        return {r.robot: r.path(self.split.frame, self.split.h1) for r in self.routes}

    def copy(self) -> "ExitAssignment":
        return ExitAssignment(self.split, [Route(r.robot, r.row, r.start, r.column) for r in self.routes])


def exit_cost_matrix(split_: SplitResult, cells, demand: ColumnDemand):
    """Rows: crossing robots' frame cells ``(row, col)``; columns: one slot
    per unit of demand, ordered by column."""
    slots = np.repeat(np.arange(split_.width), demand.k)
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    depth = split_.h1 - 1 - cells[:, 0]
    cost = depth[:, None] + np.abs(cells[:, 1][:, None] - slots[None, :])
    return cost, slots


def match_exits(split_: SplitResult, config: Configuration, goal: Configuration,
                demand: ColumnDemand | None = None) -> ExitAssignment:
    """Minimum total distance assignment of g1 crossers to exit columns."""
    if demand is None:
        demand = count_demands(split_, config, goal)
    robots, goal_g1 = _goal_sides(split_, config, goal)
    h1 = split_.h1
    rr, cc = np.nonzero(~goal_g1[:h1])
    ids = robots[rr, cc]
    order = np.argsort(ids, kind="stable")
    rr, cc, ids = rr[order], cc[order], ids[order]
    if ids.size != demand.total:
        raise ValueError("flow balance violated")
    if ids.size == 0:
        return ExitAssignment(split_, [])
    cost, slots = exit_cost_matrix(split_, np.stack([rr, cc], axis=1), demand)
    ri, si = linear_sum_assignment(cost)
    routes = [Route(int(ids[i]), int(rr[i]), int(cc[i]), int(slots[j])) for i, j in zip(ri, si)]
    return ExitAssignment(split_, routes)


# --------------------------------------------------------------------------
# crossovers
# --------------------------------------------------------------------------


def is_crossover(a: Route, b: Route) -> bool:
    """``b``'s vertical trunk cuts through the interior of ``a``'s
    horizontal segment, forming a "+"."""
    lo, hi = sorted((a.start, a.column))
    return lo < b.column < hi and b.row < a.row


def find_crossovers(assignment: ExitAssignment) -> list[tuple[int, int]]:
    """All ``(i, j)`` route index pairs where route j crosses route i."""
    rs = assignment.routes
    return [(i, j) for i in range(len(rs)) for j in range(len(rs)) if i != j and is_crossover(rs[i], rs[j])]


def count_crossovers(assignment: ExitAssignment) -> int:
    return len(find_crossovers(assignment))


def resolve_crossovers(assignment: ExitAssignment, max_rewrites=None) -> ExitAssignment:
    """Swap exits of crossing route pairs until none cross.

    The route whose horizontal segment was cut gets the shorter exit. With
    both robots on the same side of the cut column the total length is
    unchanged while the depth-weighted horizontal length strictly grows, so
    the loop terminates; for an optimal assignment no other case exists.
    """
    out = assignment.copy()
    rs = sorted(out.routes, key=lambda r: r.robot)
    out.routes = rs
    n = len(rs)
    limit = max_rewrites if max_rewrites is not None else 4 * n * n * max(1, out.split.width) + 16
    for _ in range(limit):
        hit = None
        for i in range(n):
            for j in range(n):
                if i != j and is_crossover(rs[i], rs[j]):
                    hit = (i, j)
                    break
            if hit:
                break
        if hit is None:
            return out
        a, b = rs[hit[0]], rs[hit[1]]
        a.column, b.column = b.column, a.column
    raise RuntimeError("crossover removal did not terminate")


# --------------------------------------------------------------------------
# trees and bundles
# --------------------------------------------------------------------------


def build_trees(split_: SplitResult, assignment: ExitAssignment, config: Configuration | None = None,
                goal: Configuration | None = None) -> list[EmbeddedTree]:
    """One tree per exit column: the column as trunk, merged horizontal
    route segments as side branches.

    With ``config``/``goal`` the trunk also reaches down to the deepest g2
    robot bound for g1 in that column.
    """
    frame, h1 = split_.frame, split_.h1
    bottom = {}
    ups = {}
    if config is not None and goal is not None:
        robots, goal_g1 = _goal_sides(split_, config, goal)
        rr, cc = np.nonzero(goal_g1[h1:])
        for r, c in zip(rr + h1, cc):
            bottom[int(c)] = max(bottom.get(int(c), h1), int(r))
            ups.setdefault(int(c), []).append(int(robots[r, c]))
    by_col = {}
    for r in assignment.routes:
        by_col.setdefault(r.column, []).append(r)
    trees = []
    for c in sorted(set(by_col) | set(bottom)):
        routes = by_col.get(c, [])
        top = min((r.row for r in routes), default=h1 - 1)
        low = bottom.get(c, h1)
        main = PathSegment([frame[r, c] for r in range(top, low + 1)])
        reach = {}
        for r in routes:
            if r.start == c:
                continue
            side = 1 if r.start > c else -1
            key = (r.row, side)
            reach[key] = max(reach.get(key, 0), abs(r.start - c))
        branches = []
        for (row, side), ext in sorted(reach.items()):
            cells = [frame[row, c + side * d] for d in range(1, ext + 1)]
            branches.append((int(frame[row, c]), PathSegment(cells)))
        t = EmbeddedTree(main, branches, column=c)
        t.routes = sorted(routes, key=lambda r: r.robot)
        t.top = top
        t.up_robots = sorted(ups.get(c, []))
        trees.append(t)
    return trees


def follows(t1: EmbeddedTree, t2: EmbeddedTree) -> bool:
    """Robots bound for ``t2`` traverse ``t1``'s trunk."""
    if t1 is t2:
        return False
    c1 = t1.column
    for r in t2.routes:
        lo, hi = sorted((r.start, r.column))
        if lo <= c1 <= hi and c1 != r.column and r.row >= t1.top:
            return True
    return False


@dataclass
class Bundle:
    leader: EmbeddedTree
    followers: list = field(default_factory=list)

    @property
    def trees(self):
        return [self.leader] + list(self.followers)


def follower_graph(trees):
    """Adjacency ``i -> j`` when tree i follows tree j."""
    return {i: [j for j in range(len(trees)) if follows(trees[i], trees[j])] for i in range(len(trees))}


def find_bundles(trees: list[EmbeddedTree]) -> list[Bundle]:
    """Group trees into weakly connected follower components.

    The leader is the component's non-follower with the smallest column;
    followers are listed in breadth-first order from the leader.
    """
    g = follower_graph(trees)
    n = len(trees)
    _check_acyclic(g)
    und = {i: set() for i in range(n)}
    for i, js in g.items():
        for j in js:
            und[i].add(j)
            und[j].add(i)
    seen = set()
    bundles = []
    for s in range(n):
        if s in seen:
            continue
        comp = []
        todo = [s]
        seen.add(s)
        while todo:
            u = todo.pop()
            comp.append(u)
            for w in und[u]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        roots = [i for i in comp if not g[i]]
        if not roots:
            raise CycleError("follower relation has no leader")
        lead = min(roots, key=lambda i: trees[i].column)
        order, q, got = [], [lead], {lead}
        while q:
            u = q.pop(0)
            for w in sorted(und[u], key=lambda i: trees[i].column):
                if w not in got:
                    got.add(w)
                    order.append(w)
                    q.append(w)
        bundles.append(Bundle(trees[lead], [trees[i] for i in order]))
    bundles.sort(key=lambda b: b.leader.column)
    return bundles


def _check_acyclic(g):
    state = {}

    def visit(u):
        state[u] = 1
        for w in g[u]:
            if state.get(w) == 1:
                raise CycleError(f"follower cycle through trees {u} and {w}")
            if w not in state:
                visit(w)
        state[u] = 2

    for u in g:
        if u not in state:
            visit(u)


def shared_branches(t1: EmbeddedTree, t2: EmbeddedTree) -> int:
    """Number of frame rows where side branches of both trees overlap."""
    rows = 0
    b1 = {}
    for _, br in t1.side_branches:
        b1.setdefault(br.vertices[0], set()).update(br.vertices)
    cells1 = set().union(*b1.values()) if b1 else set()
    seen_rows = set()
    for _, br in t2.side_branches:
        if cells1 & set(br.vertices) and br.vertices[0] not in seen_rows:
            seen_rows.add(br.vertices[0])
            rows += 1
    return rows


# --------------------------------------------------------------------------
# scheduling one iteration
# --------------------------------------------------------------------------


def _apply_phases(occ, phases):
    for ph in phases:
        for cells, perm in ph:
            occ[cells] = np.take_along_axis(occ[cells], perm, axis=1)
    return occ


def _row_groupings(h1, h, width, n_regions=1):
    out = []
    for k in range(n_regions):
        base = k * h
        if width >= 3:
            gs = [prim.pair_groups(h1, base) + prim.pair_groups(h - h1, base + h1)]
        else:
            a = prim.triple_groupings(h1, base)
            b = prim.triple_groupings(h - h1, base + h1)
            gs = [(a[i] if i < len(a) else []) + (b[i] if i < len(b) else [])
                  for i in range(max(len(a), len(b)))]
        for i, g in enumerate(gs):
            if i == len(out):
                out.append([])
            out[i].extend(g)
    return out


def _cyclic_targets(mask):
    """Destination column per cell so that marked cells of each row land on
    cyclically consecutive columns (one shared counter per half)."""
    nr, w = mask.shape
    keys = np.empty((nr, w), np.int64)
    t = 0
    cols = np.arange(w)
    for r in range(nr):
        m = mask[r]
        a = int(m.sum())
        tgt = np.sort((t + np.arange(a)) % w)
        rest = np.setdiff1d(cols, tgt, assume_unique=True)
        keys[r, m] = tgt
        keys[r, ~m] = rest
        t += a
    return keys


def column_quota(k, w):
    """``k`` tokens spread as evenly as possible over ``w`` columns."""
    c = np.arange(w + 1)
    edges = (c * k) // w
    return np.diff(edges)


def _sweep_targets(mask, quota):
    """Left-to-right sweep: column ``c`` takes the leftmost pending marked
    cells of ``quota[c]`` distinct rows. Keeps each row's order, so marked
    cells only drift a little for random inputs. ``None`` if stuck."""
    nr, w = mask.shape
    pend = [list(np.nonzero(mask[r])[0]) for r in range(nr)]
    head = [0] * nr
    tgt = [[] for _ in range(nr)]
    for c in range(w):
        left = w - c
        rows = [r for r in range(nr) if head[r] < len(pend[r])]
        need = int(quota[c])
        forced = [r for r in rows if len(pend[r]) - head[r] >= left]
        if len(forced) > need or len(rows) < need:
            return None
        rest = sorted((r for r in rows if len(pend[r]) - head[r] < left),
                      key=lambda r: (pend[r][head[r]], -(len(pend[r]) - head[r]), r))
        for r in forced + rest[: need - len(forced)]:
            tgt[r].append(c)
            head[r] += 1
    cols = np.arange(w)
    keys = np.empty((nr, w), np.int64)
    for r in range(nr):
        if head[r] != len(pend[r]):
            return None
        t = np.array(tgt[r], dtype=np.int64)
        keys[r, mask[r]] = t
        keys[r, ~mask[r]] = np.setdiff1d(cols, t, assume_unique=True)
    return keys


def _row_targets(a_mask, b_mask):
    """Row-phase destinations for both halves with equal per-column counts."""
    w = a_mask.shape[1]
    quota = column_quota(int(a_mask.sum()), w)
    ka = _sweep_targets(a_mask, quota)
    kb = _sweep_targets(b_mask, quota)
    if ka is None or kb is None:
        return _cyclic_targets(a_mask), _cyclic_targets(b_mask)
    return ka, kb


def _column_keys(a_mask, b_mask, h1):
    """Per column, send the i-th crosser of g1 to the i-th crosser cell of
    g2 and back; everyone else keeps their cell."""
    w = a_mask.shape[1]
    h = h1 + b_mask.shape[0]
    keys = np.tile(np.arange(h), (w, 1))
    for c in range(w):
        a = np.nonzero(a_mask[:, c])[0]
        b = np.nonzero(b_mask[:, c])[0] + h1
        if a.size != b.size:
            raise AssertionError("column counts differ after the row phase")
        keys[c, a] = b
        keys[c, b] = a
    return keys


def iteration_phases(frames, h1, occ, goal_in_g1):
    """Block phases moving every robot into its goal half.

    ``frames`` is one ``(h, w)`` frame or a stack ``(n, h, w)`` of equally
    shaped disjoint regions handled together. ``occ`` is the global
    occupancy array and ``goal_in_g1`` a boolean per robot. Returns
    ``(phase_lists, new_occ)``: phase sequences to be compiled in order.
    Bystanders end where they started.
    """
    frames = np.asarray(frames)
    if frames.ndim == 2:
        frames = frames[None]
    nr, h, w = frames.shape
    occ = occ.copy()
    g1cells = goal_in_g1[occ[frames]]
    A = ~g1cells[:, :h1]
    B = g1cells[:, h1:]
    if not A.any():
        return [], occ
    # row phase: give every column as many g1 crossers as g2 crossers
    keys = np.empty((nr, h, w), np.int64)
    for k in range(nr):
        ka, kb = _row_targets(A[k], B[k])
        keys[k, :h1], keys[k, h1:] = ka, kb
    rows = frames.reshape(nr * h, w)
    row_ph = prim.band_sort(rows, keys.reshape(nr * h, w), _row_groupings(h1, h, w, nr))
    _apply_phases(occ, row_ph)
    g1cells = goal_in_g1[occ[frames]]
    # column phase: crossers trade cells pairwise inside each column
    keys = np.concatenate([_column_keys(~g[:h1], g[h1:], h1) for g in g1cells])
    cols = frames.transpose(0, 2, 1).reshape(nr * w, h)
    groups = [g for k in range(nr) for g in prim.pair_groups(w, k * w)]
    col_ph = prim.band_sort(cols, keys, [groups])
    _apply_phases(occ, col_ph)
    # undo the row phase so bystanders return home
    back = prim.invert_phases(row_ph)
    _apply_phases(occ, back)
    return [row_ph, col_ph, back], occ


def iteration_steps(frames, h1, occ, goal_in_g1, grid_cols):
    phase_lists, new_occ = iteration_phases(frames, h1, occ, goal_in_g1)
    steps = []
    for pl in phase_lists:
        steps.extend(prim.compile_phases(pl, grid_cols))
    return steps, new_occ


def _small_iteration(frame, h1, occ, goal_in_g1, grid_cols):
    """Thin regions too short for line triples: swap the i-th crosser of
    each half and solve that exactly."""
    from .solver import _solve_five_by_two, _solve_tiny

    robots = occ[frame]
    side = goal_in_g1[robots]
    a = frame[:h1][~side[:h1]]
    b = frame[h1:][side[h1:]]
    goal_pos = np.empty(occ.size, np.int64)
    goal_pos[occ] = np.arange(occ.size)
    goal_pos[occ[a]], goal_pos[occ[b]] = b, a
    occ = occ.copy()
    if a.size == 0:
        return [], occ
    if frame.size <= 9:
        return _solve_tiny(frame, occ, goal_pos, grid_cols), occ
    return _solve_five_by_two(frame, occ, goal_pos, grid_cols), occ


def schedule_iteration(split_: SplitResult, config: Configuration, goal: Configuration):
    """Plan moving every robot of the split region into its goal half.

    Returns ``(plan, configuration_after)``. Robots that need not cross the
    split line end where they started.
    """
    occ = config.occupancy()
    in1 = split_.in_g1()
    goal_in_g1 = in1[goal.placement]
    f = split_.frame
    if f.shape[1] == 2 and f.shape[0] < 6:
        steps, new_occ = _small_iteration(f, split_.h1, occ, goal_in_g1, split_.grid.cols)
    else:
        steps, new_occ = iteration_steps(f, split_.h1, occ, goal_in_g1, split_.grid.cols)
    if not steps:
        return Plan(), config
    plan, _ = prim.steps_to_plan(occ, steps)
    return plan, Configuration.from_occupancy(new_occ)
