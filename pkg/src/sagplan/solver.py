"""Recursive split-and-group solver.

Each level moves every robot into the half holding its goal, then both
halves are solved independently and their step sequences are run side by
side. Regions of at most nine vertices are solved optimally by exhaustive
search; the 2x5 region (whose split would leave a 2x2 half) gets a short
dedicated routine built from 3x2 block permutations.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels, oracle
from . import primitives as prim
from .errors import InstanceError, SagError
from .grid import Configuration, Instance, Plan, VerificationReport, verify_plan
from .routing import grid_frame, iteration_phases, orient


@dataclass
class SolveReport:
    plan: Plan
    makespan: int
    total_distance: int
    iterations: list = field(default_factory=list)
    runtime: float = 0.0
    verification: VerificationReport | None = None

    @property
    def valid(self) -> bool:
        return self.verification is not None and self.verification.valid


def _validate(instance):
    if not isinstance(instance, Instance):
        raise InstanceError(f"expected an Instance, got {type(instance).__name__}")
    n = instance.grid.n_vertices
    if len(instance.start) != n or len(instance.goal) != n:
        raise InstanceError("configuration size does not match the grid")
    return instance


# --------------------------------------------------------------------------
# small regions
# --------------------------------------------------------------------------


def _local_ids(cells, grid_cols):
    r, c = cells // grid_cols, cells % grid_cols
    r0, c0 = r.min(), c.min()
    h, w = int(r.max() - r0 + 1), int(c.max() - c0 + 1)
    return (r - r0) * w + (c - c0), h, w


def _solve_tiny(frame, occ, goal_pos, grid_cols):
    """Optimal steps for a region of at most nine vertices; updates ``occ``."""
    cells = frame.ravel()
    local, h, w = _local_ids(cells, grid_cols)
    to_global = np.empty(cells.size, np.int64)
    to_global[local] = cells
    robots = occ[cells]
    start = local
    gl = np.empty(grid_cols * (cells.max() // grid_cols + 1), np.int64)
    gl[cells] = local
    goal = gl[goal_pos[robots]]
    plan = oracle.optimal_plan_arrays(h, w, start, goal)
    steps = [np.stack([to_global[s[:, 1]], to_global[s[:, 2]]], axis=1) for s in plan.steps()]
    occ[goal_pos[robots]] = robots
    return steps


def _block_op(cells, want, occ, grid_cols):
    """Steps rearranging the 6-cell block ``cells`` so that ``want[j]``
    ends on ``cells[j]``; updates ``occ``."""
    cells = np.asarray(cells)
    want = np.asarray(want)
    srt = np.argsort(cells)
    s = cells[srt]
    w_sorted = want[srt]
    where = {int(occ[v]): j for j, v in enumerate(s)}
    perm = np.array([where[int(r)] for r in w_sorted], dtype=np.int64)
    if np.array_equal(perm, np.arange(perm.size)):
        return []
    rr = s // grid_cols
    h = int(rr.max() - rr.min() + 1)
    steps = prim._emit_blocks(s[None, :], perm[None, :], (h, s.size // h))
    occ[s] = w_sorted
    return steps


def _solve_five_by_two(frame, occ, goal_pos, grid_cols):
    """Five-by-two region: pull the four robots bound for the last two rows
    through the overlapping lower block, then finish both blocks exactly."""
    steps = []
    upper = frame[0:3].ravel()
    lower = frame[2:5].ravel()
    low_cells = set(frame[3:5].ravel().tolist())
    bound = {int(r) for r in occ[frame.ravel()] if int(goal_pos[r]) in low_cells}
    for _ in range(4):
        cur = [int(r) for r in occ[lower]]
        if bound <= set(cur):
            want = list(cur)
            mine = {int(goal_pos[r]): r for r in bound}
            rest = [r for r in cur if r not in bound]
            want = [mine.get(int(v)) for v in lower]
            want = [r if r is not None else rest.pop(0) for r in want]
            steps += _block_op(lower, want, occ, grid_cols)
            break
        ins = [r for r in cur if r in bound]
        outs = [r for r in cur if r not in bound]
        want = outs[:2] + ins + outs[2:]
        steps += _block_op(lower, want, occ, grid_cols)
        cur = [int(r) for r in occ[upper]]
        want = list(cur)
        for j in (4, 5):
            if want[j] in bound:
                continue
            for i in range(4):
                if want[i] in bound:
                    want[i], want[j] = want[j], want[i]
                    break
        steps += _block_op(upper, want, occ, grid_cols)
    cur = [int(r) for r in occ[upper]]
    mine = {int(goal_pos[r]): r for r in cur}
    want = [mine[int(v)] for v in upper]
    steps += _block_op(upper, want, occ, grid_cols)
    return steps


# --------------------------------------------------------------------------
# recursion
# --------------------------------------------------------------------------


def _merge_stages(stage_lists):
    """Overlay the phase lists of differently shaped regions stage by stage."""
    merged = []
    for stages in zip(*stage_lists):
        depth = max(len(p) for p in stages)
        for i in range(depth):
            merged.append([b for p in stages if i < len(p) for b in p[i]])
    return merged


def _note(trace, level, frame, grid_cols, makespan, kind):
    rows = np.unique(frame // grid_cols).size
    cols = frame.size // rows
    trace.append((level, rows, cols, makespan, kind))


def _summarize(trace):
    levels = {}
    for level, rows, cols, mk, kind in trace:
        d = levels.setdefault(level, {"level": level, "sizes": set(), "makespan": 0, "regions": 0})
        d["sizes"].add(f"{rows}x{cols}")
        d["makespan"] = max(d["makespan"], mk)
        d["regions"] += 1
    out = []
    for level in sorted(levels):
        d = levels[level]
        d["sizes"] = sorted(d["sizes"])
        out.append(d)
    return out


def sag_steps(instance: Instance):
    """Vertex-level steps ``(k, 2)`` plus the raw recursion trace.

    The recursion runs level by level: all regions of one depth perform
    their iteration together, and each region's two halves start right
    after it. Regions solved directly run from the start of their level.
    """
    g = instance.grid
    gc = g.cols
    occ = instance.start.occupancy().copy()
    goal_pos = np.asarray(instance.goal.placement)
    mask = np.zeros(g.n_vertices, bool)
    timeline = []
    trace = []

    def add(t0, steps):
        for i, st in enumerate(steps):
            while len(timeline) <= t0 + i:
                timeline.append([])
            timeline[t0 + i].append(st)

    regions = [grid_frame(g)]
    t = 0
    level = 0
    while regions:
        shapes = {}
        for f in regions:
            f = orient(f)
            if f.size <= oracle.MAX_VERTICES:
                st = _solve_tiny(f, occ, goal_pos, gc)
            elif f.shape == (5, 2):
                st = _solve_five_by_two(f, occ, goal_pos, gc)
            else:
                shapes.setdefault(f.shape, []).append(f)
                continue
            add(t, st)
            _note(trace, level, f, gc, len(st), "base")
        stage_lists = []
        children = []
        for (h, w), frames in sorted(shapes.items()):
            stack = np.stack(frames)
            h1 = (h + 1) // 2
            mask[:] = False
            mask[stack[:, :h1].ravel()] = True
            phases, new = iteration_phases(stack, h1, occ, mask[goal_pos])
            cells = stack.ravel()
            occ[cells] = new[cells]
            if phases:
                stage_lists.append(phases)
            for f in frames:
                children += [f[:h1], f[h1:]]
        steps = prim.compile_phases(_merge_stages(stage_lists), gc) if stage_lists else []
        add(t, steps)
        for (h, w), frames in sorted(shapes.items()):
            for f in frames:
                _note(trace, level, f, gc, len(steps), "split")
        t += len(steps)
        regions = children
        level += 1
    steps = [x[0] if len(x) == 1 else np.concatenate(x) for x in timeline if x]
    return steps, trace


def sag(instance: Instance, verify=True) -> SolveReport:
    """Split-and-group plan for ``instance``; verified unless told not to."""
    _validate(instance)
    t0 = time.perf_counter()
    steps, trace = sag_steps(instance)
    plan, _ = prim.steps_to_plan(instance.start.occupancy(), steps)
    runtime = time.perf_counter() - t0
    rep = verify_plan(instance, plan) if verify else None
    return SolveReport(plan, plan.makespan, plan.total_distance, _summarize(trace), runtime, rep)


def solve_small(instance: Instance) -> Plan:
    """Optimal-makespan plan on a grid with at most nine vertices."""
    _validate(instance)
    _, plan = oracle.optimal_makespan(instance)
    return plan


def solve(instance: Instance) -> SolveReport:
    """Verified plan for ``instance``; raises rather than return a bad plan."""
    _validate(instance)
    if instance.grid.n_vertices <= oracle.MAX_VERTICES:
        t0 = time.perf_counter()
        plan = solve_small(instance)
        rep = verify_plan(instance, plan)
        g = instance.grid
        trace = [{"level": 0, "sizes": [f"{g.rows}x{g.cols}"], "makespan": plan.makespan, "regions": 1}]
        report = SolveReport(plan, plan.makespan, plan.total_distance, trace,
                             time.perf_counter() - t0, rep)
    else:
        report = sag(instance, verify=True)
    if not report.valid:
        raise SagError(f"internal error, refusing to emit plan: {report.verification.describe()}")
    return report
