"""Exact optimal-makespan solving on tiny grids, plus Manhattan lower bounds.

Under full occupancy a synchronized step is a set of vertex-disjoint
cycles, each rotated one position. The search enumerates those steps from
the simple cycles of the grid graph and runs a breadth-first search over
all ``|V|!`` configurations once per grid shape.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from . import kernels
from .errors import InfeasibleError, SizeError
from .grid import Instance, Plan

MAX_VERTICES = 9


def _neighbors(rows, cols, v):
    r, c = divmod(v, cols)
    out = []
    for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
        rr, cc = r + dr, c + dc
        if 0 <= rr < rows and 0 <= cc < cols:
            out.append(rr * cols + cc)
    return out


def simple_cycles(rows: int, cols: int) -> list[tuple[int, ...]]:
    """All simple cycles of the grid graph, one orientation each.

    A cycle is listed from its smallest vertex, in the direction whose second
    vertex is smaller than its last.
    """
    n = rows * cols
    nbrs = [_neighbors(rows, cols, v) for v in range(n)]
    found = []

    def walk(start, path, seen):
        for w in nbrs[path[-1]]:
            if w == start and len(path) >= 4 and path[1] < path[-1]:
                found.append(tuple(path))
            elif w > start and w not in seen:
                seen.add(w)
                path.append(w)
                walk(start, path, seen)
                path.pop()
                seen.discard(w)

    for s in range(n):
        walk(s, [s], {s})
    return sorted(found, key=lambda cyc: (len(cyc), cyc))


@dataclass
class ConfigSpace:
    """Successor model of a fully occupied tiny grid.

    ``gens[g]`` is a position permutation: occupancy ``occ`` becomes
    ``occ[gens[g]]``. ``gen_moves[g]`` lists the ``(from, to)`` vertex pairs
    of that step.
    """

    rows: int
    cols: int
    cycles: list = field(default_factory=list)
    gens: np.ndarray = None
    gen_moves: list = field(default_factory=list)

    @classmethod
    def build(cls, rows: int, cols: int) -> "ConfigSpace":
        n = rows * cols
        cycles = simple_cycles(rows, cols)
        sets = []

        def extend(i, chosen, used):
            if chosen:
                sets.append(list(chosen))
            for j in range(i, len(cycles)):
                cv = set(cycles[j])
                if used.isdisjoint(cv):
                    chosen.append(j)
                    extend(j + 1, chosen, used | cv)
                    chosen.pop()

        extend(0, [], set())
        gens, gen_moves = [], []
        for cset in sets:
            for dirs in product((1, -1), repeat=len(cset)):
                g = np.arange(n)
                mv = []
                for j, d in zip(cset, dirs):
                    cyc = cycles[j] if d == 1 else cycles[j][::-1]
                    k = len(cyc)
                    for i in range(k):
                        u, v = cyc[i], cyc[(i + 1) % k]
                        g[v] = u
                        mv.append((u, v))
                gens.append(g)
                gen_moves.append(np.array(sorted(mv), dtype=np.int64))
        return cls(rows, cols, cycles, np.array(gens, dtype=np.int64).reshape(-1, n), gen_moves)

    @property
    def n_vertices(self):
        return self.rows * self.cols

    def successors(self, occ) -> list[np.ndarray]:
        occ = np.asarray(occ)
        return [occ[g] for g in self.gens]


@lru_cache(maxsize=None)
def config_space(rows: int, cols: int) -> ConfigSpace:
    return ConfigSpace.build(rows, cols)


@lru_cache(maxsize=None)
def bfs_table(rows: int, cols: int):
    """``(dist, parent)`` over Lehmer ranks of relative occupancy perms."""
    n = rows * cols
    if n > MAX_VERTICES:
        raise SizeError(f"exact search is limited to {MAX_VERTICES} vertices, got {rows}x{cols}")
    space = config_space(rows, cols)
    dist, parent = kernels.bfs_permutations(n, space.gens)
    return dist, parent


def diameter(rows: int, cols: int) -> int:
    """Largest optimal makespan over all reachable relative permutations."""
    dist, _ = bfs_table(rows, cols)
    return int(dist.max())


def _relative(start_pos, goal_pos):
    # occupancy product P with occ_start[P] == occ_goal
    n = start_pos.size
    occ_goal = np.empty(n, np.int64)
    occ_goal[goal_pos] = np.arange(n)
    return start_pos[occ_goal]


def generator_path(rows: int, cols: int, rel) -> list[int]:
    """Shortest generator sequence turning the identity into ``rel``."""
    dist, parent = bfs_table(rows, cols)
    space = config_space(rows, cols)
    p = np.asarray(rel, dtype=np.int64).copy()
    r = kernels.rank_perm(p)
    if dist[r] < 0:
        raise InfeasibleError(f"configuration unreachable on {rows}x{cols} grid")
    seq = []
    while dist[r] > 0:
        g = int(parent[r])
        seq.append(g)
        prev = np.empty_like(p)
        prev[space.gens[g]] = p
        p = prev
        r = kernels.rank_perm(p)
    seq.reverse()
    return seq


def optimal_plan_arrays(rows: int, cols: int, start_pos, goal_pos) -> Plan:
    """Optimal plan between two placements on a tiny ``rows x cols`` grid.

    Accepts grids the public constructors reject (e.g. 2x2) so the
    infeasible case can be exercised.
    """
    start_pos = np.asarray(start_pos, dtype=np.int64)
    goal_pos = np.asarray(goal_pos, dtype=np.int64)
    n = rows * cols
    if n > MAX_VERTICES:
        raise SizeError(f"oracle refuses grids above {MAX_VERTICES} vertices ({rows}x{cols})")
    rel = _relative(start_pos, goal_pos)
    seq = generator_path(rows, cols, rel)
    space = config_space(rows, cols)
    occ = np.empty(n, np.int64)
    occ[start_pos] = np.arange(n)
    steps = []
    for g in seq:
        fv = space.gen_moves[g]
        steps.append(np.column_stack([occ[fv[:, 0]], fv[:, 0], fv[:, 1]]))
        occ = occ[space.gens[g]]
    return Plan.from_steps(steps)


def optimal_makespan(instance: Instance) -> tuple[int, Plan]:
    g = instance.grid
    plan = optimal_plan_arrays(g.rows, g.cols, instance.start.placement, instance.goal.placement)
    return plan.makespan, plan


def makespan_lower_bound(instance: Instance) -> int:
    """Largest single-robot Manhattan displacement."""
    d = instance.grid.manhattan(instance.start.placement, instance.goal.placement)
    return int(d.max()) if d.size else 0


def distance_lower_bound(instance: Instance) -> int:
    """Sum of single-robot Manhattan displacements."""
    return int(instance.grid.manhattan(instance.start.placement, instance.goal.placement).sum())
