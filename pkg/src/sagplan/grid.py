"""Grid world, configurations, synchronized plans and the plan checker."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import BijectionError, ConflictError, SizeError


@dataclass(frozen=True)
class GridGraph:
    """Rectangular 4-connected grid; vertex id = row * cols + col."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise SizeError(f"grid sides must be positive, got {self.rows}x{self.cols}")
        if max(self.rows, self.cols) < 3 or min(self.rows, self.cols) < 2:
            raise SizeError(
                f"{self.rows}x{self.cols} grid too small: need long side >= 3 and short side >= 2"
            )

    @property
    def m_long(self) -> int:
        return max(self.rows, self.cols)

    @property
    def m_short(self) -> int:
        return min(self.rows, self.cols)

    @property
    def long_axis(self) -> str:
        """``"rows"`` when the row count is the long side (ties included)."""
        return "rows" if self.rows >= self.cols else "cols"

    @property
    def n_vertices(self) -> int:
        return self.rows * self.cols

    @property
    def n_edges(self) -> int:
        return self.rows * (self.cols - 1) + self.cols * (self.rows - 1)

    def vertex(self, row: int, col: int) -> int:
        return row * self.cols + col

    def coords(self, v: int) -> tuple[int, int]:
        return divmod(int(v), self.cols)

    def is_edge(self, u: int, v: int) -> bool:
        n = self.n_vertices
        if not (0 <= u < n and 0 <= v < n):
            return False
        (ur, uc), (vr, vc) = self.coords(u), self.coords(v)
        return abs(ur - vr) + abs(uc - vc) == 1

    def neighbors(self, v: int) -> list[int]:
        r, c = self.coords(v)
        out = []
        for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < self.rows and 0 <= cc < self.cols:
                out.append(rr * self.cols + cc)
        return out

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for r in range(self.rows):
            for c in range(self.cols):
                v = r * self.cols + c
                if c + 1 < self.cols:
                    out.append((v, v + 1))
                if r + 1 < self.rows:
                    out.append((v, v + self.cols))
        return out

    def manhattan(self, u, v):
        u = np.asarray(u)
        v = np.asarray(v)
        return np.abs(u // self.cols - v // self.cols) + np.abs(u % self.cols - v % self.cols)


class Configuration:
    """Robot -> vertex placement; a bijection onto all grid vertices."""

    __slots__ = ("placement",)

    def __init__(self, placement, n_vertices: int | None = None):
        arr = np.array(placement, dtype=np.int64).reshape(-1)
        n = arr.size if n_vertices is None else n_vertices
        if arr.size != n or not np.array_equal(np.sort(arr), np.arange(n)):
            raise BijectionError("placement is not a bijection onto the vertex set")
        arr.flags.writeable = False
        self.placement = arr

    @classmethod
    def identity(cls, n: int) -> "Configuration":
        return cls(np.arange(n))

    @classmethod
    def from_occupancy(cls, occ) -> "Configuration":
        occ = np.asarray(occ, dtype=np.int64)
        pos = np.empty_like(occ)
        pos[occ] = np.arange(occ.size)
        return cls(pos)

    def occupancy(self) -> np.ndarray:
        occ = np.empty_like(self.placement)
        occ[self.placement] = np.arange(self.placement.size)
        return occ

    def __len__(self):
        return self.placement.size

    def __getitem__(self, robot):
        return int(self.placement[robot])

    def __eq__(self, other):
        return isinstance(other, Configuration) and np.array_equal(self.placement, other.placement)

    def __hash__(self):
        return hash(self.placement.tobytes())

    def __repr__(self):
        return f"Configuration({self.placement.tolist()})"


class Move(NamedTuple):
    robot: int
    source: int
    target: int


_EMPTY_MOVES = np.empty((0, 3), np.int64)


@dataclass(frozen=True)
class Plan:
    """Synchronized schedule stored flat.

    ``moves`` is ``(M, 3)`` of ``(robot, from, to)``; step ``s`` owns rows
    ``offsets[s]:offsets[s+1]``. Waiting robots emit nothing.
    """

    moves: np.ndarray = field(default_factory=lambda: _EMPTY_MOVES)
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(1, np.int64))

    @classmethod
    def from_steps(cls, steps) -> "Plan":
        arrs = [np.asarray(s, dtype=np.int64).reshape(-1, 3) for s in steps]
        sizes = np.array([a.shape[0] for a in arrs], dtype=np.int64)
        offsets = np.zeros(len(arrs) + 1, np.int64)
        np.cumsum(sizes, out=offsets[1:])
        moves = np.concatenate(arrs) if arrs else _EMPTY_MOVES
        return cls(moves, offsets)

    @property
    def makespan(self) -> int:
        return self.offsets.shape[0] - 1

    @property
    def total_distance(self) -> int:
        return int(self.moves.shape[0])

    def __len__(self):
        return self.makespan

    def step(self, s: int) -> np.ndarray:
        return self.moves[self.offsets[s]:self.offsets[s + 1]]

    def steps(self):
        for s in range(self.makespan):
            yield self.step(s)

    def step_moves(self, s: int) -> list[Move]:
        return [Move(*map(int, row)) for row in self.step(s)]

    def __add__(self, other: "Plan") -> "Plan":
        moves = np.concatenate([self.moves, other.moves])
        offsets = np.concatenate([self.offsets, other.offsets[1:] + self.offsets[-1]])
        return Plan(moves, offsets)

    def __eq__(self, other):
        return (
            isinstance(other, Plan)
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.moves, other.moves)
        )

    def to_dict(self) -> dict:
        steps = []
        for st in self.steps():
            steps.append([{"robot": int(r), "from": int(u), "to": int(v)} for r, u, v in st])
        return {"steps": steps}

    @classmethod
    def from_dict(cls, data: dict) -> "Plan":
        steps = []
        for st in data["steps"]:
            steps.append([(m["robot"], m["from"], m["to"]) for m in st])
        return cls.from_steps(steps)


@dataclass(frozen=True)
class Instance:
    grid: GridGraph
    start: Configuration
    goal: Configuration

    @property
    def rows(self):
        return self.grid.rows

    @property
    def cols(self):
        return self.grid.cols

    def to_dict(self) -> dict:
        return {
            "rows": self.grid.rows,
            "cols": self.grid.cols,
            "start": self.start.placement.tolist(),
            "goal": self.goal.placement.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        return make_instance(data["rows"], data["cols"], data["start"], data["goal"])


def make_instance(rows: int, cols: int, start, goal) -> Instance:
    grid = GridGraph(int(rows), int(cols))
    n = grid.n_vertices
    return Instance(grid, Configuration(start, n), Configuration(goal, n))


def _step_array(step) -> np.ndarray:
    if isinstance(step, np.ndarray):
        return step.reshape(-1, 3).astype(np.int64)
    return np.array([tuple(m) for m in step], dtype=np.int64).reshape(-1, 3)


def apply_step(grid: GridGraph, config: Configuration, step) -> Configuration:
    """Successor of ``config`` after one synchronized step.

    Raises :class:`ConflictError` naming the first violated rule (lowest
    robot id) if the step is not executable from ``config``.
    """
    mv = _step_array(step)
    pos = config.placement
    s, r, code, final = kernels.check_plan(
        grid.rows, grid.cols, pos, mv, np.array([0, mv.shape[0]], np.int64)
    )
    if s >= 0:
        raise ConflictError(kernels.RULE_NAMES[code], r)
    return Configuration(final)


@dataclass(frozen=True)
class VerificationReport:
    valid: bool
    makespan: int
    total_distance: int
    reached_goal: bool
    step: int | None = None
    robot: int | None = None
    rule: str | None = None
    final: Configuration | None = None

    def describe(self) -> str:
        if self.valid:
            return (
                f"valid: makespan={self.makespan} total_distance={self.total_distance} "
                f"final configuration equals goal"
            )
        if self.rule == "goal":
            return f"invalid: plan is collision-free but ends {self.makespan} steps away from a non-goal configuration"
        return f"invalid: step {self.step}, robot {self.robot}, rule {self.rule}"


def verify_plan(instance: Instance, plan: Plan) -> VerificationReport:
    """Replay ``plan`` from the start configuration and check every step.

    Errors are encoded in the report, never raised.
    """
    grid = instance.grid
    s, r, code, final = kernels.check_plan(
        grid.rows, grid.cols, instance.start.placement, plan.moves, plan.offsets
    )
    mk, dist = metrics(plan)
    if s >= 0:
        return VerificationReport(False, mk, dist, False, s, r, kernels.RULE_NAMES[code])
    reached = bool(np.array_equal(final, instance.goal.placement))
    fin = Configuration(final)
    if not reached:
        return VerificationReport(False, mk, dist, False, mk, None, "goal", fin)
    return VerificationReport(True, mk, dist, True, final=fin)


def metrics(plan: Plan) -> tuple[int, int]:
    return plan.makespan, plan.total_distance


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj.to_dict(), fh, separators=(",", ":"))
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path) as fh:
        return Instance.from_dict(json.load(fh))


def load_plan(path) -> Plan:
    with open(path) as fh:
        return Plan.from_dict(json.load(fh))
