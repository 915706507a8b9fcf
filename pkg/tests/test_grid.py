import numpy as np
import pytest

from sagplan import kernels
from sagplan.errors import BijectionError, ConflictError, SizeError
from sagplan.grid import (Configuration, GridGraph, Move, Plan, apply_step, make_instance,
                          metrics, verify_plan)


def ident(n):
    return np.arange(n)


def test_grid_counts():
    g = GridGraph(3, 2)
    assert g.n_vertices == 6
    assert g.n_edges == 3 * 1 + 2 * 2 == len(g.edges())
    assert (g.m_long, g.m_short) == (3, 2)
    g = GridGraph(4, 7)
    assert g.n_edges == 4 * 6 + 7 * 3
    assert g.long_axis != GridGraph(7, 4).long_axis


def test_adjacency_symmetric_no_diagonals():
    g = GridGraph(4, 5)
    for v in range(g.n_vertices):
        for u in g.neighbors(v):
            assert v in g.neighbors(u)
            assert g.manhattan(u, v) == 1
    assert not g.is_edge(g.vertex(0, 0), g.vertex(1, 1))
    # no wrap between the end of one row and the start of the next
    assert not g.is_edge(g.vertex(0, 4), g.vertex(1, 0))


def test_make_instance_sizes():
    inst = make_instance(3, 2, ident(6), ident(6))
    assert inst.grid.n_vertices == 6 and inst.grid.n_edges == 7
    rng = np.random.default_rng(0)
    inst = make_instance(9, 7, rng.permutation(63), rng.permutation(63))
    assert inst.grid.n_vertices == 63
    # orientation preserved
    assert (make_instance(2, 3, ident(6), ident(6)).rows, make_instance(2, 3, ident(6), ident(6)).cols) == (2, 3)


@pytest.mark.parametrize("rows,cols", [(2, 2), (1, 5), (5, 1), (2, 1)])
def test_size_error(rows, cols):
    n = rows * cols
    with pytest.raises(SizeError):
        make_instance(rows, cols, ident(n), ident(n))


@pytest.mark.parametrize("bad", [[0, 1, 2, 3, 4, 4], [0, 1, 2, 3, 4], [0, 1, 2, 3, 4, 6]])
def test_bijection_error(bad):
    with pytest.raises(BijectionError):
        make_instance(3, 2, bad, ident(6))
    with pytest.raises(BijectionError):
        make_instance(3, 2, ident(6), bad)


def test_configuration_roundtrip():
    rng = np.random.default_rng(3)
    c = Configuration(rng.permutation(20))
    assert Configuration.from_occupancy(c.occupancy()) == c
    assert c.occupancy()[c[7]] == 7


def test_apply_empty_step():
    g = GridGraph(3, 2)
    c = Configuration.identity(6)
    assert apply_step(g, c, []) == c


def test_apply_cycle_rotation():
    # 3x2 boundary cycle 0-1-3-5-4-2-0, each robot one position forward
    g = GridGraph(3, 2)
    cyc = [0, 1, 3, 5, 4, 2]
    c = Configuration.identity(6)
    step = [Move(cyc[i], cyc[i], cyc[(i + 1) % 6]) for i in range(6)]
    nxt = apply_step(g, c, step)
    for i in range(6):
        assert nxt[cyc[i]] == cyc[(i + 1) % 6]


def test_edge_conflict():
    g = GridGraph(3, 2)
    c = Configuration.identity(6)
    with pytest.raises(ConflictError) as ei:
        apply_step(g, c, [(0, 0, 1), (1, 1, 0)])
    assert ei.value.rule == "edge"


def test_other_conflicts():
    g = GridGraph(3, 2)
    c = Configuration.identity(6)
    cases = {
        "adjacency": [(0, 0, 3)],
        "stale": [(0, 1, 3)],
        "duplicate": [(0, 0, 1), (0, 0, 2)],
    }
    for rule, step in cases.items():
        with pytest.raises(ConflictError) as ei:
            apply_step(g, c, step)
        assert ei.value.rule == rule, step
    # 0 moves into 1 while 1 stays put: two robots on one vertex
    with pytest.raises(ConflictError) as ei:
        apply_step(g, c, [(0, 0, 1)])
    assert ei.value.rule == "injectivity"


def test_verify_empty_plan():
    inst = make_instance(4, 4, ident(16), ident(16))
    rep = verify_plan(inst, Plan())
    assert rep.valid and rep.makespan == 0 and rep.total_distance == 0 and rep.reached_goal


def test_verify_reports_first_conflict():
    inst = make_instance(3, 2, ident(6), ident(6))
    cyc = [0, 1, 3, 5, 4, 2]
    good = [(cyc[i], cyc[i], cyc[(i + 1) % 6]) for i in range(6)]
    bad = [(0, 1, 0)]  # robot 0 now sits on 1; 1 sits on 3
    plan = Plan.from_steps([good, [(0, 1, 3)]])
    rep = verify_plan(inst, plan)
    assert not rep.valid and rep.step == 1 and rep.rule == "injectivity" and rep.robot == 0
    assert "step 1" in rep.describe()
    assert not verify_plan(inst, Plan.from_steps([good, bad])).valid


def test_verify_wrong_goal():
    inst = make_instance(3, 2, ident(6), [1, 0, 2, 3, 4, 5])
    rep = verify_plan(inst, Plan())
    assert not rep.valid and rep.rule == "goal"


def _table_plan(perm):
    from sagplan.primitives import build_exchange_table
    occ = ident(6).copy()
    moves = []
    for s in build_exchange_table().plan_for(np.asarray(perm)):
        moves.append([(int(occ[u]), int(u), int(v)) for u, v in s])
        nxt = occ.copy()
        nxt[s[:, 1]] = occ[s[:, 0]]
        occ = nxt
    return Plan.from_steps(moves)


def test_fig3_style_exchange():
    # swap the two robots on the middle rung 2-3, shared by both squares
    inst = make_instance(3, 2, ident(6), [0, 1, 3, 2, 4, 5])
    plan = _table_plan([0, 1, 3, 2, 4, 5])
    rep = verify_plan(inst, plan)
    assert rep.valid and metrics(plan)[0] == 3


def test_metrics():
    assert metrics(Plan()) == (0, 0)
    cyc = [0, 1, 3, 5, 4, 2]
    p = Plan.from_steps([[(cyc[i], cyc[i], cyc[(i + 1) % 6]) for i in range(6)]])
    assert metrics(p) == (1, 6)
    q = p + p
    assert metrics(q) == (2, 12)


def test_plan_json_roundtrip():
    cyc = [0, 1, 3, 5, 4, 2]
    p = Plan.from_steps([[(cyc[i], cyc[i], cyc[(i + 1) % 6]) for i in range(6)], []])
    d = p.to_dict()
    assert d["steps"][0][0] == {"robot": 0, "from": 0, "to": 1}
    assert Plan.from_dict(d) == p


def test_accepted_steps_are_disjoint_cycles():
    # disjoint cycle rotations pass; breaking one arc of them fails
    from sagplan.oracle import simple_cycles
    rng = np.random.default_rng(7)
    g = GridGraph(3, 3)
    cycles = simple_cycles(3, 3)
    for _ in range(300):
        c = Configuration(rng.permutation(9))
        occ = c.occupancy()
        used, step = set(), []
        for i in rng.permutation(len(cycles)):
            cyc = list(cycles[i])
            if used & set(cyc):
                continue
            if rng.random() < 0.5:
                cyc = cyc[::-1]
            used |= set(cyc)
            step += [(int(occ[u]), u, cyc[(j + 1) % len(cyc)]) for j, u in enumerate(cyc)]
            if rng.random() < 0.5:
                break
        nxt = apply_step(g, c, step)
        succ = {u: v for _, u, v in step}
        assert set(succ) == set(succ.values())
        for r, u, v in step:
            assert nxt[r] == v
        k = int(rng.integers(len(step)))
        with pytest.raises(ConflictError):
            apply_step(g, c, step[:k] + step[k + 1:])


def test_numpy_and_numba_checkers_agree():
    rng = np.random.default_rng(11)
    g = GridGraph(4, 4)
    pos = rng.permutation(16)
    moves = []
    for s in range(40):
        r = int(rng.integers(16))
        moves.append((r, int(rng.integers(16)), int(rng.integers(16))))
    mv = np.array(moves, np.int64)
    off = np.arange(0, 41, 4, dtype=np.int64)
    a = kernels._check_np(4, 4, pos, mv, off)
    if kernels.HAVE_NUMBA:
        b = kernels._check_nb(4, 4, pos, mv, off)
        assert tuple(a[:3]) == tuple(b[:3])
