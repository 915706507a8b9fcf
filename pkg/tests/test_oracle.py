from itertools import permutations, product

import numpy as np
import pytest

from sagplan import kernels, oracle
from sagplan.errors import InfeasibleError, SizeError
from sagplan.grid import GridGraph, make_instance, verify_plan


def _accepted_steps(rows, cols):
    """Every nonempty step the validator accepts from the identity placement."""
    n = rows * cols
    choices = []
    for v in range(n):
        r, c = divmod(v, cols)
        nb = [v]
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            if 0 <= r + dr < rows and 0 <= c + dc < cols:
                nb.append((r + dr) * cols + c + dc)
        choices.append(nb)
    pos = np.arange(n)
    out = set()
    for tgt in product(*choices):
        mv = np.array([(v, v, t) for v, t in enumerate(tgt) if t != v], np.int64).reshape(-1, 3)
        if mv.shape[0] == 0:
            continue
        s, _, _, _ = kernels.check_plan(rows, cols, pos, mv, np.array([0, mv.shape[0]], np.int64))
        if s < 0:
            out.add(tuple(sorted((int(a), int(b)) for _, a, b in mv)))
    return out


@pytest.mark.parametrize("rows,cols", [(3, 2), (2, 3), (2, 4), (3, 3)])
def test_cycle_model_matches_validator(rows, cols):
    space = oracle.config_space(rows, cols)
    model = {tuple(map(tuple, m.tolist())) for m in space.gen_moves}
    assert len(model) == len(space.gen_moves)
    assert model == _accepted_steps(rows, cols)


def test_successor_relation_symmetric():
    space = oracle.config_space(3, 3)
    keys = {g.tobytes() for g in space.gens}
    for g in space.gens:
        inv = np.empty_like(g)
        inv[g] = np.arange(g.size)
        assert inv.tobytes() in keys


def test_simple_cycle_counts():
    # 3x2: two squares and the outer ring; 3x3 has 13 simple cycles
    assert len(oracle.simple_cycles(3, 2)) == 3
    assert len(oracle.simple_cycles(3, 3)) == 13


def test_identity_and_transposition():
    ident = np.arange(6)
    inst = make_instance(3, 2, ident, ident)
    assert oracle.optimal_makespan(inst)[0] == 0
    goal = ident.copy()
    goal[[2, 3]] = goal[[3, 2]]
    mk, plan = oracle.optimal_makespan(make_instance(3, 2, ident, goal))
    assert mk == 3
    assert verify_plan(make_instance(3, 2, ident, goal), plan).valid


def test_all_3x2_instances():
    ident = np.arange(6)
    dist, _ = oracle.bfs_table(3, 2)
    assert (dist >= 0).all() and dist.size == 720
    hist = np.bincount(dist)
    tight = 0
    for p in permutations(range(6)):
        inst = make_instance(3, 2, ident, p)
        mk, plan = oracle.optimal_makespan(inst)
        assert verify_plan(inst, plan).valid
        lb = oracle.makespan_lower_bound(inst)
        assert lb <= mk
        tight += lb == mk
    assert hist.sum() == 720 and oracle.diameter(3, 2) == len(hist) - 1
    assert 0 < tight < 720


def test_2x2_infeasible():
    start = np.arange(4)
    with pytest.raises(InfeasibleError):
        oracle.optimal_plan_arrays(2, 2, start, [1, 0, 2, 3])
    # rotations of the single cycle are fine
    plan = oracle.optimal_plan_arrays(2, 2, start, [1, 3, 0, 2])
    assert plan.makespan == 1


def test_refuses_large_grids():
    with pytest.raises(SizeError):
        oracle.optimal_plan_arrays(4, 3, np.arange(12), np.arange(12))


def test_3x3_random_within_diameter():
    rng = np.random.default_rng(5)
    d = oracle.diameter(3, 3)
    for _ in range(20):
        inst = make_instance(3, 3, rng.permutation(9), rng.permutation(9))
        mk, plan = oracle.optimal_makespan(inst)
        assert mk <= d
        assert verify_plan(inst, plan).valid
        assert oracle.makespan_lower_bound(inst) <= mk


def test_lower_bounds():
    n = 16
    inst = make_instance(4, 4, np.arange(n), np.arange(n))
    assert oracle.makespan_lower_bound(inst) == 0 and oracle.distance_lower_bound(inst) == 0
    goal = np.arange(n)
    goal[[0, 15]] = goal[[15, 0]]
    inst = make_instance(4, 4, np.arange(n), goal)
    assert oracle.makespan_lower_bound(inst) == 6
    goal = np.arange(n)
    goal[[5, 6]] = goal[[6, 5]]
    assert oracle.distance_lower_bound(make_instance(4, 4, np.arange(n), goal)) == 2


def test_bfs_backends_agree():
    if not kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    gens = oracle.config_space(3, 2).gens
    a = kernels._bfs_nb(6, gens)
    b = kernels._bfs_np(6, gens)
    assert np.array_equal(a[0], b[0])
