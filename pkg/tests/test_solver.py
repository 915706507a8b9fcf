import os
import subprocess
import sys
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sagplan import oracle, sag, solve, solve_small
from sagplan.bench import random_instance
from sagplan.errors import InfeasibleError, InstanceError
from sagplan.grid import make_instance, verify_plan
from sagplan.solver import _solve_five_by_two


def test_identity_16x16():
    inst = make_instance(16, 16, np.arange(256), np.arange(256))
    rep = solve(inst)
    assert rep.makespan == 0 and rep.valid


def test_cycle_rotation_3x2():
    cyc = [0, 1, 3, 5, 4, 2]
    goal = np.empty(6, np.int64)
    for i, v in enumerate(cyc):
        goal[v] = cyc[(i + 1) % 6]
    assert solve_small(make_instance(3, 2, np.arange(6), goal)).makespan == 1


def test_transposition_3x2():
    goal = np.array([0, 1, 3, 2, 4, 5])
    assert solve_small(make_instance(3, 2, np.arange(6), goal)).makespan == 3


def test_all_720_3x2():
    ident = np.arange(6)
    for p in permutations(range(6)):
        inst = make_instance(3, 2, ident, p)
        rep = solve(inst)
        assert rep.valid
        assert rep.makespan == oracle.optimal_makespan(inst)[0]


def test_3x3_within_diameter():
    rng = np.random.default_rng(0)
    d = oracle.diameter(3, 3)
    for _ in range(10):
        inst = make_instance(3, 3, rng.permutation(9), rng.permutation(9))
        plan = solve_small(inst)
        assert plan.makespan <= d and verify_plan(inst, plan).valid


def test_2x2_infeasible_via_oracle():
    with pytest.raises(InfeasibleError):
        oracle.optimal_plan_arrays(2, 2, np.arange(4), [0, 1, 3, 2])


def test_bad_instance():
    with pytest.raises(InstanceError):
        solve("not an instance")


def test_five_by_two_region():
    rng = np.random.default_rng(1)
    for rows, cols in [(5, 2), (2, 5)]:
        for _ in range(100):
            inst = make_instance(rows, cols, rng.permutation(10), rng.permutation(10))
            rep = sag(inst)
            assert rep.valid, rep.verification.describe()


@pytest.mark.parametrize("rows,cols", [(r, c) for r in range(2, 13) for c in range(2, 13)
                                       if max(r, c) >= 3 and r * c > 9])
def test_sag_all_small_shapes(rows, cols):
    inst = random_instance(rows, cols, rows * 31 + cols)
    rep = sag(inst)
    assert rep.valid, rep.verification.describe()
    assert rep.makespan == rep.plan.makespan and rep.total_distance == rep.plan.total_distance


def test_random_32x32():
    inst = random_instance(32, 32, 5)
    rep = solve(inst)
    assert rep.valid
    assert rep.makespan <= 30 * 32
    assert rep.makespan >= oracle.makespan_lower_bound(inst)
    # one split per level until the 4x4 -> 2x4 -> 2x2 range bottoms out
    assert len(rep.iterations) <= 2 * int(np.ceil(np.log2(32))) + 1


def test_trace_telescopes():
    rep = solve(random_instance(64, 64, 3))
    per_level = [lv["makespan"] for lv in rep.iterations]
    # levels run back to back, so the plan is exactly their sum
    assert sum(per_level) == rep.makespan
    assert sum(per_level) <= 30 * 64
    # deeper levels act on smaller regions and finish faster
    assert per_level[-1] < per_level[0]


def test_fig5_instance_first_level_grouped():
    from sagplan import routing as rt
    from sagplan.grid import GridGraph
    from tests.test_routing import crossing_instance

    g = GridGraph(9, 7)
    s = rt.split(g)
    start, goal = crossing_instance(g, s, [2, 3, 2, 4, 0, 1, 3], seed=11)
    inst = make_instance(9, 7, start.placement, goal.placement)
    rep = solve(inst)
    assert rep.valid


def test_batch_16x16():
    mks = []
    for seed in range(100):
        rep = solve(random_instance(16, 16, seed))
        assert rep.valid
        mks.append(rep.makespan)
    print(f"16x16 makespan mean {np.mean(mks):.1f} max {max(mks)}")


def test_deterministic():
    a = solve(random_instance(20, 13, 9)).plan
    b = solve(random_instance(20, 13, 9)).plan
    assert a == b


def test_non_square_orientations():
    for rows, cols in [(40, 7), (7, 40), (33, 17)]:
        assert solve(random_instance(rows, cols, 2)).valid


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 14), st.integers(2, 14), st.integers(0, 2**31 - 1))
def test_property_valid(rows, cols, seed):
    if max(rows, cols) < 3:
        return
    rng = np.random.default_rng(seed)
    n = rows * cols
    inst = make_instance(rows, cols, rng.permutation(n), rng.permutation(n))
    rep = solve(inst)
    assert rep.valid
    assert oracle.makespan_lower_bound(inst) <= rep.makespan
    assert oracle.distance_lower_bound(inst) <= rep.total_distance


def test_numpy_fallback_matches():
    code = (
        "import sagplan, sagplan.kernels as k;"
        "from sagplan.bench import random_instance;"
        "assert not k.HAVE_NUMBA;"
        "r = sagplan.solve(random_instance(24, 18, 4));"
        "print(r.makespan, r.total_distance, r.valid)"
    )
    env = dict(os.environ, SAGPLAN_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    rep = solve(random_instance(24, 18, 4))
    assert out.stdout.split() == [str(rep.makespan), str(rep.total_distance), "True"]
