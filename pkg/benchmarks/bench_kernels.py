"""Compiled vs pure-numpy kernels, plus an end-to-end solve under each.

    python benchmarks/bench_kernels.py [--size 32] [--repeat 3]

Prints one CSV line per kernel: name, numba seconds, numpy seconds, speedup.
The end-to-end rows run a fresh interpreter with SAGPLAN_DISABLE_NUMBA set
or unset, since the backend is chosen at import time.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from sagplan import kernels, oracle
from sagplan.bench import random_instance
from sagplan.solver import sag


def best(fn, repeat):
    fn()  # warm-up (compilation, caches)
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t)
    return min(ts)


def row(name, a, b):
    print(f"{name},{a:.6f},{b:.6f},{b / a if a else float('nan'):.1f}")


SNIPPET = """
import time, sys
from sagplan.bench import random_instance
from sagplan.solver import solve
n = int(sys.argv[1])
solve(random_instance(8, 8, 0))
t = time.perf_counter()
solve(random_instance(n, n, 1))
print(time.perf_counter() - t)
"""


def end_to_end(n, disable):
    env = dict(os.environ)
    if disable:
        env["SAGPLAN_DISABLE_NUMBA"] = "1"
    else:
        env.pop("SAGPLAN_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", SNIPPET, str(n)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        sys.exit("numba unavailable or disabled; nothing to compare")

    n = args.size
    inst = random_instance(n, n, 0)
    plan = sag(inst, verify=False).plan
    pos0 = np.ascontiguousarray(inst.start.placement)
    print(f"# {n}x{n} plan: {plan.makespan} steps, {plan.total_distance} moves")
    print("kernel,numba_s,numpy_s,speedup")

    a = best(lambda: kernels._check_nb(n, n, pos0, plan.moves, plan.offsets), args.repeat)
    b = best(lambda: kernels._check_np(n, n, pos0, plan.moves, plan.offsets), args.repeat)
    row("check_plan", a, b)

    gens = oracle.config_space(3, 3).gens
    a = best(lambda: kernels._bfs_nb(9, gens), 1)
    b = best(lambda: kernels._bfs_np(9, gens), 1)
    row("bfs_3x3", a, b)

    rng = np.random.default_rng(0)
    keys = np.ascontiguousarray(rng.integers(0, 3, size=(64, 256)), dtype=np.int64)
    a = best(lambda: kernels._oets_nb(keys), args.repeat)
    b = best(lambda: kernels._oets_np(keys), args.repeat)
    row("oets_64x256", a, b)

    if not args.skip_e2e:
        a = end_to_end(n, False)
        b = end_to_end(n, True)
        row(f"solve_{n}x{n}", a, b)


if __name__ == "__main__":
    main()
