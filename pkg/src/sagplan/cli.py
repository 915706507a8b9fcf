"""Command line interface.

Exit codes: 0 success, 1 invalid input, 2 verification failure,
3 infeasible instance.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench, kernels, oracle
from .errors import InfeasibleError, SagError
from .grid import Instance, Plan, verify_plan
from .solver import solve

OK, BAD_INPUT, INVALID_PLAN, INFEASIBLE = 0, 1, 2, 3

CSV_HELP = (
    "CSV columns: rows, cols, seed, makespan, total_distance, makespan_lb "
    "(largest Manhattan displacement), distance_lb (sum of Manhattan "
    "displacements), makespan_ratio, distance_ratio, runtime (seconds, empty "
    "with --timing off), depth (recursion levels)."
)


class InputError(Exception):
    pass


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read {path}: {e}") from e


def _write_json(data, path):
    text = json.dumps(data, separators=(",", ":")) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_instance(path) -> Instance:
    data = _read_json(path)
    try:
        return Instance.from_dict(data)
    except (KeyError, TypeError) as e:
        raise InputError(f"{path}: malformed instance ({e})") from e


def _load_plan(path) -> Plan:
    data = _read_json(path)
    try:
        return Plan.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"{path}: malformed plan ({e})") from e


def _parse_sizes(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        if "x" in tok:
            r, c = tok.split("x")
            out.append((int(r), int(c)))
        else:
            out.append((int(tok), int(tok)))
    return out


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_gen(args):
    count = args.count
    paths = []
    for i in range(count):
        seed = bench.instance_seed(args.seed, i)
        inst = bench.random_instance(args.rows, args.cols, seed)
        rec = bench.instance_record(inst, seed, i)
        if args.out and (count > 1 or not args.out.endswith(".json")):
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, f"instance_{args.rows}x{args.cols}_seed{seed}.json")
        else:
            path = args.out
        _write_json(rec, path)
        paths.append(path)
    if args.out:
        print(f"wrote {count} instance(s)")
    return OK


def _trace_lines(report):
    out = []
    for lv in report.iterations:
        out.append(f"  level {lv['level']}: {lv['regions']} region(s) {','.join(lv['sizes'])} "
                   f"makespan {lv['makespan']}")
    return out


def cmd_solve(args):
    inst = _load_instance(args.instance)
    try:
        rep = solve(inst)
    except SagError as e:
        print(f"error: {e}", file=sys.stderr)
        return INVALID_PLAN
    if args.out:
        _write_json(rep.plan.to_dict(), args.out)
    print(f"makespan {rep.makespan}")
    print(f"total_distance {rep.total_distance}")
    print(f"runtime {rep.runtime:.4f}s")
    print(rep.verification.describe())
    print("\n".join(["recursion:"] + _trace_lines(rep)))
    return OK if rep.valid else INVALID_PLAN


def cmd_verify(args):
    inst = _load_instance(args.instance)
    plan = _load_plan(args.plan)
    rep = verify_plan(inst, plan)
    print(rep.describe())
    return OK if rep.valid else INVALID_PLAN


def cmd_oracle(args):
    data = _read_json(args.instance)
    try:
        rows, cols = int(data["rows"]), int(data["cols"])
        start = np.asarray(data["start"], dtype=np.int64)
        goal = np.asarray(data["goal"], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"{args.instance}: malformed instance ({e})") from e
    n = rows * cols
    if n > oracle.MAX_VERTICES:
        raise InputError(f"oracle handles grids of at most {oracle.MAX_VERTICES} vertices; "
                         f"{rows}x{cols} has {n}")
    if rows < 1 or cols < 1 or n < 2:
        raise InputError(f"bad grid size {rows}x{cols}")
    for arr in (start, goal):
        if arr.size != n or not np.array_equal(np.sort(arr), np.arange(n)):
            raise InputError("placement is not a bijection onto the vertex set")
    plan = oracle.optimal_plan_arrays(rows, cols, start, goal)
    s, r, code, final = kernels.check_plan(rows, cols, start, plan.moves, plan.offsets)
    if s >= 0 or not np.array_equal(final, goal):
        print("error: oracle plan failed verification", file=sys.stderr)
        return INVALID_PLAN
    if args.out:
        _write_json(plan.to_dict(), args.out)
    print(f"optimal makespan {plan.makespan}")
    return OK


def cmd_bench(args):
    sizes = _parse_sizes(args.sizes)
    seeds = list(range(args.seed, args.seed + args.count))
    timing = args.timing == "wall"

    def progress(rec):
        if args.verbose:
            print(f"{rec.rows}x{rec.cols} seed {rec.seed}: makespan {rec.makespan}", file=sys.stderr)

    recs = bench.run_bench(sizes, seeds, timing=timing, progress=progress)
    text = bench.records_csv(recs)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    import io

    summary = bench.summarize(bench.read_csv(io.StringIO(text)))
    print(bench.format_summary(summary), file=sys.stderr if not args.out else sys.stdout)
    return OK


def render_ascii(inst: Instance, plan: Plan, splits=False) -> str:
    g = inst.grid
    width = len(str(g.n_vertices - 1))
    occ = inst.start.occupancy().copy()
    frames = []

    def frame(title):
        lines = [title]
        half = (g.rows + 1) // 2 if g.rows >= g.cols else None
        halfc = (g.cols + 1) // 2 if g.cols > g.rows else None
        for r in range(g.rows):
            cells = []
            for c in range(g.cols):
                if splits and halfc is not None and c == halfc:
                    cells.append("|")
                cells.append(str(int(occ[r * g.cols + c])).rjust(width))
            lines.append(" ".join(cells))
            if splits and half is not None and r == half - 1:
                lines.append("-" * len(lines[-1]))
        return "\n".join(lines)

    frames.append(frame("step 0"))
    for s, st in enumerate(plan.steps(), 1):
        occ[st[:, 2]] = st[:, 0]
        frames.append(frame(f"step {s}"))
    return "\n\n".join(frames) + "\n"


def render_svg(inst: Instance, plan: Plan, splits=False, cell=24) -> str:
    g = inst.grid
    occ = inst.start.occupancy().copy()
    fw, fh = g.cols * cell, g.rows * cell + cell
    n_frames = plan.makespan + 1
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{fw}" height="{fh * n_frames}" '
           f'font-family="monospace" font-size="{cell // 2}">']

    def frame(k):
        y0 = k * fh
        out.append(f'<g id="step{k}" transform="translate(0,{y0})">')
        out.append(f'<text x="2" y="{cell - 6}">step {k}</text>')
        for v in range(g.n_vertices):
            r, c = divmod(v, g.cols)
            x, y = c * cell, (r + 1) * cell
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="none" stroke="#999"/>')
            out.append(f'<text x="{x + cell // 2}" y="{y + cell * 2 // 3}" text-anchor="middle">{int(occ[v])}</text>')
        if splits:
            if g.rows >= g.cols:
                y = ((g.rows + 1) // 2 + 1) * cell
                out.append(f'<line x1="0" y1="{y}" x2="{fw}" y2="{y}" stroke="red" stroke-dasharray="4"/>')
            else:
                x = ((g.cols + 1) // 2) * cell
                out.append(f'<line x1="{x}" y1="{cell}" x2="{x}" y2="{fh}" stroke="red" stroke-dasharray="4"/>')
        out.append("</g>")

    frame(0)
    for s, st in enumerate(plan.steps(), 1):
        occ[st[:, 2]] = st[:, 0]
        frame(s)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_render(args):
    inst = _load_instance(args.instance)
    plan = _load_plan(args.plan)
    rep = verify_plan(inst, plan)
    if not rep.valid and rep.rule != "goal":
        print(f"error: {rep.describe()}", file=sys.stderr)
        return INVALID_PLAN
    fmt = args.format or "ascii"
    if fmt == "svg":
        text = render_svg(inst, plan, args.splits)
    elif fmt == "ascii":
        text = render_ascii(inst, plan, args.splits)
    else:
        raise InputError(f"render supports ascii or svg, not {fmt}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return OK


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="sagplan", description="Split-and-group planner for fully occupied grids.")
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate seeded random instances")
    g.add_argument("--rows", type=int, required=True)
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out", help="file (count 1, .json) or directory; stdout if omitted")
    g.add_argument("--format", choices=["json"], default="json")
    g.set_defaults(fn=cmd_gen)

    s = sub.add_parser("solve", help="solve an instance and verify the plan")
    s.add_argument("instance")
    s.add_argument("--out", help="plan JSON path")
    s.add_argument("--format", choices=["json"], default="json")
    s.set_defaults(fn=cmd_solve)

    v = sub.add_parser("verify", help="check a plan against an instance")
    v.add_argument("instance")
    v.add_argument("plan")
    v.set_defaults(fn=cmd_verify)

    o = sub.add_parser("oracle", help="optimal plan for grids of at most nine vertices")
    o.add_argument("instance")
    o.add_argument("--out", help="plan JSON path")
    o.add_argument("--format", choices=["json"], default="json")
    o.set_defaults(fn=cmd_oracle)

    b = sub.add_parser("bench", help="benchmark sweep as CSV plus summary", epilog=CSV_HELP)
    b.add_argument("--sizes", default="8,16,32", help="comma list such as 8,16x12,32")
    b.add_argument("--seed", type=int, default=0, help="first seed")
    b.add_argument("--count", type=int, default=5, help="seeds per size")
    b.add_argument("--out", help="CSV path; stdout if omitted")
    b.add_argument("--format", choices=["csv"], default="csv")
    b.add_argument("--timing", choices=["wall", "off"], default="wall",
                   help="'off' leaves the runtime column empty so output is byte-reproducible")
    b.add_argument("--verbose", action="store_true")
    b.set_defaults(fn=cmd_bench)

    r = sub.add_parser("render", help="draw every step of a plan")
    r.add_argument("instance")
    r.add_argument("plan")
    r.add_argument("--format", choices=["ascii", "svg"], default="ascii")
    r.add_argument("--out")
    r.add_argument("--splits", action="store_true", help="overlay the first split line")
    r.set_defaults(fn=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InfeasibleError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return INFEASIBLE
    except (InputError, ValueError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
