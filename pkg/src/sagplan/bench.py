"""Seeded instance generation and benchmark records."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import oracle
from .grid import GridGraph, Instance, make_instance
from .solver import solve

GENERATOR = "numpy.random.PCG64"


def instance_seed(seed: int, index: int) -> int:
    return int(seed) + int(index)


def random_instance(rows: int, cols: int, seed: int) -> Instance:
    """Identity start, goal = ``Generator(PCG64(seed)).permutation(n)``."""
    grid = GridGraph(int(rows), int(cols))
    n = grid.n_vertices
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    return make_instance(rows, cols, np.arange(n), rng.permutation(n))


def instance_record(inst: Instance, seed: int, index: int = 0) -> dict:
    head = {"generator": GENERATOR, "seed": int(seed), "index": int(index)}
    head.update(inst.to_dict())
    return head


@dataclass
class BenchRecord:
    rows: int
    cols: int
    seed: int
    makespan: int
    total_distance: int
    makespan_lb: int
    distance_lb: int
    makespan_ratio: float
    distance_ratio: float
    runtime: float | None
    depth: int

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]


def bench_one(rows, cols, seed, timing=True) -> BenchRecord:
    inst = random_instance(rows, cols, seed)
    rep = solve(inst)
    mlb = oracle.makespan_lower_bound(inst)
    dlb = oracle.distance_lower_bound(inst)
    mr = rep.makespan / mlb if mlb else 1.0
    dr = rep.total_distance / dlb if dlb else 1.0
    return BenchRecord(rows, cols, seed, rep.makespan, rep.total_distance, mlb, dlb,
                       round(mr, 6), round(dr, 6), round(rep.runtime, 6) if timing else None,
                       len(rep.iterations))


def run_bench(sizes, seeds, timing=True, progress=None) -> list[BenchRecord]:
    """One record per (size, seed), ordered by size then seed."""
    if timing:
        # compile kernels and build block tables outside the timed region
        solve(random_instance(8, 8, 0))
    out = []
    for rows, cols in sizes:
        for seed in seeds:
            rec = bench_one(rows, cols, seed, timing)
            out.append(rec)
            if progress:
                progress(rec)
    out.sort(key=lambda r: (r.rows * r.cols, r.rows, r.cols, r.seed))
    return out


def write_csv(records, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(BenchRecord.columns())
    for r in records:
        w.writerow(["" if v is None else v for v in asdict(r).values()])


def records_csv(records) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def read_csv(fh) -> list[dict]:
    rows = []
    for row in csv.DictReader(fh):
        rows.append({k: (float(v) if v not in ("",) else None) for k, v in row.items()})
    return rows


def fit_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def summarize(rows) -> dict:
    """Per-size statistics plus the runtime-vs-|V| exponent.

    ``rows`` are dicts as produced by :func:`read_csv`.
    """
    by = {}
    for r in rows:
        by.setdefault((int(r["rows"]), int(r["cols"])), []).append(r)
    sizes = []
    for (nr, nc), rs in sorted(by.items(), key=lambda kv: (kv[0][0] * kv[0][1], kv[0])):
        mk = np.array([r["makespan"] for r in rs])
        mr = np.array([r["makespan_ratio"] for r in rs])
        dr = np.array([r["distance_ratio"] for r in rs])
        rt = [r["runtime"] for r in rs if r["runtime"] is not None]
        sizes.append({
            "rows": nr, "cols": nc, "n": len(rs),
            "mean_ratio": float(mr.mean()), "max_ratio": float(mr.max()),
            "mean_makespan_per_mlong": float(mk.mean() / max(nr, nc)),
            "max_makespan_per_mlong": float(mk.max() / max(nr, nc)),
            "mean_distance_ratio": float(dr.mean()),
            "mean_runtime": float(np.mean(rt)) if rt else None,
        })
    timed = [s for s in sizes if s["mean_runtime"]]
    slope = None
    if len(timed) >= 2:
        slope = fit_slope([s["rows"] * s["cols"] for s in timed], [s["mean_runtime"] for s in timed])
    return {"sizes": sizes, "runtime_slope": slope}


def format_summary(summary) -> str:
    lines = ["size     n  ratio_mean  ratio_max  mk/m_long  dist_ratio  runtime_s"]
    for s in summary["sizes"]:
        rt = "-" if s["mean_runtime"] is None else f"{s['mean_runtime']:.4f}"
        lines.append(
            f"{s['rows']}x{s['cols']:<5} {s['n']:>3}  {s['mean_ratio']:10.3f} {s['max_ratio']:10.3f} "
            f"{s['mean_makespan_per_mlong']:10.3f} {s['mean_distance_ratio']:11.3f}  {rt}"
        )
    if summary["runtime_slope"] is not None:
        lines.append(f"runtime vs |V| log-log slope: {summary['runtime_slope']:.3f}")
    return "\n".join(lines)
