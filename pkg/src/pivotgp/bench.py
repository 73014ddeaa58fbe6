"""Benchmark harness: strategy-by-rank-by-seed grids with CSV and SVG output.

Two experiment families: preconditioned-CG iteration counts against
preconditioner rank, and sparse-regression metrics (SSE, residual trace,
marginal likelihood) against approximation rank.  Each seed reshuffles the
dataset rows before the grid runs, so repeated seeds double as permutation
robustness checks.  Grid cells record their own failures in the output
instead of aborting the run; CSV rows are sorted by (strategy, rank, seed)
regardless of completion order, and all numeric cells use shortest
round-trip decimal, so repeated runs are byte-identical apart from wall
times.
"""

from __future__ import annotations

import csv
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, stream
from .decomposition import decompose
from .exceptions import PivotgpError
from .kernels import KernelConfig
from .metrics import nlml, sse, trace_bounds, trace_residual
from .operators import GramOperator
from .preconditioner import build_preconditioner
from .solvers import pcg_solve
from .svg import line_plot

MI_MAX_N = 512
DEFAULT_TOL = 1e-4
PRECOND_HEADER = ["dataset", "strategy", "rank", "seed", "iterations",
                  "wall_ms", "converged", "error"]
REGRESSION_HEADER = ["dataset", "strategy", "rank", "seed", "sse", "trace",
                     "nlml", "sse_norm", "trace_norm", "nlml_norm", "error"]
BOUNDS_HEADER = ["dataset", "index", "m", "v", "s", "tau", "lower", "upper",
                 "violation"]


@dataclass
class ExperimentConfig:
    """Resolved inputs for one experiment run."""

    dataset: Dataset
    kernel: KernelConfig
    strategies: list
    seeds: list
    ranks: list = None
    tol: float = DEFAULT_TOL
    mi_eps: float = 0.5
    paper_literal_coefficients: bool = False
    out: Path = field(default_factory=lambda: Path("."))
    jobs: int = 1


def precond_rank_schedule(n):
    """Powers of two from 2 up to roughly twice the square root of n."""
    top = int(np.ceil(np.log2(np.sqrt(n)))) + 1
    return sorted({min(2 ** r, n) for r in range(1, top + 1)})


def regression_rank_schedule(n):
    """Every rank from 1 to the square root of n, rounded up."""
    return list(range(1, int(np.ceil(np.sqrt(n))) + 1))


def _slug(name):
    return re.sub(r"[^A-Za-z0-9.-]+", "_", name).strip("_")


def _shuffled(ds, seed):
    order = stream(seed, "data").permutation(ds.n)
    return ds.X[order], ds.y[order]


def _num(v):
    return "" if v is None else str(float(v))


def _flag(v):
    return "" if v is None else ("true" if v else "false")


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _active_strategies(cfg):
    """MI's per-step cost is quadratic in n, so it is dropped on big inputs."""
    skipped = []
    keep = []
    for s in cfg.strategies:
        if s == "mi" and cfg.dataset.n > MI_MAX_N:
            skipped.append(s)
        else:
            keep.append(s)
    return keep, skipped


def _series(rows, ranks, strategies, value_key):
    """Median plus 5-95 percentile band per strategy across seeds."""
    out = []
    for s in strategies:
        xs, med, lo, hi = [], [], [], []
        for r in ranks:
            vals = [row[value_key] for row in rows
                    if row["strategy"] == s and row["error"] == ""
                    and (row["rank"] == r or s == "none")
                    and row[value_key] is not None]
            if not vals:
                continue
            xs.append(r)
            med.append(float(np.percentile(vals, 50)))
            lo.append(float(np.percentile(vals, 5)))
            hi.append(float(np.percentile(vals, 95)))
        if xs:
            out.append({"name": s, "x": xs, "y": med, "lo": lo, "hi": hi})
    return out


def _run_groups(groups, worker, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(worker, groups))
    else:
        results = [worker(g) for g in groups]
    rows = []
    for part in results:
        rows.extend(part)
    return rows


def run_precond_experiment(cfg):
    """Grid of decompose + build + solve cells, timed jointly per cell.

    The 'none' strategy rows (rank 0) are the unpreconditioned baseline and
    are always included.
    """
    ds = cfg.dataset
    ranks = sorted(set(cfg.ranks)) if cfg.ranks else precond_rank_schedule(ds.n)
    strategies, skipped = _active_strategies(cfg)
    strategies = [s for s in strategies if s != "none"]

    def per_seed(seed):
        Xs, ys = _shuffled(ds, seed)
        op = GramOperator(Xs, cfg.kernel, mode="noisy")
        cells = [("none", 0)] + [(s, r) for s in strategies for r in ranks]
        out = []
        for strategy, rank in cells:
            t0 = time.perf_counter()
            try:
                if strategy == "none":
                    rep = pcg_solve(op, ys, None, tol=cfg.tol)
                else:
                    pc = decompose(op, strategy, rank=rank, y=ys,
                                   mi_eps=cfg.mi_eps,
                                   rng=stream(seed, "strategy"))
                    rep = pcg_solve(op, ys, build_preconditioner(pc),
                                    tol=cfg.tol)
                row = {"iterations": rep.iterations, "converged": rep.converged,
                       "error": ""}
            except (PivotgpError, ValueError) as e:
                row = {"iterations": None, "converged": None, "error": str(e)}
            row.update(strategy=strategy, rank=rank, seed=seed,
                       wall_ms=(time.perf_counter() - t0) * 1e3)
            out.append(row)
        return out

    rows = _run_groups(list(cfg.seeds), per_seed, cfg.jobs)
    rows.sort(key=lambda r: (r["strategy"], r["rank"], r["seed"]))
    csv_rows = [[ds.name, r["strategy"], r["rank"], r["seed"],
                 "" if r["iterations"] is None else r["iterations"],
                 f"{r['wall_ms']:.3f}", _flag(r["converged"]), r["error"]]
                for r in rows]
    csv_path = _write_csv(Path(cfg.out) / "precond_bench.csv",
                          PRECOND_HEADER, csv_rows)
    series = _series(rows, ranks, ["none"] + strategies, "iterations")
    svg_path = line_plot(
        Path(cfg.out) / f"precond_{_slug(ds.name)}.svg", series,
        title=f"{ds.name}: CG iterations vs preconditioner rank",
        xlabel="rank", ylabel="iterations", ylog=True,
    )
    return {"rows": rows, "csv": csv_path, "svg": svg_path, "skipped": skipped}


def run_regression_experiment(cfg):
    """Per-rank regression metrics from one decomposition per strategy/seed.

    One factor is computed at the largest rank and truncated back for the
    smaller ones.  After the grid, each metric is normalized by the median
    rank-1 value of the 'random' strategy (divisor 1 when that reference is
    absent) and the divisors are recorded next to the table.
    """
    ds = cfg.dataset
    ranks = sorted(set(cfg.ranks)) if cfg.ranks else regression_rank_schedule(ds.n)
    rmax = ranks[-1]
    strategies, skipped = _active_strategies(cfg)

    def per_seed(seed):
        Xs, ys = _shuffled(ds, seed)
        op = GramOperator(Xs, cfg.kernel, mode="noisy")
        out = []
        for strategy in strategies:
            try:
                pc = decompose(op, strategy, rank=rmax, y=ys,
                               mi_eps=cfg.mi_eps, rng=stream(seed, "strategy"))
            except (PivotgpError, ValueError) as e:
                for r in ranks:
                    out.append({"strategy": strategy, "rank": r, "seed": seed,
                                "sse": None, "trace": None, "nlml": None,
                                "error": str(e)})
                continue
            for r in ranks:
                if r > pc.m:
                    out.append({"strategy": strategy, "rank": r, "seed": seed,
                                "sse": None, "trace": None, "nlml": None,
                                "error": f"achieved rank {pc.m} below {r}"})
                    continue
                cut = pc.truncate(r)
                try:
                    row = {
                        "sse": sse(cut, op, ys),
                        "trace": trace_residual(cut),
                        "nlml": nlml(cut, op, ys,
                                     paper_literal_coefficients=
                                     cfg.paper_literal_coefficients),
                        "error": "",
                    }
                except (PivotgpError, ValueError) as e:
                    row = {"sse": None, "trace": None, "nlml": None,
                           "error": str(e)}
                row.update(strategy=strategy, rank=r, seed=seed)
                out.append(row)
        return out

    rows = _run_groups(list(cfg.seeds), per_seed, cfg.jobs)
    rows.sort(key=lambda r: (r["strategy"], r["rank"], r["seed"]))

    divisors = {}
    for metric in ("sse", "trace", "nlml"):
        ref = [r[metric] for r in rows
               if r["strategy"] == "random" and r["rank"] == 1
               and r["error"] == "" and r[metric] is not None]
        div = float(np.median(ref)) if ref else 1.0
        divisors[metric] = div if abs(div) > 1e-300 else 1.0

    csv_rows = []
    for r in rows:
        norm = {m: None if r[m] is None else r[m] / divisors[m]
                for m in ("sse", "trace", "nlml")}
        csv_rows.append([ds.name, r["strategy"], r["rank"], r["seed"],
                         _num(r["sse"]), _num(r["trace"]), _num(r["nlml"]),
                         _num(norm["sse"]), _num(norm["trace"]),
                         _num(norm["nlml"]), r["error"]])
    csv_path = _write_csv(Path(cfg.out) / "gp_bench.csv",
                          REGRESSION_HEADER, csv_rows)
    norm_path = _write_csv(
        Path(cfg.out) / "gp_bench_normalizers.csv",
        ["dataset", "metric", "divisor"],
        [[ds.name, m, _num(divisors[m])] for m in ("sse", "trace", "nlml")],
    )
    svgs = []
    for metric, label in (("sse", "sum of squared errors"),
                          ("trace", "residual trace"),
                          ("nlml", "negative log marginal likelihood")):
        series = _series(rows, ranks, strategies, metric)
        svgs.append(line_plot(
            Path(cfg.out) / f"gp_{metric}_{_slug(ds.name)}.svg", series,
            title=f"{ds.name}: {label} vs rank",
            xlabel="rank", ylabel=label,
            ylog=metric in ("sse", "trace"),
        ))
    return {"rows": rows, "csv": csv_path, "normalizers": norm_path,
            "svgs": svgs, "divisors": divisors, "skipped": skipped}


def run_trace_bounds(cfg):
    """Per-row trace-reduction bounds on the latent kernel matrix.

    Assumption or bound violations are flagged per row and counted, never
    fatal here.
    """
    ds = cfg.dataset
    op = GramOperator(ds.X, cfg.kernel, mode="latent")
    rows = trace_bounds(op, strict=False)
    flags = [row.violated() for row in rows]
    csv_rows = [[ds.name, row.index, _num(row.m), _num(row.v), _num(row.s),
                 _num(row.tau), _num(row.lower), _num(row.upper),
                 int(flag)] for row, flag in zip(rows, flags)]
    csv_path = _write_csv(Path(cfg.out) / "trace_bounds.csv",
                          BOUNDS_HEADER, csv_rows)
    order = np.argsort([row.m for row in rows])
    ms = [rows[i].m for i in order]
    series = [
        {"name": "exact reduction", "x": [rows[i].m for i in order],
         "y": [rows[i].tau for i in order], "points": True},
        {"name": "upper bound", "x": ms, "y": [rows[i].upper for i in order]},
        {"name": "lower bound", "x": ms, "y": [rows[i].lower for i in order]},
    ]
    svg_path = line_plot(
        Path(cfg.out) / f"trace_bounds_{_slug(ds.name)}.svg", series,
        title=f"{ds.name}: trace reduction and bounds per row",
        xlabel="row mean", ylabel="trace reduction",
    )
    return {"rows": rows, "csv": csv_path, "svg": svg_path,
            "violations": int(sum(flags))}
