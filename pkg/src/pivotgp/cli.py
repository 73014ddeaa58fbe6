"""Command-line interface for decompositions and the benchmark harness.

Options can also come from a config file given with ``--config``: one
``key = value`` pair per line, ``#`` comments, blank lines ignored.  Keys are
the long option names with dashes or underscores; values may be quoted.
Command-line flags always win over config values.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure in a non-grid command (grid commands record cell failures in their
CSV instead).
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np

from .bench import (DEFAULT_TOL, ExperimentConfig, run_precond_experiment,
                    run_regression_experiment, run_trace_bounds)
from .container import save_factor, save_preconditioner
from .data import ingest, stream, synth
from .decomposition import decompose
from .exceptions import DataError, NumericalError
from .kernels import KernelConfig
from .metrics import trace_residual
from .operators import GramOperator
from .preconditioner import build_preconditioner
from .strategies import STRATEGY_NAMES

DEFAULT_CAP = 7000

_KNOWN_KEYS = {
    "data", "target_col", "synth", "theta", "lengthscale", "noise", "mean",
    "strategy", "strategies", "ranks", "rank", "trace_tol", "seeds", "seed",
    "cap", "tol", "mi_eps", "paper_literal_coefficients", "out",
    "precond_out", "jobs",
}


def load_config(path):
    """Parse the documented key=value config grammar into a string dict."""
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise click.UsageError(f"cannot read config {path}: {e}")
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise click.UsageError(f"{path}:{lineno}: expected key = value")
        key, value = s.split("=", 1)
        key = key.strip().replace("-", "_")
        value = value.strip()
        if len(value) >= 2 and value[0] in "\"'" and value[-1] == value[0]:
            value = value[1:-1]
        if not key:
            raise click.UsageError(f"{path}:{lineno}: empty key")
        if key not in _KNOWN_KEYS:
            raise click.UsageError(f"{path}:{lineno}: unknown key {key!r}")
        cfg[key] = value
    return cfg


class _Resolver:
    """Flag value if given, else config file value, else default."""

    def __init__(self, config_path):
        self.cfg = load_config(config_path) if config_path else {}

    def get(self, flag_value, key, default, conv=str):
        if flag_value is not None and flag_value != ():
            return flag_value
        if key in self.cfg:
            try:
                return conv(self.cfg[key])
            except ValueError as e:
                raise click.UsageError(f"config key {key!r}: {e}")
        return default


def _parse_ints(text):
    """Comma-separated ints; 'a:b' items expand to the inclusive range."""
    out = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ":" in tok:
            lo, hi = tok.split(":", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty range {tok!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(tok))
    if not out:
        raise ValueError("expected at least one integer")
    return out


def _parse_strategies(text, extra=()):
    names = [s.strip() for s in str(text).split(",") if s.strip()]
    allowed = set(STRATEGY_NAMES) | set(extra)
    for s in names:
        if s not in allowed:
            raise ValueError(f"unknown strategy {s!r}")
    if not names:
        raise ValueError("expected at least one strategy")
    return names


def _parse_floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _run(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DataError as e:
            click.echo(f"data error: {e}", err=True)
            sys.exit(3)
        except NumericalError as e:
            click.echo(f"numerical failure: {e}", err=True)
            sys.exit(4)
    return wrapper


def _dataset_options(fn):
    for opt in reversed([
        click.option("--data", type=click.Path(), default=None,
                     help="CSV dataset; last column is the target."),
        click.option("--target-col", default=None,
                     help="Target column name or index."),
        click.option("--synth", "synth_spec", default=None,
                     help="Synthetic spec, e.g. clusters(5,1000,2,0.15)."),
        click.option("--cap", type=int, default=None,
                     help=f"Row cap after shuffling (default {DEFAULT_CAP})."),
        click.option("--seed", type=int, default=None,
                     help="Dataset shuffle/generation seed (default 0)."),
    ]):
        fn = opt(fn)
    return fn


def _kernel_options(fn):
    for opt in reversed([
        click.option("--theta", type=float, default=None,
                     help="Kernel signal variance (default 1.0)."),
        click.option("--lengthscale", type=float, multiple=True,
                     help="Lengthscale; repeat per dimension or give one."),
        click.option("--noise", type=float, default=None,
                     help="Observation noise variance (default 0.01)."),
        click.option("--mean", type=float, default=None,
                     help="Constant prior mean (default 0.0)."),
    ]):
        fn = opt(fn)
    return fn


def _resolve_dataset(res, data, target_col, synth_spec, cap, seed):
    data = res.get(data, "data", None)
    synth_spec = res.get(synth_spec, "synth", None)
    target_col = res.get(target_col, "target_col", None)
    cap = res.get(cap, "cap", DEFAULT_CAP, int)
    seed = res.get(seed, "seed", 0, int)
    if (data is None) == (synth_spec is None):
        raise click.UsageError("provide exactly one of --data and --synth")
    if data is not None:
        return ingest(data, seed=seed, cap=cap, target_col=target_col), seed
    try:
        return synth(synth_spec, seed=seed), seed
    except ValueError as e:
        raise click.UsageError(str(e))


def _resolve_kernel(res, theta, lengthscale, noise, mean):
    theta = res.get(theta, "theta", 1.0, float)
    ell = res.get(tuple(lengthscale), "lengthscale", [1.0], _parse_floats)
    noise = res.get(noise, "noise", 0.01, float)
    mean = res.get(mean, "mean", 0.0, float)
    try:
        return KernelConfig(signal_variance=theta,
                            lengthscales=np.asarray(ell, dtype=float),
                            noise_variance=noise, mean=mean)
    except ValueError as e:
        raise click.UsageError(str(e))


def _bench_config(res, ds, kernel, strategies, default_strategies, ranks,
                  seeds, tol, mi_eps, literal, out, jobs):
    try:
        strategies = res.get(strategies, "strategies", default_strategies,
                             lambda t: _parse_strategies(t, extra=("none",)))
        if isinstance(strategies, str):
            strategies = _parse_strategies(strategies, extra=("none",))
        ranks = res.get(ranks, "ranks", None, _parse_ints)
        if isinstance(ranks, str):
            ranks = _parse_ints(ranks)
        seeds = res.get(seeds, "seeds", list(range(10)), _parse_ints)
        if isinstance(seeds, str):
            seeds = _parse_ints(seeds)
    except ValueError as e:
        raise click.UsageError(str(e))
    tol = res.get(tol, "tol", DEFAULT_TOL, float)
    mi_eps = res.get(mi_eps, "mi_eps", 0.5, float)
    literal = res.get(literal or None, "paper_literal_coefficients",
                      False, _bool)
    out = Path(res.get(out, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    jobs = res.get(jobs, "jobs", 1, int)
    if tol <= 0:
        raise click.UsageError("--tol must be positive")
    if not 0 <= mi_eps <= 1:
        raise click.UsageError("--mi-eps must lie in [0, 1]")
    return ExperimentConfig(dataset=ds, kernel=kernel, strategies=strategies,
                            seeds=seeds, ranks=ranks, tol=tol, mi_eps=mi_eps,
                            paper_literal_coefficients=bool(literal), out=out,
                            jobs=jobs)


@click.group()
def main():
    """Pivoted Cholesky decompositions and sparse GP benchmarks."""


@main.command("synth")
@click.option("--synth", "synth_spec", required=True,
              help="Generator spec, e.g. uniform(200,2).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True,
              help="Output CSV path.")
@_run
def synth_cmd(synth_spec, seed, out):
    """Generate a synthetic dataset and write it as CSV."""
    try:
        ds = synth(synth_spec, seed=seed)
    except ValueError as e:
        raise click.UsageError(str(e))
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        cols = [f"x{i}" for i in range(ds.X.shape[1])] + ["y"]
        fh.write(",".join(cols) + "\n")
        for row, target in zip(ds.X, ds.y):
            cells = [str(float(v)) for v in row] + [str(float(target))]
            fh.write(",".join(cells) + "\n")
    click.echo(f"wrote {ds.n} rows of {ds.name} to {out}")


@main.command("decompose")
@_dataset_options
@_kernel_options
@click.option("--strategy", default=None,
              help="Pivot selection strategy (default var).")
@click.option("--rank", type=int, default=None, help="Rank target.")
@click.option("--trace-tol", type=float, default=None,
              help="Stop at this fraction of the initial trace.")
@click.option("--mi-eps", type=float, default=None)
@click.option("--out", type=click.Path(), default=None,
              help="Factor container path (default factor.bin).")
@click.option("--precond-out", type=click.Path(), default=None,
              help="Also write the preconditioner container here.")
@click.option("--config", "config_path", type=click.Path(), default=None)
@_run
def decompose_cmd(data, target_col, synth_spec, cap, seed, theta, lengthscale,
                  noise, mean, strategy, rank, trace_tol, mi_eps, out,
                  precond_out, config_path):
    """Factor a dataset's Gram matrix and store the result."""
    res = _Resolver(config_path)
    ds, seed = _resolve_dataset(res, data, target_col, synth_spec, cap, seed)
    kernel = _resolve_kernel(res, theta, lengthscale, noise, mean)
    strategy = res.get(strategy, "strategy", "var")
    if strategy not in STRATEGY_NAMES:
        raise click.UsageError(f"unknown strategy {strategy!r}")
    rank = res.get(rank, "rank", None, int)
    trace_tol = res.get(trace_tol, "trace_tol", None, float)
    mi_eps = res.get(mi_eps, "mi_eps", 0.5, float)
    out = Path(res.get(out, "out", "factor.bin"))
    precond_out = res.get(precond_out, "precond_out", None)
    op = GramOperator(ds.X, kernel, mode="noisy")
    if rank is not None and not 0 <= rank <= ds.n:
        raise click.UsageError(f"--rank must lie in [0, {ds.n}]")
    pc = decompose(op, strategy, rank=rank, trace_tolerance=trace_tol,
                   y=ds.y, mi_eps=mi_eps, rng=stream(seed, "strategy"))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_factor(pc, out)
    click.echo(f"dataset {ds.name}: n={ds.n}, achieved rank {pc.m}, "
               f"residual trace {trace_residual(pc):.6g}")
    click.echo(f"factor written to {out}")
    if precond_out:
        precond_out = Path(precond_out)
        precond_out.parent.mkdir(parents=True, exist_ok=True)
        save_preconditioner(build_preconditioner(pc), precond_out)
        click.echo(f"preconditioner written to {precond_out}")


@main.command("precond-bench")
@_dataset_options
@_kernel_options
@click.option("--strategies", default=None,
              help="Comma list (default var,pcov); 'none' rows always run.")
@click.option("--ranks", default=None, help="Comma list, a:b ranges allowed.")
@click.option("--seeds", default=None, help="Comma list (default 0:9).")
@click.option("--tol", type=float, default=None)
@click.option("--mi-eps", type=float, default=None)
@click.option("--paper-literal-coefficients", is_flag=True, default=False)
@click.option("--out", type=click.Path(), default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@_run
def precond_bench_cmd(data, target_col, synth_spec, cap, seed, theta,
                      lengthscale, noise, mean, strategies, ranks, seeds, tol,
                      mi_eps, paper_literal_coefficients, out, jobs,
                      config_path):
    """Preconditioned-CG iteration grid over strategies, ranks, seeds."""
    res = _Resolver(config_path)
    ds, _ = _resolve_dataset(res, data, target_col, synth_spec, cap, seed)
    kernel = _resolve_kernel(res, theta, lengthscale, noise, mean)
    cfg = _bench_config(res, ds, kernel, strategies, ["var", "pcov"], ranks,
                        seeds, tol, mi_eps, paper_literal_coefficients, out,
                        jobs)
    result = run_precond_experiment(cfg)
    for s in result["skipped"]:
        click.echo(f"note: strategy {s} skipped for n={ds.n} > 512", err=True)
    click.echo(f"wrote {result['csv']}")
    click.echo(f"wrote {result['svg']}")


@main.command("gp-bench")
@_dataset_options
@_kernel_options
@click.option("--strategies", default=None,
              help="Comma list (default var,pcov,wpcov,me,random).")
@click.option("--ranks", default=None, help="Comma list, a:b ranges allowed.")
@click.option("--seeds", default=None, help="Comma list (default 0:9).")
@click.option("--tol", type=float, default=None)
@click.option("--mi-eps", type=float, default=None)
@click.option("--paper-literal-coefficients", is_flag=True, default=False)
@click.option("--out", type=click.Path(), default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@_run
def gp_bench_cmd(data, target_col, synth_spec, cap, seed, theta, lengthscale,
                 noise, mean, strategies, ranks, seeds, tol, mi_eps,
                 paper_literal_coefficients, out, jobs, config_path):
    """Sparse-regression metric grid (SSE, trace, marginal likelihood)."""
    res = _Resolver(config_path)
    ds, _ = _resolve_dataset(res, data, target_col, synth_spec, cap, seed)
    kernel = _resolve_kernel(res, theta, lengthscale, noise, mean)
    cfg = _bench_config(res, ds, kernel, strategies,
                        ["var", "pcov", "wpcov", "me", "random"], ranks,
                        seeds, tol, mi_eps, paper_literal_coefficients, out,
                        jobs)
    result = run_regression_experiment(cfg)
    for s in result["skipped"]:
        click.echo(f"note: strategy {s} skipped for n={ds.n} > 512", err=True)
    click.echo(f"wrote {result['csv']}")
    click.echo(f"wrote {result['normalizers']}")
    for svg in result["svgs"]:
        click.echo(f"wrote {svg}")


@main.command("trace-bounds")
@_dataset_options
@_kernel_options
@click.option("--out", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@_run
def trace_bounds_cmd(data, target_col, synth_spec, cap, seed, theta,
                     lengthscale, noise, mean, out, config_path):
    """Per-row trace-reduction bounds table for the latent kernel."""
    res = _Resolver(config_path)
    ds, _ = _resolve_dataset(res, data, target_col, synth_spec, cap, seed)
    kernel = _resolve_kernel(res, theta, lengthscale, noise, mean)
    out = Path(res.get(out, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(dataset=ds, kernel=kernel, strategies=[],
                           seeds=[], out=out)
    result = run_trace_bounds(cfg)
    click.echo(f"wrote {result['csv']}")
    click.echo(f"wrote {result['svg']}")
    click.echo(f"bound violations: {result['violations']}")


if __name__ == "__main__":
    main()
