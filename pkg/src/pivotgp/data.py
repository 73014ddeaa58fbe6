"""Dataset ingestion and synthetic generators for the benchmark harness.

CSV ingestion follows a fixed pipeline: drop unusable rows, shuffle with the
seeded stream, truncate to the cap, then standardize features and target with
post-truncation statistics.  Generators are deterministic per seed; the
model-sample generator factors its covariance with a fixed-order routine so
the drawn targets do not depend on the BLAS thread count.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataError
from .kernels import KernelConfig, cross_kernel

# named substreams so dataset shuffling, strategy randomness, and sampling
# never share a generator
_STREAMS = {"data": 101, "strategy": 211, "sample": 307}


def stream(seed, name):
    """Seeded generator for one of the named substreams."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), _STREAMS[name])))


@dataclass
class Dataset:
    """Standardized inputs and target, plus ingestion bookkeeping."""

    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    name: str
    dropped: int = 0

    @property
    def n(self):
        return self.X.shape[0]


def _standardize(A, label):
    mean = np.mean(A, axis=0)
    std = np.std(A, axis=0, ddof=1)
    bad = np.flatnonzero(std == 0)
    if bad.size:
        raise DataError(f"{label} {bad[0]} has zero variance")
    return (A - mean) / std


def ingest(path, seed, cap=7000, target_col=None):
    """Load a numeric CSV into a standardized dataset.

    The last column is the target unless ``target_col`` names or indexes
    another one.  Rows with missing or non-numeric cells are dropped and
    counted.  The seed fixes the shuffle, and through it which rows survive
    the cap.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            raw = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from None
    if not raw:
        raise DataError(f"{path} is empty")

    header = None
    if not all(_is_number(c) for c in raw[0]):
        header = [c.strip() for c in raw[0]]
        raw = raw[1:]
    if not raw:
        raise DataError(f"{path} has a header but no data rows")
    width = len(raw[0]) if header is None else len(header)
    if width < 2:
        raise DataError("need at least one feature column and one target column")

    ti = width - 1
    if target_col is not None:
        if _is_int(target_col):
            ti = int(target_col)
            if not -width <= ti < width:
                raise DataError(f"target column index {ti} out of range")
            ti %= width
        else:
            if header is None:
                raise DataError("named target column requires a header row")
            if target_col not in header:
                raise DataError(f"target column {target_col!r} not in header")
            ti = header.index(target_col)

    rows = []
    dropped = 0
    for row in raw:
        if len(row) != width or not all(_is_number(c) for c in row):
            dropped += 1
            continue
        rows.append([float(c) for c in row])
    if len(rows) < 2:
        raise DataError(f"{path} has {len(rows)} usable rows, need at least 2")

    data = np.asarray(rows)
    order = stream(seed, "data").permutation(len(rows))[: int(cap)]
    data = data[order]
    y = data[:, ti]
    X = np.delete(data, ti, axis=1)
    X = _standardize(X, "feature column")
    y = _standardize(y[:, None], "target column")[:, 0]
    return Dataset(X=X, y=y, name=path.stem, dropped=dropped)


def _is_number(cell):
    try:
        v = float(cell)
    except ValueError:
        return False
    return np.isfinite(v)


def _is_int(v):
    if isinstance(v, int):
        return True
    try:
        int(str(v))
    except ValueError:
        return False
    return True


_SPEC_RE = re.compile(r"^\s*([a-z][a-z-]*)\s*\(([^)]*)\)\s*$")


def synth(spec, seed):
    """Generate a synthetic dataset from a spec string.

    Supported generators:

    * ``clusters(k, n, d, spread)``: k Gaussian blobs in the unit cube.
    * ``uniform(n, d)``: uniform inputs.
    * ``gp-sample(n, d, theta, ell, sigma2)``: targets drawn from the model
      with the given kernel hyperparameters.

    Inputs are standardized; clusters and uniform targets are standardized
    noise, while gp-sample targets keep the model's scale.
    """
    m = _SPEC_RE.match(str(spec))
    if not m:
        raise ValueError(f"cannot parse synthetic spec {spec!r}")
    kind = m.group(1)
    try:
        args = [float(a) for a in m.group(2).split(",")] if m.group(2).strip() else []
    except ValueError:
        raise ValueError(f"non-numeric argument in synthetic spec {spec!r}") from None
    rng = stream(seed, "sample")

    if kind == "clusters":
        k, n, d, spread = _spec_args(spec, args, 4)
        k, n, d = _as_counts(spec, k, n, d)
        if spread <= 0:
            raise ValueError(f"spread must be positive in {spec!r}")
        centers = rng.random((k, d))
        labels = rng.integers(0, k, n)
        X = centers[labels] + spread * rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        name = f"clusters({k},{n},{d},{spread:g})"
    elif kind == "uniform":
        n, d = _spec_args(spec, args, 2)
        n, d = _as_counts(spec, n, d)
        X = rng.random((n, d))
        y = rng.standard_normal(n)
        name = f"uniform({n},{d})"
    elif kind == "gp-sample":
        n, d, theta, ell, sigma2 = _spec_args(spec, args, 5)
        n, d = _as_counts(spec, n, d)
        if theta <= 0 or ell <= 0 or sigma2 < 0:
            raise ValueError(f"non-positive hyperparameter in {spec!r}")
        X = _standardize(rng.random((n, d)), "feature column")
        config = KernelConfig(signal_variance=theta, lengthscales=np.full(d, ell))
        K = cross_kernel(X, X, config)
        K[np.diag_indices_from(K)] += sigma2 + 1e-10 * theta
        L = _lower_cholesky(K)
        y = L @ rng.standard_normal(L.shape[1])
        return Dataset(X=X, y=y, name=f"gp-sample({n},{d},{theta:g},{ell:g},{sigma2:g})")
    else:
        raise ValueError(f"unknown synthetic generator {kind!r}")

    X = _standardize(X, "feature column")
    y = _standardize(y[:, None], "target column")[:, 0]
    return Dataset(X=X, y=y, name=name)


def _spec_args(spec, args, count):
    if len(args) != count:
        raise ValueError(f"{spec!r} takes {count} arguments, got {len(args)}")
    return args


def _as_counts(spec, *vals):
    out = []
    for v in vals:
        if v != int(v) or v < 1:
            raise ValueError(f"size arguments must be positive integers in {spec!r}")
        out.append(int(v))
    return out


def _lower_cholesky(A):
    """Unpivoted Cholesky with fixed-order reductions; truncates on breakdown.

    Keeps the sampled targets bitwise reproducible regardless of how many
    threads the linear algebra backend would use.
    """
    n = A.shape[0]
    L = np.zeros_like(A)
    for k in range(n):
        pk = A[k, k] - np.einsum("i,i->", L[k, :k], L[k, :k])
        if pk <= 0:
            return L[:, :k]
        L[k, k] = np.sqrt(pk)
        if k + 1 < n:
            off = A[k + 1 :, k] - np.einsum("ij,j->i", L[k + 1 :, :k], L[k, :k])
            L[k + 1 :, k] = off / L[k, k]
    return L
