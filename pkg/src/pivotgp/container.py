"""Binary container for partial factors and preconditioners.

Layout, all little-endian:

========  =======================================
bytes     content
========  =======================================
4         magic ``PCHL``
4         format version, u32 (currently 1)
8         n, u64
8         m, u64
8 * n     pivot permutation, u64
8 * n     residual diagonal d, f64
8 * n*m   m factor columns, f64, length n each
========  =======================================

A preconditioner file appends one section: the 4-byte tag ``RDIA`` followed
by the n-entry f64 residual standard deviation array.
"""

from __future__ import annotations

import struct

import numpy as np

from .decomposition import PartialCholesky
from .exceptions import DataError
from .preconditioner import LowRankTriangular

MAGIC = b"PCHL"
VERSION = 1
_DIAG_TAG = b"RDIA"


def _write_core(fh, n, m, perm, d, cols):
    fh.write(MAGIC)
    fh.write(struct.pack("<IQQ", VERSION, n, m))
    fh.write(np.ascontiguousarray(perm, dtype="<u8").tobytes())
    fh.write(np.ascontiguousarray(d, dtype="<f8").tobytes())
    for k in range(m):
        fh.write(np.ascontiguousarray(cols[:, k], dtype="<f8").tobytes())


def save_factor(pc, path):
    """Write a partial factor to ``path`` in the documented container."""
    with open(path, "wb") as fh:
        _write_core(fh, pc.n, pc.m, pc.perm, pc.d, pc.L)


def save_preconditioner(pre, path):
    """Write a preconditioner: the factor layout plus its diagonal section."""
    with open(path, "wb") as fh:
        d = np.zeros(pre.n)
        _write_core(fh, pre.n, pre.m, pre.perm, d, pre.cols)
        fh.write(_DIAG_TAG)
        fh.write(np.ascontiguousarray(pre.resid_diag, dtype="<f8").tobytes())


def _read_exact(fh, count, what):
    buf = fh.read(count)
    if len(buf) != count:
        raise DataError(f"container truncated while reading {what}")
    return buf


def _read_core(fh):
    magic = fh.read(4)
    if magic != MAGIC:
        raise DataError(f"bad container magic {magic!r}")
    version, n, m = struct.unpack("<IQQ", _read_exact(fh, 20, "header"))
    if version != VERSION:
        raise DataError(f"unsupported container version {version}")
    if m > n:
        raise DataError(f"container claims rank {m} above size {n}")
    perm = np.frombuffer(_read_exact(fh, 8 * n, "permutation"), dtype="<u8")
    perm = perm.astype(int)
    if sorted(perm) != list(range(n)):
        raise DataError("container permutation is not a permutation")
    d = np.frombuffer(_read_exact(fh, 8 * n, "diagonal"), dtype="<f8").astype(float)
    L = np.empty((n, m))
    for k in range(m):
        L[:, k] = np.frombuffer(_read_exact(fh, 8 * n, f"column {k}"), dtype="<f8")
    return n, m, perm, d, L


def load_factor(path):
    """Read a partial factor back; the result carries no operator and cannot
    be stepped further, but supports solves, truncation, and reconstruction.
    """
    with open(path, "rb") as fh:
        n, m, perm, d, L = _read_core(fh)
    pc = object.__new__(PartialCholesky)
    pc.op = None
    pc.n = n
    pc.m = m
    pc.strategy = None
    pc.strategy_name = "loaded"
    pc.y = None
    pc.mean = 0.0
    pc.perm = perm
    pc.inv_perm = np.empty(n, dtype=int)
    pc.inv_perm[perm] = np.arange(n)
    pc.L = L
    pc.d = d
    pc.initial_diag = d + np.einsum("jk,jk->j", L, L)
    scale = float(np.max(pc.initial_diag)) if n else 1.0
    pc.tolerance = 1e-10 * scale
    pc.trace_history = [float(np.sum(d[m:]))]
    return pc


def load_preconditioner(path):
    """Read a preconditioner written by :func:`save_preconditioner`."""
    with open(path, "rb") as fh:
        n, m, perm, _, L = _read_core(fh)
        tag = fh.read(4)
        if tag != _DIAG_TAG:
            raise DataError(f"expected diagonal section, found {tag!r}")
        dt = np.frombuffer(_read_exact(fh, 8 * n, "residual diagonal"), dtype="<f8")
    return LowRankTriangular(L, dt.astype(float), perm)
