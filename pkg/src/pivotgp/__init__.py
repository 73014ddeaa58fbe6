"""Partial pivoted Cholesky decompositions with pluggable pivot selection,
low-rank triangular preconditioning, and sparse GP benchmark tooling."""

from .container import (load_factor, load_preconditioner, save_factor,
                        save_preconditioner)
from .data import Dataset, ingest, synth
from .decomposition import PartialCholesky, decompose
from .estimator import PivotedNystroem
from .exceptions import (AssumptionViolated, DataError, NumericalDivergence,
                         NumericalError, PivotBreakdown, PivotgpError,
                         SingularSystem)
from .kernels import KernelConfig, kernel_eval
from .metrics import (MetricsRow, TraceBoundRow, latent_replay, nlml, sse,
                      trace_bounds, trace_residual)
from .operators import DenseOperator, GramOperator
from .preconditioner import LowRankTriangular, build_preconditioner
from .solvers import PcgReport, pcg_solve
from .strategies import STRATEGY_NAMES, make_strategy

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolated",
    "DataError",
    "Dataset",
    "DenseOperator",
    "GramOperator",
    "KernelConfig",
    "LowRankTriangular",
    "MetricsRow",
    "NumericalDivergence",
    "NumericalError",
    "PartialCholesky",
    "PcgReport",
    "PivotBreakdown",
    "PivotedNystroem",
    "PivotgpError",
    "STRATEGY_NAMES",
    "SingularSystem",
    "TraceBoundRow",
    "build_preconditioner",
    "decompose",
    "ingest",
    "kernel_eval",
    "latent_replay",
    "load_factor",
    "load_preconditioner",
    "make_strategy",
    "nlml",
    "pcg_solve",
    "save_factor",
    "save_preconditioner",
    "sse",
    "synth",
    "trace_bounds",
    "trace_residual",
]
