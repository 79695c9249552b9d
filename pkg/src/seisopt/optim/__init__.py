"""Fixed-point and gradient-based optimizers: Anderson acceleration of
steepest descent, L-BFGS, nonlinear CG, and the shared line-search and
sliding-QR machinery."""

from .anderson import (
    AAWindow,
    FixedPointTrace,
    WeightSolution,
    aa_run,
    aa_step,
    aa_weights,
    minimize_aa,
    minimize_sd,
    multisecant_oracle,
    picard_step,
)
from .linesearch import LineSearchError, LineSearchResult, backtracking_line_search
from .problems import (
    CallableObjective,
    GradientDescentOperator,
    LinearFixedPoint,
    QuadraticObjective,
    default_eta,
)
from .qr import EmptyWindowError, SlidingQR
from .quasi_newton import LBFGSHistory, minimize_lbfgs, minimize_ncg
from .report import IterationRecord, OptimizeResult, OptimizerReport

__all__ = [
    "AAWindow",
    "CallableObjective",
    "EmptyWindowError",
    "FixedPointTrace",
    "GradientDescentOperator",
    "IterationRecord",
    "LBFGSHistory",
    "LineSearchError",
    "LineSearchResult",
    "LinearFixedPoint",
    "OptimizeResult",
    "OptimizerReport",
    "QuadraticObjective",
    "SlidingQR",
    "WeightSolution",
    "aa_run",
    "aa_step",
    "aa_weights",
    "backtracking_line_search",
    "default_eta",
    "minimize_aa",
    "minimize_lbfgs",
    "minimize_ncg",
    "minimize_sd",
    "multisecant_oracle",
    "picard_step",
]
