"""Generalised degrees of freedom for sparse regression.

Replica-symmetric saddle-point analysis, finite-size message passing and
exact small-instance oracles for l1, elastic net, l2, l0 and SCAD penalties.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Branch,
    ElasticNet,
    GDFError,
    L0,
    L1,
    L2,
    ModelParams,
    Observables,
    RSSolution,
    RSState,
    Scad,
)
from .model_selection import (  # noqa: E402
    crossover_points,
    gdf,
    minimize_prediction_error,
    observables,
)
from .rs_solver import eta_for_delta, solve_rs, sweep_delta  # noqa: E402

__all__ = [
    "Branch", "ElasticNet", "GDFError", "L0", "L1", "L2", "ModelParams", "Observables",
    "RSSolution", "RSState", "Scad", "crossover_points", "eta_for_delta", "gdf",
    "minimize_prediction_error", "observables", "solve_rs", "sweep_delta",
]
