from .ensemble import (
    DEFAULT_GRIDS,
    MODEL_KINDS,
    EvalReport,
    RegressionEnsemble,
    evaluate,
    fit_ensemble,
    load_ensemble,
    route,
    route_batch,
    save_ensemble,
    tune,
)
from .models import Kernel, KrrModel, LinearModel, SolverError, median_sigma, train_krr, train_lr
from .svr import ConvergenceError, SvrModel, dual_objective, solve_svr_dual, train_svr

__all__ = [
    "DEFAULT_GRIDS",
    "MODEL_KINDS",
    "ConvergenceError",
    "EvalReport",
    "Kernel",
    "KrrModel",
    "LinearModel",
    "RegressionEnsemble",
    "SolverError",
    "SvrModel",
    "dual_objective",
    "evaluate",
    "fit_ensemble",
    "load_ensemble",
    "median_sigma",
    "route",
    "route_batch",
    "save_ensemble",
    "solve_svr_dual",
    "train_krr",
    "train_lr",
    "train_svr",
    "tune",
]
