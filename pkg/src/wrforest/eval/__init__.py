from .baselines import METHODS, Estimator, Method, fit_ert, fit_estimator, fit_mondrian, method
from .bench import SWEEP_AXES, BenchReport, param_sweep, run_benchmark
from .metrics import (EvalSet, avg_wasserstein, draw_test_points, make_eval_set, mean_stderr,
                      mse_conditional_mean, noise_floor, per_point_wasserstein)

__all__ = [
    "METHODS", "SWEEP_AXES", "BenchReport", "Estimator", "EvalSet", "Method", "avg_wasserstein",
    "draw_test_points", "fit_ert", "fit_estimator", "fit_mondrian", "make_eval_set",
    "mean_stderr", "method", "mse_conditional_mean", "noise_floor", "param_sweep",
    "per_point_wasserstein", "run_benchmark",
]
