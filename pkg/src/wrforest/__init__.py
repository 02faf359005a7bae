"""Wasserstein random forests: conditional-distribution forests and HTE tools."""
from .forest import Dataset, Forest, ForestParams, fit, predict_mean, predict_measure, weights
from .hte import HTEModel, estimate_cate, estimate_pi, fit_hte, lambda_p, oob_lambda
from .measure import (DiscreteMeasure, TransportPlan, make_measure, sinkhorn, wasserstein,
                      wasserstein_1d, wasserstein_exact)

__version__ = "0.1.0"
