"""Uniform estimator interface over the WRF variants and the baseline forests.

ERT draws one uniform threshold per tried dimension inside the cell's extent
and keeps the best by the splitting criterion. The Mondrian baseline is a
simplified, budget-free variant: the split dimension is drawn with
probability proportional to the side lengths of the cell's bounding box and
the position uniformly along that side. It never looks at the responses.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..forest import Forest, ForestParams, fit, predict_mean, predict_measure
from ..measure import DiscreteMeasure


@dataclass(frozen=True)
class Method:
    name: str
    kind: str = "wrf"
    criterion: str = "intra_l2"
    p: float = 2.0

    def params(self, base: ForestParams) -> ForestParams:
        return base.replace(kind=self.kind, criterion=self.criterion, p=float(self.p))


METHODS = {
    "intra": Method("intra"),
    "inter2": Method("inter2", criterion="inter_wp", p=2.0),
    "inter1": Method("inter1", criterion="inter_wp", p=1.0),
    "ert": Method("ert", kind="ert"),
    "mondrian": Method("mondrian", kind="mondrian"),
}


def method(name: str) -> Method:
    try:
        return METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; expected one of {sorted(METHODS)}") from None


@dataclass
class Estimator:
    forest: Forest
    name: str = ""

    def predict_measure(self, x) -> DiscreteMeasure:
        return predict_measure(self.forest, x)

    def predict_mean(self, x) -> np.ndarray:
        return predict_mean(self.forest, x)


def fit_estimator(m: Method, x, y, base: ForestParams, threads: Optional[int] = None) -> Estimator:
    return Estimator(fit(x, y, m.params(base), threads=threads), m.name)


def fit_ert(x, y, params: ForestParams, threads: Optional[int] = None) -> Estimator:
    return Estimator(fit(x, y, params.replace(kind="ert"), threads=threads), "ert")


def fit_mondrian(x, y, params: ForestParams, threads: Optional[int] = None) -> Estimator:
    return Estimator(fit(x, y, params.replace(kind="mondrian"), threads=threads), "mondrian")
