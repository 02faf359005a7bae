"""Per-arm forests for heterogeneous treatment effects.

One forest is trained on the control rows and one on the treated rows. From
the two estimated conditional laws we read off the CATE (difference of
means) and Lambda_p, the W_p distance between the two laws.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .forest import Forest, ForestParams, fit, measure_from_weights, predict_measure
from .measure import DiscreteMeasure, wasserstein

log = logging.getLogger(__name__)

HTE_VERSION = 1


class HTEError(ValueError):
    pass


@dataclass
class HTEModel:
    forest0: Forest
    forest1: Forest
    group0: np.ndarray
    group1: np.ndarray

    def forest(self, t: int) -> Forest:
        if t == 0:
            return self.forest0
        if t == 1:
            return self.forest1
        raise HTEError(f"treatment arm must be 0 or 1, got {t!r}")

    def swapped(self) -> "HTEModel":
        return HTEModel(self.forest1, self.forest0, self.group1, self.group0)

    def to_dict(self) -> dict:
        return {
            "version": HTE_VERSION,
            "forest0": self.forest0.to_dict(),
            "forest1": self.forest1.to_dict(),
            "group0": self.group0.tolist(),
            "group1": self.group1.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "HTEModel":
        if obj.get("version") != HTE_VERSION:
            raise HTEError(f"unsupported HTE model version {obj.get('version')!r}")
        return cls(Forest.from_dict(obj["forest0"]), Forest.from_dict(obj["forest1"]),
                   np.asarray(obj["group0"], dtype=np.int64),
                   np.asarray(obj["group1"], dtype=np.int64))

    @classmethod
    def from_json(cls, text: str) -> "HTEModel":
        return cls.from_dict(json.loads(text))


def fit_hte(x, y, t, params0: ForestParams, params1: Optional[ForestParams] = None,
            threads: Optional[int] = None) -> HTEModel:
    """Train independent forests on the control (t=0) and treated (t=1) rows."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    t = np.asarray(t).reshape(-1)
    params1 = params0 if params1 is None else params1
    groups = [np.flatnonzero(t == 0), np.flatnonzero(t == 1)]
    if len(groups[0]) + len(groups[1]) != len(t):
        raise HTEError("treatment indicators must be 0 or 1")
    forests = []
    for arm, (idx, params) in enumerate(zip(groups, (params0, params1))):
        name = "control" if arm == 0 else "treated"
        if len(idx) == 0:
            raise HTEError(f"empty {name} arm")
        if len(idx) < max(params.nodesize, 2):
            raise HTEError(f"{name} arm has {len(idx)} rows, fewer than nodesize")
        if not params.with_replacement and params.subsample_size > len(idx):
            raise HTEError(f"{name} arm has {len(idx)} rows, fewer than subsample_size "
                           f"{params.subsample_size} without replacement")
        forests.append(fit(x[idx], y[idx], params, threads=threads))
    return HTEModel(forests[0], forests[1], groups[0], groups[1])


def estimate_pi(model: HTEModel, t: int, x) -> DiscreteMeasure:
    return predict_measure(model.forest(t), x)


def estimate_cate(model: HTEModel, x) -> float:
    if model.forest0.y.shape[1] != 1 or model.forest1.y.shape[1] != 1:
        raise HTEError("CATE needs univariate responses")
    mu0 = estimate_pi(model, 0, x).mean()[0]
    mu1 = estimate_pi(model, 1, x).mean()[0]
    return float(mu1 - mu0)


def lambda_p(model: HTEModel, x, p: float) -> float:
    """W_p between the two estimated conditional laws at x."""
    if not float(p) >= 1.0:
        raise HTEError(f"p must be >= 1, got {p}")
    return float(wasserstein(estimate_pi(model, 0, x), estimate_pi(model, 1, x), p))


@dataclass
class OOBLambda:
    rows: List[int]
    values: List[float]
    skipped: List[int]


def oob_lambda(model: HTEModel, x, p: float) -> OOBLambda:
    """Out-of-bag Lambda_p at every training row.

    ``x`` is the full training covariate matrix (rows indexed as in
    ``group0``/``group1``). For row i of arm a, the arm-a forest uses only
    trees whose subsample never drew i; the other arm's forest never saw i and
    uses all its trees. Rows drawn by every tree of their own arm are skipped.
    """
    x = np.asarray(x, dtype=float)
    n = len(model.group0) + len(model.group1)
    if x.shape[0] != n:
        raise HTEError(f"expected {n} training rows, got {x.shape[0]}")
    bags = [model.forest0.in_bag(), model.forest1.in_bag()]
    local = {}
    for arm, group in enumerate((model.group0, model.group1)):
        for li, gi in enumerate(group):
            local[int(gi)] = (arm, li)
    rows, values, skipped = [], [], []
    for i in range(n):
        arm, li = local[i]
        measures = []
        for a in (0, 1):
            forest = model.forest(a)
            if a == arm:
                mask = ~bags[a][:, li]
                if not mask.any():
                    break
                alpha, m = forest.raw_weights(x[i], mask)
            else:
                alpha, m = forest.raw_weights(x[i])
            measures.append(measure_from_weights(alpha / m, forest.y))
        if len(measures) < 2:
            skipped.append(i)
            continue
        rows.append(i)
        values.append(float(wasserstein(measures[0], measures[1], p)))
    if not rows:
        log.warning("no training row has an out-of-bag tree; out-of-bag Lambda is empty")
    return OOBLambda(rows, values, skipped)
