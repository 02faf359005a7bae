"""Average-Wasserstein and conditional-mean accuracy against scenario oracles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ..measure import DiscreteMeasure, wasserstein
from ..rng import substream
from ..synth import ScenarioSpec, conditional_mean, sample_true_conditional

# reference draws for arm t, point k come from substream(eval_seed, _REF_BASE[t] + k)
_REF_BASE = (1 << 32, 2 << 32)
_ALT_BASE = (3 << 32, 4 << 32)


def draw_test_points(spec: ScenarioSpec, n_test: int, eval_seed: int) -> np.ndarray:
    if n_test < 1:
        raise ValueError("n_test must be >= 1")
    return substream(eval_seed, 0).random((n_test, spec.d))


@dataclass
class EvalSet:
    """Shared test points and oracle reference measures for one arm."""

    spec: ScenarioSpec
    t: int
    xs: np.ndarray
    refs: List[DiscreteMeasure]
    eval_seed: int

    @property
    def m_ref(self) -> int:
        return len(self.refs[0])


def make_eval_set(spec: ScenarioSpec, t: int, n_test: int, m_ref: int, eval_seed: int,
                  xs=None) -> EvalSet:
    if t not in (0, 1):
        raise ValueError(f"treatment arm must be 0 or 1, got {t!r}")
    xs = draw_test_points(spec, n_test, eval_seed) if xs is None else np.asarray(xs, dtype=float)
    refs = [sample_true_conditional(spec, t, x, m_ref, substream(eval_seed, _REF_BASE[t] + k))
            for k, x in enumerate(xs)]
    return EvalSet(spec, t, xs, refs, eval_seed)


def mean_stderr(values) -> tuple:
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
    return float(v.mean()), se


def per_point_wasserstein(estimator, eval_set: EvalSet, p: float) -> np.ndarray:
    return np.array([wasserstein(estimator.predict_measure(x), ref, p)
                     for x, ref in zip(eval_set.xs, eval_set.refs)])


def avg_wasserstein(estimator, spec: ScenarioSpec, t: int, p: float, n_test: int = 200,
                    m_ref: int = 2000, eval_seed: int = 0, eval_set: EvalSet = None):
    """Monte-Carlo mean and standard error of W_p(estimate, truth) over test points.

    The truth at each point is an empirical measure of ``m_ref`` oracle draws.
    """
    if eval_set is None:
        eval_set = make_eval_set(spec, t, n_test, m_ref, eval_seed)
    elif eval_set.spec.kind != spec.kind or eval_set.t != t:
        raise ValueError("evaluation set does not match the requested scenario and arm")
    return mean_stderr(per_point_wasserstein(estimator, eval_set, p))


def noise_floor(spec: ScenarioSpec, t: int, p: float, n_test: int = 200, m_ref: int = 2000,
                eval_seed: int = 0) -> tuple:
    """Mean W_p between two independent reference samples at the same points."""
    a = make_eval_set(spec, t, n_test, m_ref, eval_seed)
    d = [wasserstein(ref, sample_true_conditional(
            spec, t, x, m_ref, substream(eval_seed, _ALT_BASE[t] + k)), p)
         for k, (x, ref) in enumerate(zip(a.xs, a.refs))]
    return mean_stderr(d)


def mse_conditional_mean(estimator, spec: ScenarioSpec, t: int, n_test: int = 200,
                         eval_seed: int = 0, xs=None) -> float:
    """Mean squared error of the forest's conditional mean against E[Y(t) | x]."""
    xs = draw_test_points(spec, n_test, eval_seed) if xs is None else np.asarray(xs, dtype=float)
    mu = np.asarray(conditional_mean(spec, t, xs), dtype=float).reshape(len(xs), -1)
    pred = np.array([np.asarray(estimator.predict_mean(x), dtype=float).reshape(-1)
                     for x in xs])
    return float(np.mean(np.sum((pred - mu) ** 2, axis=1)))
