"""Simulation scenarios with known conditional laws.

Covariates are uniform on the unit cube. Formulas use 1-based coordinate
names in comments (x1 is ``x[0]``).

Scenarios:

``main``
    Y(0) ~ N(m0, s0^2); Y(1) ~ 1/2 Dirac(-1) + 1/2 N(m1, s1^2); T ~ Bernoulli(1/2).
``appendix_a`` / ``appendix_c``
    Y(1) ~ 1/2 N(-1, 1) + 1/2 N(m1, s1^2); T ~ Bernoulli(e(x)) with
    e(x) = sin(2 x1 x2 + 6 x3) / 2 + 1/2. The two kinds generate the same data;
    ``appendix_c`` is the name used for the propensity-degradation study.
``multivariate_cost``
    As ``main`` with a treatment cost C(1) ~ N(2 x3 x5 + x2, x5 x6 + 1) drawn
    independently of Y(1). Responses are (Y(1), C(1)) for treated rows and
    (Y(0), 0) for control rows.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .measure import DiscreteMeasure, make_measure
from .rng import check_seed, substream

KINDS = ("main", "multivariate_cost", "appendix_a", "appendix_c")
SIGMA1_FLOOR = 1e-12


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "main"
    n: int = 1000
    d: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario {self.kind!r}; expected one of {KINDS}")
        if self.d < 6:
            raise ValueError("scenarios need d >= 6")
        if self.n < 2:
            raise ValueError("scenarios need n >= 2")
        check_seed(self.seed)

    @property
    def dy(self) -> int:
        return 2 if self.kind == "multivariate_cost" else 1

    @property
    def has_propensity(self) -> bool:
        return self.kind in ("appendix_a", "appendix_c")


@dataclass
class HTEDataset:
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    # potential outcomes, kept for oracles only
    y0: np.ndarray = None
    y1: np.ndarray = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim == 1:
            self.y = self.y.reshape(-1, 1)
        self.t = np.asarray(self.t).astype(np.int64)
        if self.x.shape[0] != self.y.shape[0] or self.x.shape[0] != self.t.shape[0]:
            raise ValueError("x, y and t must have the same number of rows")
        if not np.all((self.t == 0) | (self.t == 1)):
            raise ValueError("treatment indicators must be 0 or 1")

    @property
    def n(self) -> int:
        return self.x.shape[0]


def _cols(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 6:
        raise ValueError("covariate vectors need at least 6 coordinates")
    if np.any(x < 0) or np.any(x > 1):
        warnings.warn("covariates outside the unit cube", RuntimeWarning, stacklevel=3)
    return [x[..., k] for k in range(6)]


def mean_var_functions(x):
    """(m0, s0^2, m1, s1^2) at ``x`` (vectorized over leading axes)."""
    x1, x2, x3, x4, x5, x6 = _cols(x)
    m0 = 10 * x2 * x4 + x3 + np.exp(x4 - 2 * x1)
    s0sq = np.maximum(-x1 * x2 + 4 * x3 ** 2, 0.2)
    m1 = 2 * m0 + 1 - 5 * x2 * x5
    s1sq = np.maximum(3 * x2 + x3 * x4 + x6, SIGMA1_FLOOR)
    return m0, s0sq, m1, s1sq


def true_cate(x):
    x = np.asarray(x, dtype=float)
    return -2.5 * x[..., 1] * x[..., 4]


def cost_mean_var(x):
    x1, x2, x3, x4, x5, x6 = _cols(x)
    return 2 * x3 * x5 + x2, x5 * x6 + 1


def propensity(spec: ScenarioSpec, x):
    """P(T=1 | x); constant 1/2 for the randomized scenarios."""
    x = np.asarray(x, dtype=float)
    if not spec.has_propensity:
        return np.full(x.shape[:-1], 0.5) if x.ndim > 1 else 0.5
    e = 0.5 * np.sin(2 * x[..., 0] * x[..., 1] + 6 * x[..., 2]) + 0.5
    return np.clip(e, 0.0, 1.0)


def x_star_appendix_c(d: int = 50, fill: float = 0.5) -> np.ndarray:
    """A point with zero propensity: x1 = pi/4, x2 = 1, x3 = pi/6."""
    x = np.full(d, fill)
    x[0] = math.pi / 4
    x[1] = 1.0
    x[2] = math.pi / 6
    return x


def conditional_mean(spec: ScenarioSpec, t: int, x):
    """E[Y(t) | x]; a (..., d') array for the bivariate scenario, scalar-shaped otherwise."""
    m0, _, m1, _ = mean_var_functions(x)
    mu = m0 if t == 0 else 0.5 * m1 - 0.5
    if spec.kind != "multivariate_cost":
        return mu
    second = np.zeros_like(mu) if t == 0 else cost_mean_var(x)[0]
    return np.stack([mu, second], axis=-1)


def _draw_outcomes(spec, t, x, rng, size=None):
    """Draws of Y(t) | x. With ``size`` set, ``x`` is one point and ``size`` draws are made."""
    m0, s0sq, m1, s1sq = mean_var_functions(x)
    shape = np.shape(m0) if size is None else (size,)
    if t == 0:
        y = rng.normal(m0, np.sqrt(s0sq), size=shape)
        second = np.zeros(shape)
    else:
        pick = rng.random(shape) < 0.5
        gauss = rng.normal(m1, np.sqrt(s1sq), size=shape)
        if spec.kind in ("appendix_a", "appendix_c"):
            other = rng.normal(-1.0, 1.0, size=shape)
        else:
            other = np.full(shape, -1.0)
        y = np.where(pick, other, gauss)
        second = None
        if spec.kind == "multivariate_cost":
            cm, cv = cost_mean_var(x)
            second = rng.normal(cm, np.sqrt(cv), size=shape)
    if spec.kind == "multivariate_cost":
        return np.stack([y, second], axis=-1)
    return y.reshape(*shape, 1)


def generate(spec: ScenarioSpec) -> HTEDataset:
    """Draw an observational dataset; identical for identical specs."""
    rng = substream(spec.seed, 0)
    x = rng.random((spec.n, spec.d))
    e = propensity(spec, x) if spec.has_propensity else np.full(spec.n, 0.5)
    t = (rng.random(spec.n) < e).astype(np.int64)
    y0 = _draw_outcomes(spec, 0, x, rng)
    y1 = _draw_outcomes(spec, 1, x, rng)
    y = np.where(t[:, None] == 1, y1, y0)
    return HTEDataset(x, y, t, y0, y1)


def sample_true_conditional(spec: ScenarioSpec, t: int, x, m: int,
                            rng: np.random.Generator) -> DiscreteMeasure:
    """Uniform empirical measure of ``m`` draws from the law of Y(t) given x."""
    if t not in (0, 1):
        raise ValueError(f"treatment arm must be 0 or 1, got {t!r}")
    if m < 1:
        raise ValueError("need at least one draw")
    x = np.asarray(x, dtype=float).reshape(-1)
    return make_measure(_draw_outcomes(spec, t, x, rng, size=m))
