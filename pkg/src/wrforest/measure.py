"""Weighted discrete probability measures and Wasserstein distances."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

WEIGHT_TOL = 1e-9


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud: ``support`` is (m, d'), ``weights`` sum to one.

    Duplicate support points are allowed; their weights simply add.
    """

    support: np.ndarray
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    def __len__(self) -> int:
        return self.weights.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.support

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "points": self.support.tolist(),
            "weights": self.weights.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "DiscreteMeasure":
        m = make_measure(obj["points"], obj["weights"])
        if m.dim != int(obj["dim"]):
            raise MeasureError(f"declared dim {obj['dim']} but points have dim {m.dim}")
        return m

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        return cls.from_dict(json.loads(text))


def make_measure(points, weights: Optional[Sequence[float]] = None) -> DiscreteMeasure:
    """Build a measure from points and optional nonnegative weights.

    Weights are normalized to sum to one; omitted weights mean uniform.
    A 1-D ``points`` array is read as scalar support points.
    """
    try:
        pts = np.array(points, dtype=float)
    except ValueError as exc:
        raise MeasureError(f"points have inconsistent dimensions: {exc}") from None
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise MeasureError("points must be a list of equal-length vectors")
    if pts.shape[0] == 0:
        raise MeasureError("empty support")
    if pts.shape[1] == 0:
        raise MeasureError("support points must have dimension >= 1")
    if not np.all(np.isfinite(pts)):
        raise MeasureError("support points must be finite")
    if weights is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        w = np.array(weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise MeasureError(f"{w.shape[0]} weights for {pts.shape[0]} points")
        if not np.all(np.isfinite(w)):
            raise MeasureError("weights must be finite")
        if np.any(w < 0):
            raise MeasureError("negative weight")
        total = w.sum()
        if total <= 0:
            raise MeasureError("weights sum to zero")
        w = w / total
    pts.setflags(write=False)
    w.setflags(write=False)
    return DiscreteMeasure(pts, w)


def _check_normalized(m: DiscreteMeasure) -> np.ndarray:
    w = np.asarray(m.weights, dtype=float)
    total = w.sum()
    if abs(total - 1.0) > WEIGHT_TOL:
        raise MeasureError(f"weights sum to {total!r}, not 1")
    return w / total


def _check_order(p: float) -> float:
    p = float(p)
    if not p >= 1.0:
        raise MeasureError(f"Wasserstein order must be >= 1, got {p}")
    return p


def _pow_abs(diff: np.ndarray, p: float) -> np.ndarray:
    a = np.abs(diff)
    if p == 1.0:
        return a
    if p == 2.0:
        return a * a
    return a ** p


def wasserstein_1d(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> float:
    """W_p between two measures on the real line via their quantile functions.

    The cumulative weights of both measures are merged into one breakpoint
    sequence on (0, 1]; on each piece both generalized inverses are constant.
    """
    p = _check_order(p)
    if mu.dim != 1 or nu.dim != 1:
        raise MeasureError("wasserstein_1d needs one-dimensional measures")
    wa = _check_normalized(mu)
    wb = _check_normalized(nu)
    xa = mu.support[:, 0]
    xb = nu.support[:, 0]
    oa = np.argsort(xa, kind="stable")
    ob = np.argsort(xb, kind="stable")
    xa, wa = xa[oa], wa[oa]
    xb, wb = xb[ob], wb[ob]
    ca = np.cumsum(wa)
    cb = np.cumsum(wb)
    ca[-1] = 1.0
    cb[-1] = 1.0
    breaks = np.union1d(ca, cb)
    breaks = breaks[breaks > 0.0]
    lengths = np.diff(breaks, prepend=0.0)
    # F^{-1}(u) = first support point whose cumulative weight reaches u
    ia = np.minimum(np.searchsorted(ca, breaks, side="left"), len(xa) - 1)
    ib = np.minimum(np.searchsorted(cb, breaks, side="left"), len(xb) - 1)
    total = float(np.sum(lengths * _pow_abs(xa[ia] - xb[ib], p)))
    if total <= 0.0:
        return 0.0
    return total if p == 1.0 else total ** (1.0 / p)


def cost_matrix(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return _pow_abs(dist, p)


@dataclass(frozen=True)
class TransportPlan:
    """Sparse optimal coupling: ``pairs`` rows are (i, j, mass)."""

    pairs: list
    cost: float

    def dense(self, m: int, n: int) -> np.ndarray:
        g = np.zeros((m, n))
        for i, j, mass in self.pairs:
            g[i, j] += mass
        return g


def _emd():
    # POT probes every installed tensor backend on import; only numpy is used here
    for key in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{key}", "1")
    import ot

    return ot.emd


def wasserstein_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float):
    """Exact W_p by network simplex on the dense cost matrix.

    Returns ``(distance, TransportPlan)``; ``TransportPlan.cost`` is the
    optimal transport cost, i.e. distance ** p.
    """
    p = _check_order(p)
    if mu.dim != nu.dim:
        raise MeasureError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    a = _check_normalized(mu)
    b = _check_normalized(nu)
    b = b * (a.sum() / b.sum())
    M = np.ascontiguousarray(cost_matrix(mu.support, nu.support, p))
    plan, log = _emd()(a, b, M, numItermax=max(100000, 50 * M.size), log=True)
    if log.get("warning"):
        raise RuntimeError(f"transport solver failed: {log['warning']}")
    cost = float(np.sum(plan * M))
    cost = max(cost, 0.0)
    ii, jj = np.nonzero(plan)
    pairs = [(int(i), int(j), float(plan[i, j])) for i, j in zip(ii, jj)]
    dist = cost if p == 1.0 else cost ** (1.0 / p)
    return dist, TransportPlan(pairs, cost)


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> float:
    """Closed form on the line, exact solver otherwise."""
    if mu.dim == 1 and nu.dim == 1:
        return wasserstein_1d(mu, nu, p)
    return wasserstein_exact(mu, nu, p)[0]


def sinkhorn(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float, epsilon: float,
             max_iters: int = 10000) -> float:
    """Entropic approximation of W_p (log-domain Sinkhorn scaling).

    Returns ``<gamma_eps, C> ** (1/p)`` for the entropic plan ``gamma_eps``.
    That transport cost is never below the exact optimum and converges to it
    as ``epsilon`` shrinks. ``epsilon`` is absolute, in the units of C.
    """
    p = _check_order(p)
    if not epsilon > 0:
        raise MeasureError("epsilon must be positive")
    if mu.dim != nu.dim:
        raise MeasureError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    a = _check_normalized(mu)
    b = _check_normalized(nu)
    C = cost_matrix(mu.support, nu.support, p)
    if not np.all(np.isfinite(C)):
        raise MeasureError("cost matrix has non-finite entries")
    # zero-weight atoms would put -inf into the log-domain updates
    ka = a > 0
    kb = b > 0
    a, b, C = a[ka], b[kb], C[np.ix_(ka, kb)]
    log_a = np.log(a)
    log_b = np.log(b)
    f = np.zeros_like(a)
    g = np.zeros_like(b)
    for _ in range(int(max_iters)):
        f = epsilon * (log_a - logsumexp((g[None, :] - C) / epsilon, axis=1))
        g = epsilon * (log_b - logsumexp((f[:, None] - C) / epsilon, axis=0))
        # after the g-update column marginals are exact; check the rows
        log_plan = (f[:, None] + g[None, :] - C) / epsilon
        err = np.abs(np.exp(logsumexp(log_plan, axis=1)) - a).sum()
        if err < 1e-9:
            break
    plan = np.exp((f[:, None] + g[None, :] - C) / epsilon)
    cost = max(float(np.sum(plan * C)), 0.0)
    return cost if p == 1.0 else cost ** (1.0 / p)
