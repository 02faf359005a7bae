"""Splitting criteria on explicit multisets of responses.

These are the readable reference forms. Tree growing uses the compiled scans
in ``_kernels``, which must agree with them.
"""
from __future__ import annotations

import numpy as np

from ..measure import make_measure, wasserstein, wasserstein_1d
from . import _kernels


class SplitError(ValueError):
    pass


def _as_rows(y) -> np.ndarray:
    a = np.asarray(y, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    return a


def _check_partition(cell, left, right):
    cell, left, right = _as_rows(cell), _as_rows(left), _as_rows(right)
    if len(left) == 0 or len(right) == 0:
        raise SplitError("empty child")
    if not (cell.shape[1] == left.shape[1] == right.shape[1]):
        raise SplitError("children and cell differ in response dimension")
    joined = np.vstack([left, right])
    if joined.shape != cell.shape or not np.array_equal(
        joined[np.lexsort(joined.T[::-1])], cell[np.lexsort(cell.T[::-1])]
    ):
        raise SplitError("children do not partition the cell")
    return cell, left, right


def intra_gain(cell_y, left_y, right_y) -> float:
    """Variance reduction summed over output coordinates.

    Per coordinate: total within-cell sum of squares minus the children's,
    all divided by the cell size.
    """
    cell, left, right = _check_partition(cell_y, left_y, right_y)
    n = len(cell)

    def ss(a):
        return np.sum((a - a.mean(axis=0)) ** 2, axis=0) / n

    return float(np.sum(ss(cell) - ss(left) - ss(right)))


def intra_gain_between(cell_y, left_y, right_y) -> float:
    """Same gain written as the between-children variance."""
    cell, left, right = _check_partition(cell_y, left_y, right_y)
    n = len(cell)
    m = cell.mean(axis=0)
    g = len(left) / n * (left.mean(axis=0) - m) ** 2
    g += len(right) / n * (right.mean(axis=0) - m) ** 2
    return float(np.sum(g))


def intra_gain_transport(cell_y, left_y, right_y) -> float:
    """Same gain through squared W_2 distances from each Dirac to its cell measure."""
    cell, left, right = _check_partition(cell_y, left_y, right_y)
    n = len(cell)

    def term(group):
        pi = make_measure(group)
        return sum(wasserstein(make_measure([y]), pi, 2.0) ** 2 for y in group)

    return float((term(cell) - term(left) - term(right)) / (2 * n))


def inter_gain(cell_y, left_y, right_y, p: float) -> float:
    """(N_L/N) W_p^p(left, cell) + (N_R/N) W_p^p(right, cell) for scalar responses."""
    cell, left, right = _check_partition(cell_y, left_y, right_y)
    if cell.shape[1] != 1:
        raise SplitError("the inter-class criterion supports univariate responses only")
    if not float(p) >= 1.0:
        raise SplitError(f"p must be >= 1, got {p}")
    n = len(cell)
    pi = make_measure(cell)
    out = 0.0
    for child in (left, right):
        out += len(child) / n * wasserstein_1d(make_measure(child), pi, p) ** p
    return float(out)


def best_split(rows, x: np.ndarray, y: np.ndarray, try_dims, criterion: str = "intra_l2",
               p: float = 2.0):
    """Best midpoint cut of the cell holding data rows ``rows`` (repeats allowed).

    Scans the dimensions in ``try_dims`` in ascending order. Returns
    ``(dim, threshold, gain)`` or ``None`` when no tried dimension separates
    the cell. Ties keep the lowest dimension, then the smallest threshold.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if len(rows) < 2:
        return None
    ys = np.ascontiguousarray(y[rows], dtype=float)
    if criterion == "inter_wp":
        yo = np.argsort(ys[:, 0], kind="mergesort")
        v = ys[yo, 0].copy()
        rank = np.empty(len(rows), dtype=np.int64)
        rank[yo] = np.arange(len(rows))
    best = None
    for k in sorted(int(k) for k in try_dims):
        xcol = x[rows, k]
        xo = np.argsort(xcol, kind="mergesort")
        xs = np.ascontiguousarray(xcol[xo])
        if criterion == "intra_l2":
            g, pos = _kernels.intra_scan(np.ascontiguousarray(ys[xo]), xs)
        elif criterion == "inter_wp":
            g, pos = _kernels.inter_scan(v, rank, xo.astype(np.int64), xs, float(p))
        else:
            raise SplitError(f"unknown criterion {criterion!r}")
        if pos >= 0 and (best is None or g > best[2]):
            best = (k, float(_kernels.midpoint(xs[pos], xs[pos + 1])), float(g))
    return best
