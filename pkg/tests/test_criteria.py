import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from wrforest.forest import (SplitError, best_split, inter_gain, intra_gain, intra_gain_between,
                             intra_gain_transport)
from wrforest.forest import _kernels


def lp_wpp(a, b, p):
    """W_p^p between uniform empirical measures, by linear programming over couplings."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    m, n = len(a), len(b)
    C = np.abs(a[:, None] - b[None, :]) ** p
    A = np.vstack([np.kron(np.eye(m), np.ones(n)), np.kron(np.ones(m), np.eye(n))])
    rhs = np.concatenate([np.full(m, 1 / m), np.full(n, 1 / n)])
    return linprog(C.ravel(), A_eq=A, b_eq=rhs, bounds=(0, None), method="highs").fun


def brute_inter(cell, left, right, p):
    n = len(cell)
    return len(left) / n * lp_wpp(left, cell, p) + len(right) / n * lp_wpp(right, cell, p)


def all_splits(n):
    for k in range(1, n):
        for left in itertools.combinations(range(n), k):
            yield list(left), [i for i in range(n) if i not in left]


class TestIntra:
    def test_two_clusters(self):
        assert intra_gain([0, 0, 2, 2], [0, 0], [2, 2]) == pytest.approx(1.0, abs=1e-15)

    def test_constant_cell(self):
        for left, right in all_splits(4):
            assert intra_gain([3.0] * 4, [3.0] * len(left), [3.0] * len(right)) == 0.0

    def test_three_forms_agree(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            dy = int(rng.integers(1, 3))
            cell = rng.normal(size=(n, dy)) * rng.uniform(0.1, 5)
            for li, ri in all_splits(n):
                a = intra_gain(cell, cell[li], cell[ri])
                b = intra_gain_between(cell, cell[li], cell[ri])
                c = intra_gain_transport(cell, cell[li], cell[ri])
                # the sum-of-squares form cancels; measure error against the cell's spread
                scale = max(abs(a), np.sum((cell - cell.mean(axis=0)) ** 2) / n)
                assert abs(a - b) <= 1e-10 * scale + 1e-15
                assert abs(a - c) <= 1e-10 * scale + 1e-15
                assert a >= -1e-12

    def test_multivariate_sums_coordinates(self):
        cell = np.array([[0, 10], [0, 10], [2, 30], [2, 30]], float)
        assert intra_gain(cell, cell[:2], cell[2:]) == pytest.approx(1.0 + 100.0)

    @pytest.mark.parametrize("cell,left,right", [
        ([0, 1, 2], [0, 1], [1]),
        ([0, 1], [], [0, 1]),
        ([0, 1, 2], [0], [1]),
    ])
    def test_rejects_bad_partition(self, cell, left, right):
        with pytest.raises(SplitError):
            intra_gain(cell, left, right)

    def test_duplicates_are_multiset(self):
        assert intra_gain([1, 1, 3], [1, 1], [3]) == pytest.approx(intra_gain_between([1, 1, 3], [1, 1], [3]))
        with pytest.raises(SplitError):
            intra_gain([1, 1, 3], [1], [3, 3])


class TestInter:
    def test_singletons_p2(self):
        assert inter_gain([0, 2], [0], [2], 2) == pytest.approx(2.0, abs=1e-14)

    def test_singletons_p1(self):
        assert inter_gain([0, 2], [0], [2], 1) == pytest.approx(1.0, abs=1e-14)

    def test_constant(self):
        assert inter_gain([4, 4, 4], [4], [4, 4], 1.5) == 0.0

    def test_matches_coupling_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            cell = np.round(rng.normal(size=n), 2)
            for li, ri in all_splits(n):
                for p in (1.0, 2.0, 3.0):
                    assert inter_gain(cell, cell[li], cell[ri], p) == pytest.approx(
                        brute_inter(cell, cell[li], cell[ri], p), abs=1e-10)

    def test_rejects(self):
        with pytest.raises(SplitError):
            inter_gain([[0, 1], [1, 0]], [[0, 1]], [[1, 0]], 2)
        with pytest.raises(SplitError):
            inter_gain([0, 1], [0], [1], 0.5)

    @pytest.mark.parametrize("p", [1.0, 2.0, 1.5, 3.0])
    def test_kernel_agrees_with_reference(self, p):
        rng = np.random.default_rng(int(p * 10))
        for _ in range(40):
            n = int(rng.integers(2, 25))
            v = np.sort(rng.choice(rng.normal(size=n // 2 + 1), size=n))
            mask = rng.random(n) < 0.5
            if mask.all() or not mask.any():
                mask[0] = not mask[0]
            got = _kernels.inter_masked(v, mask, int(mask.sum()), p)
            ref = inter_gain(v, v[mask], v[~mask], p)
            assert got == pytest.approx(ref, rel=1e-9, abs=1e-12)
            assert got >= -1e-12


class TestBestSplit:
    def test_two_points_midpoint(self):
        x = np.array([[1.0], [3.0]])
        y = np.array([[0.0], [1.0]])
        dim, thr, _ = best_split([0, 1], x, y, [0])
        assert (dim, thr) == (0, 2.0)

    def test_no_cut(self):
        x = np.ones((4, 3))
        y = np.arange(4.0).reshape(-1, 1)
        assert best_split([0, 1, 2, 3], x, y, [0, 1, 2]) is None

    def test_one_dimensional_example(self):
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = np.array([[0.0], [0.0], [2.0], [2.0]])
        dim, thr, gain = best_split([0, 1, 2, 3], x, y, [0])
        assert thr == 2.5
        assert gain == pytest.approx(1.0, abs=1e-14)

    def test_exhaustive(self):
        rng = np.random.default_rng(9)
        for crit, p in (("intra_l2", 2.0), ("inter_wp", 1.0), ("inter_wp", 2.0), ("inter_wp", 1.5)):
            for _ in range(30):
                n, d = int(rng.integers(2, 12)), 3
                x = rng.integers(0, 4, size=(n, d)).astype(float)
                y = rng.normal(size=(n, 1))
                rows = rng.integers(0, n, size=n)
                got = best_split(rows, x, y, range(d), crit, p)
                cands = {}
                for k in range(d):
                    vals = np.unique(x[rows, k])
                    for a, b in zip(vals, vals[1:]):
                        thr = (a + b) / 2
                        lm = x[rows, k] <= thr
                        cy = y[rows]
                        cands[(k, thr)] = (intra_gain(cy, cy[lm], cy[~lm]) if crit == "intra_l2"
                                           else inter_gain(cy, cy[lm], cy[~lm], p))
                if not cands:
                    assert got is None
                    continue
                top = max(cands.values())
                assert got[2] == pytest.approx(top, rel=1e-9, abs=1e-12)
                # exact ties between distinct cuts may be broken by rounding
                assert cands[(got[0], got[1])] >= top - 1e-9 * max(1.0, abs(top))

    def test_ties_keep_lowest_dim(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0]])
        y = np.array([[0.0], [1.0]])
        assert best_split([0, 1], x, y, [1, 0])[0] == 0


def test_midpoint_stays_below_upper_point():
    a = 1.0
    b = np.nextafter(a, 2.0)
    m = _kernels.midpoint(a, b)
    assert a <= m < b
