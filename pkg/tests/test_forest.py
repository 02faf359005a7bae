import numpy as np
import pytest

from wrforest.forest import (Forest, ForestError, ForestParams, Tree, best_split, build_tree, fit,
                             intra_gain, predict_mean, predict_measure, weights)
from wrforest.rng import substream


def toy_forest():
    """Two hand-built trees on 8 rows with x_i = i.

    At x = 4.5 tree 1's leaf holds rows {3, 4} and tree 2's holds {4, 6},
    i.e. Y4, Y5, Y7 in one-based numbering.
    """
    x = np.arange(8.0).reshape(-1, 1)
    y = np.array([9.0, 9.0, 9.0, 0.0, 2.0, 9.0, 4.0, 9.0]).reshape(-1, 1)
    t1 = Tree.from_nodes([{"dim": 0, "thr": 2.0, "l": 1, "r": 2},
                          {"leaf": [2, 3]}, {"leaf": [0, 1]}], [3, 4, 0, 1])
    t2 = Tree.from_nodes([{"dim": 0, "thr": 3.0, "l": 1, "r": 2},
                          {"leaf": [3]},
                          {"dim": 0, "thr": 6.5, "l": 3, "r": 4},
                          {"leaf": [0, 1]}, {"leaf": [2]}], [4, 6, 7, 2])
    params = ForestParams(m_trees=2, subsample_size=4, mtry=1)
    return Forest(params, [t1, t2], y, 1), x


def random_data(n=120, d=5, dy=1, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.random((n, d))
    y = (x[:, :1] * 3 + rng.normal(size=(n, 1))) if dy == 1 else rng.normal(size=(n, dy)) + x[:, :dy]
    return x, y


def subtree_slots(tree, node):
    if tree.left[node] < 0:
        return list(tree.leaf_slots(node))
    return subtree_slots(tree, tree.left[node]) + subtree_slots(tree, tree.right[node])


class TestToyForest:
    def test_weights(self):
        f, _ = toy_forest()
        alpha = weights(f, [4.5])
        expected = np.zeros(8)
        expected[[3, 4, 6]] = [0.25, 0.5, 0.25]
        assert alpha.tolist() == expected.tolist()

    def test_measure_and_mean(self):
        f, _ = toy_forest()
        m = predict_measure(f, [4.5])
        assert sorted(zip(m.support[:, 0].tolist(), m.weights.tolist())) == [
            (0.0, 0.25), (2.0, 0.5), (4.0, 0.25)]
        assert predict_mean(f, [4.5]).tolist() == [2.0]

    def test_dimension_mismatch(self):
        f, _ = toy_forest()
        with pytest.raises(ForestError):
            weights(f, [1.0, 2.0])

    def test_routing_le_goes_left(self):
        f, _ = toy_forest()
        assert f.trees[0].apply([2.0]) == 1
        assert f.trees[0].apply([np.nextafter(2.0, 3.0)]) == 2

    def test_bad_leaves(self):
        with pytest.raises(ForestError):
            Tree.from_nodes([{"leaf": [0]}], [5, 6])
        with pytest.raises(ForestError):
            Tree.from_nodes([{"dim": 0, "thr": 0.0, "l": 1, "r": 2}, {"leaf": []},
                             {"leaf": [0]}], [1])


class TestBuild:
    def test_single_leaf_uniform_weights(self):
        x, y = random_data(n=30)
        x[:] = 0.5
        f = fit(x, y, ForestParams(m_trees=1, subsample_size=30, with_replacement=False, mtry=5,
                                   nodesize=2), threads=1)
        assert f.trees[0].n_nodes == 1
        assert np.allclose(weights(f, np.zeros(5)), 1 / 30, rtol=0, atol=1e-15)

    def test_nodesize_equal_subsample_splits_root_once(self):
        # a cell stops splitting only when it holds fewer than nodesize slots
        x, y = random_data(n=40)
        tree = build_tree(x, y, ForestParams(m_trees=1, subsample_size=40, mtry=5, nodesize=40),
                          substream(0, 0))
        assert tree.n_nodes == 3
        assert tree.left[1] < 0 and tree.left[2] < 0

    def test_single_dirac(self):
        x = np.array([[0.0], [1.0]])
        y = np.array([[5.0], [7.0]])
        tree = Tree.from_nodes([{"leaf": [0]}], [0])
        f = Forest(ForestParams(m_trees=1, subsample_size=2, mtry=1), [tree], y, 1)
        m = predict_measure(f, [0.3])
        assert m.support.tolist() == [[5.0]] and m.weights.tolist() == [1.0]

    def test_leaf_and_partition_properties(self):
        x, y = random_data(n=150, d=4)
        rng = np.random.default_rng(1)
        for nodesize in (2, 7):
            params = ForestParams(m_trees=5, subsample_size=100, mtry=2, nodesize=nodesize, seed=3)
            f = fit(x, y, params, threads=1)
            for tree in f.trees:
                slots = [s for leaf in tree.leaves() for s in tree.leaf_slots(leaf)]
                assert sorted(slots) == list(range(100))
                for node in range(tree.n_nodes):
                    if tree.left[node] >= 0:
                        assert len(subtree_slots(tree, node)) >= nodesize
                for s in range(100):
                    leaf = tree.apply(x[tree.subsample[s]])
                    assert s in tree.leaf_slots(leaf)
                for q in rng.random((50, 4)) * 3 - 1:
                    assert tree.left[tree.apply(q)] < 0

    @pytest.mark.parametrize("criterion,p", [("intra_l2", 2.0), ("inter_wp", 1.0),
                                             ("inter_wp", 2.0), ("inter_wp", 1.5)])
    def test_greedy_optimality(self, criterion, p):
        x, y = random_data(n=60, d=3, seed=2)
        x = np.round(x, 1)  # force repeated covariate values
        params = ForestParams(m_trees=2, subsample_size=60, mtry=3, nodesize=2,
                              criterion=criterion, p=p, seed=5)
        f = fit(x, y, params, threads=1)
        for tree in f.trees:
            for node in range(tree.n_nodes):
                if tree.left[node] < 0:
                    continue
                rows = tree.subsample[subtree_slots(tree, node)]
                best = best_split(rows, x, y, range(3), criterion, p)
                left = tree.subsample[subtree_slots(tree, tree.left[node])]
                right = tree.subsample[subtree_slots(tree, tree.right[node])]
                assert np.all(x[left, tree.dim[node]] <= tree.thr[node])
                assert np.all(x[right, tree.dim[node]] > tree.thr[node])
                assert (tree.dim[node], tree.thr[node]) == best[:2]

    def test_intra_tree_gain_matches_reference(self):
        x, y = random_data(n=50, d=2, dy=2, seed=4)
        tree = build_tree(x, y, ForestParams(m_trees=1, subsample_size=50, mtry=2), substream(1, 0))
        rows = tree.subsample[subtree_slots(tree, 0)]
        _, _, gain = best_split(rows, x, y, [0, 1])
        left = tree.subsample[subtree_slots(tree, tree.left[0])]
        right = tree.subsample[subtree_slots(tree, tree.right[0])]
        assert gain == pytest.approx(intra_gain(y[rows], y[left], y[right]), rel=1e-9)

    @pytest.mark.parametrize("kw", [
        dict(subsample_size=500, with_replacement=False),
        dict(mtry=0), dict(mtry=9), dict(nodesize=1), dict(m_trees=0),
        dict(criterion="gini"), dict(p=0.5), dict(kind="cart"), dict(seed=-1),
    ])
    def test_invalid_params(self, kw):
        x, y = random_data(n=50)
        base = dict(m_trees=2, subsample_size=20, mtry=2)
        with pytest.raises((ForestError, ValueError)):
            fit(x, y, ForestParams(**{**base, **kw}), threads=1)

    def test_inter_rejects_multivariate(self):
        x, y = random_data(n=50, dy=2)
        with pytest.raises(ForestError):
            fit(x, y, ForestParams(m_trees=1, subsample_size=20, mtry=2, criterion="inter_wp"))


class TestForest:
    def test_determinism_and_seed_sensitivity(self):
        x, y = random_data()
        params = ForestParams(m_trees=8, subsample_size=80, mtry=3, seed=11)
        a = fit(x, y, params, threads=1).to_json()
        assert a == fit(x, y, params, threads=1).to_json()
        assert a != fit(x, y, params.replace(seed=12), threads=1).to_json()

    @pytest.mark.parametrize("kind", ["wrf", "ert", "mondrian"])
    def test_threads_do_not_change_result(self, kind):
        x, y = random_data()
        params = ForestParams(m_trees=12, subsample_size=80, mtry=3, seed=2, kind=kind)
        assert fit(x, y, params, threads=1).to_json() == fit(x, y, params, threads=4).to_json()

    def test_cardinality(self):
        x, y = random_data()
        assert len(fit(x, y, ForestParams(m_trees=1, subsample_size=10, mtry=1)).trees) == 1

    def test_weights_normalized_and_supported(self):
        x, y = random_data(n=200)
        f = fit(x, y, ForestParams(m_trees=20, subsample_size=50, mtry=3, seed=1), threads=1)
        drawn = np.zeros(200, dtype=bool)
        for t in f.trees:
            drawn[t.subsample] = True
        rng = np.random.default_rng(0)
        for q in rng.random((1000, 5)):
            alpha = weights(f, q)
            assert abs(alpha.sum() - 1) <= 1e-9
            assert np.all(alpha >= 0)
            assert not np.any(alpha[~drawn] > 0)

    def test_duplicate_slots_add_mass(self):
        y = np.array([[1.0], [2.0]])
        tree = Tree.from_nodes([{"leaf": [0, 1, 2]}], [0, 0, 1])
        f = Forest(ForestParams(m_trees=1, subsample_size=3, mtry=1), [tree], y, 1)
        assert weights(f, [0.0]).tolist() == pytest.approx([2 / 3, 1 / 3], abs=1e-15)

    def test_mean_matches_measure(self):
        x, y = random_data(n=100, dy=2)
        f = fit(x, y, ForestParams(m_trees=10, subsample_size=60, mtry=2), threads=1)
        for q in np.random.default_rng(1).random((20, 5)):
            m = predict_measure(f, q)
            assert m.support.shape[1] == 2
            assert abs(m.weights.sum() - 1) <= 1e-12
            assert np.allclose(m.mean(), predict_mean(f, q), rtol=0, atol=1e-12)

    def test_constant_response(self):
        x, _ = random_data()
        y = np.full((120, 1), 3.25)
        f = fit(x, y, ForestParams(m_trees=5, subsample_size=60, mtry=2), threads=1)
        assert predict_mean(f, np.full(5, 0.3)).tolist() == [3.25]

    def test_round_trip_bit_identical(self):
        x, y = random_data(n=100, dy=2)
        f = fit(x, y, ForestParams(m_trees=6, subsample_size=70, mtry=3, standardize=True),
                threads=1)
        g = Forest.from_json(f.to_json())
        assert g.to_json() == f.to_json()
        assert g.scale.tolist() == f.scale.tolist()
        for q in np.random.default_rng(2).random((50, 5)):
            assert np.array_equal(weights(f, q), weights(g, q))

    def test_model_file_layout(self):
        x, y = random_data(n=30)
        obj = fit(x, y, ForestParams(m_trees=2, subsample_size=20, mtry=2)).to_dict()
        assert obj["version"] == 1
        assert obj["normalization"] is None
        assert set(obj["trees"][0]) == {"subsample", "nodes"}
        assert "leaf" in obj["trees"][0]["nodes"][-1] or "dim" in obj["trees"][0]["nodes"][-1]
        assert len(obj["y"]) == 30

    def test_rejects_bad_model(self):
        x, y = random_data(n=30)
        obj = fit(x, y, ForestParams(m_trees=1, subsample_size=20, mtry=2)).to_dict()
        with pytest.raises(ForestError):
            Forest.from_dict({**obj, "version": 2})
        obj["trees"][0]["subsample"][0] = 99
        with pytest.raises(ForestError):
            Forest.from_dict(obj)
