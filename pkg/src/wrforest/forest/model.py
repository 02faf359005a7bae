"""Forest training, prediction weights and the model file format."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from ..measure import DiscreteMeasure, make_measure
from ..rng import check_seed, substream
from . import _kernels

MODEL_VERSION = 1
CRITERIA = ("intra_l2", "inter_wp")
KINDS = ("wrf", "ert", "mondrian")
_MODES = {"wrf": _kernels.MODE_WRF, "ert": _kernels.MODE_ERT, "mondrian": _kernels.MODE_MONDRIAN}


class ForestError(ValueError):
    pass


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.ascontiguousarray(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        self.y = np.ascontiguousarray(y)
        if self.x.ndim != 2 or self.y.ndim != 2:
            raise ForestError("x and y must be matrices")
        if self.x.shape[0] != self.y.shape[0]:
            raise ForestError(f"x has {self.x.shape[0]} rows but y has {self.y.shape[0]}")
        if self.x.shape[0] < 2:
            raise ForestError("need at least 2 samples")
        if self.x.shape[1] < 1 or self.y.shape[1] < 1:
            raise ForestError("x and y need at least one column")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ForestError("non-finite entries in dataset")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def dy(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class ForestParams:
    m_trees: int = 200
    subsample_size: int = 500
    with_replacement: bool = True
    mtry: int = 50
    nodesize: int = 2
    criterion: str = "intra_l2"
    p: float = 2.0
    seed: int = 0
    kind: str = "wrf"
    standardize: bool = False

    def validate(self, n: int, d: int, dy: int = 1) -> None:
        if self.m_trees < 1:
            raise ForestError("m_trees must be >= 1")
        if not 2 <= self.subsample_size:
            raise ForestError("subsample_size must be >= 2")
        if not self.with_replacement and self.subsample_size > n:
            raise ForestError(
                f"subsample_size {self.subsample_size} exceeds n={n} without replacement")
        if not 1 <= self.mtry <= d:
            raise ForestError(f"mtry must lie in [1, {d}], got {self.mtry}")
        if not 2 <= self.nodesize <= self.subsample_size:
            raise ForestError("nodesize must lie in [2, subsample_size]")
        if self.criterion not in CRITERIA:
            raise ForestError(f"criterion must be one of {CRITERIA}")
        if self.kind not in KINDS:
            raise ForestError(f"kind must be one of {KINDS}")
        if not float(self.p) >= 1.0:
            raise ForestError("p must be >= 1")
        if self.criterion == "inter_wp" and dy != 1:
            raise ForestError("inter_wp supports univariate responses only")
        check_seed(self.seed)

    def replace(self, **changes) -> "ForestParams":
        return ForestParams(**{**asdict(self), **changes})


@dataclass
class Tree:
    """Flat binary tree. Node 0 is the root; ``left[i] < 0`` marks a leaf.

    Leaf ``i`` holds slots ``order[leaf_start[i]:leaf_start[i] + leaf_len[i]]``;
    a slot ``s`` is the training row ``subsample[s]``.
    """

    dim: np.ndarray
    thr: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_start: np.ndarray
    leaf_len: np.ndarray
    order: np.ndarray
    subsample: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.dim)

    def leaves(self):
        return [i for i in range(self.n_nodes) if self.left[i] < 0]

    def leaf_slots(self, node: int) -> np.ndarray:
        s = self.leaf_start[node]
        return self.order[s:s + self.leaf_len[node]]

    def apply(self, x) -> int:
        x = np.asarray(x, dtype=float)
        return int(_kernels.route(self.dim, self.thr, self.left, self.right, x))

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.left[i] < 0:
                nodes.append({"leaf": self.leaf_slots(i).tolist()})
            else:
                nodes.append({"dim": int(self.dim[i]), "thr": float(self.thr[i]),
                              "l": int(self.left[i]), "r": int(self.right[i])})
        return {"subsample": self.subsample.tolist(), "nodes": nodes}

    @classmethod
    def from_nodes(cls, nodes: list, subsample) -> "Tree":
        k = len(nodes)
        dim = np.full(k, -1, dtype=np.int64)
        thr = np.zeros(k)
        left = np.full(k, -1, dtype=np.int64)
        right = np.full(k, -1, dtype=np.int64)
        leaf_start = np.full(k, -1, dtype=np.int64)
        leaf_len = np.zeros(k, dtype=np.int64)
        order = []
        for i, node in enumerate(nodes):
            if "leaf" in node:
                slots = [int(s) for s in node["leaf"]]
                if not slots:
                    raise ForestError(f"empty leaf at node {i}")
                leaf_start[i] = len(order)
                leaf_len[i] = len(slots)
                order.extend(slots)
            else:
                dim[i] = int(node["dim"])
                thr[i] = float(node["thr"])
                left[i] = int(node["l"])
                right[i] = int(node["r"])
        sub = np.asarray(subsample, dtype=np.int64)
        if sorted(order) != list(range(len(sub))):
            raise ForestError("leaves do not partition the subsample slots")
        return cls(dim, thr, left, right, leaf_start, leaf_len,
                   np.asarray(order, dtype=np.int64), sub)


def _canonical(dim, thr, left, right, leaf_start, leaf_len, order, subsample) -> Tree:
    # leaves re-packed in node order so a tree loaded from disk is identical
    nodes = []
    for i in range(len(dim)):
        if left[i] < 0:
            s = leaf_start[i]
            nodes.append({"leaf": order[s:s + leaf_len[i]]})
        else:
            nodes.append({"dim": dim[i], "thr": thr[i], "l": left[i], "r": right[i]})
    return Tree.from_nodes(nodes, subsample)


def draw_subsample(n: int, params: ForestParams, rng: np.random.Generator) -> np.ndarray:
    if params.with_replacement:
        return rng.integers(0, n, size=params.subsample_size).astype(np.int64)
    if params.subsample_size > n:
        raise ForestError(f"subsample_size {params.subsample_size} exceeds n={n}")
    return rng.permutation(n)[: params.subsample_size].astype(np.int64)


def build_tree(x: np.ndarray, y: np.ndarray, params: ForestParams,
               rng: np.random.Generator) -> Tree:
    """Draw a subsample and grow one tree from it with the given stream."""
    sub = draw_subsample(x.shape[0], params, rng)
    out = _kernels.grow_tree(x, y, sub, int(params.nodesize), int(params.mtry),
                             _MODES[params.kind],
                             _kernels.CRIT_INTRA if params.criterion == "intra_l2"
                             else _kernels.CRIT_INTER,
                             float(params.p), rng)
    return _canonical(*out, sub)


def default_threads() -> int:
    env = os.environ.get("WRF_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class Forest:
    params: ForestParams
    trees: List[Tree]
    y: np.ndarray
    d: int
    scale: Optional[np.ndarray] = None
    _packed: tuple = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def _pack(self):
        if self._packed is None:
            sizes = [t.n_nodes for t in self.trees]
            node_off = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
            cat = lambda attr: np.concatenate([getattr(t, attr) for t in self.trees])
            sub_off = np.concatenate(
                [[0], np.cumsum([len(t.subsample) for t in self.trees])]).astype(np.int64)
            self._packed = (node_off, cat("dim"), cat("thr"), cat("left"), cat("right"),
                            cat("leaf_start"), cat("leaf_len"), cat("order"), sub_off,
                            cat("subsample"))
        return self._packed

    def _query(self, x) -> np.ndarray:
        x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1))
        if x.shape[0] != self.d:
            raise ForestError(f"query has dimension {x.shape[0]}, forest expects {self.d}")
        return x

    def raw_weights(self, x, tree_mask: Optional[np.ndarray] = None):
        """Unnormalized weights summed over the selected trees, and their count."""
        x = self._query(x)
        if tree_mask is None:
            tree_mask = np.ones(len(self.trees), dtype=np.bool_)
        alpha = _kernels.forest_weights(*self._pack(), tree_mask, self.n, x)
        return alpha, int(np.count_nonzero(tree_mask))

    def in_bag(self) -> np.ndarray:
        """Boolean (m_trees, n): row i drawn into tree j's subsample."""
        out = np.zeros((len(self.trees), self.n), dtype=bool)
        for j, t in enumerate(self.trees):
            out[j, t.subsample] = True
        return out

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "params": asdict(self.params),
            "d": self.d,
            "normalization": None if self.scale is None else self.scale.tolist(),
            "trees": [t.to_dict() for t in self.trees],
            "y": self.y.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "Forest":
        if obj.get("version") != MODEL_VERSION:
            raise ForestError(f"unsupported model version {obj.get('version')!r}")
        params = ForestParams(**obj["params"])
        trees = [Tree.from_nodes(t["nodes"], t["subsample"]) for t in obj["trees"]]
        y = np.asarray(obj["y"], dtype=float)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        scale = obj.get("normalization")
        f = cls(params, trees, y, int(obj["d"]),
                None if scale is None else np.asarray(scale, dtype=float))
        for t in trees:
            if len(t.subsample) and (t.subsample.min() < 0 or t.subsample.max() >= f.n):
                raise ForestError("subsample index out of range")
        return f

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))


def fit(x, y, params: ForestParams, threads: Optional[int] = None) -> Forest:
    """Train ``params.m_trees`` trees; tree j consumes ``substream(seed, j)``.

    Results do not depend on ``threads``.
    """
    data = Dataset(x, y)
    params.validate(data.n, data.d, data.dy)
    y_fit = data.y
    scale = None
    if params.standardize:
        scale = data.y.std(axis=0)
        scale[scale == 0] = 1.0
        y_fit = np.ascontiguousarray(data.y / scale)

    def one(j):
        return build_tree(data.x, y_fit, params, substream(params.seed, j))

    threads = threads or default_threads()
    if threads > 1 and params.m_trees > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(one, range(params.m_trees)))
    else:
        trees = [one(j) for j in range(params.m_trees)]
    return Forest(params, trees, data.y.copy(), data.d, scale)


def weights(forest: Forest, x) -> np.ndarray:
    """alpha_i(x): each tree gives its leaf's slots mass 1/(M * leaf size)."""
    alpha, m = forest.raw_weights(x)
    return alpha / m


def measure_from_weights(alpha: np.ndarray, y: np.ndarray) -> DiscreteMeasure:
    idx = np.flatnonzero(alpha > 0)
    return make_measure(y[idx], alpha[idx])


def predict_measure(forest: Forest, x) -> DiscreteMeasure:
    return measure_from_weights(weights(forest, x), forest.y)


def predict_mean(forest: Forest, x) -> np.ndarray:
    return weights(forest, x) @ forest.y
