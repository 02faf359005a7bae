from .criteria import (SplitError, best_split, inter_gain, intra_gain, intra_gain_between,
                       intra_gain_transport)
from .model import (Dataset, Forest, ForestError, ForestParams, Tree, build_tree, fit,
                    measure_from_weights, predict_mean, predict_measure, weights)

__all__ = [
    "Dataset", "Forest", "ForestError", "ForestParams", "SplitError", "Tree", "best_split",
    "build_tree", "fit", "inter_gain", "intra_gain", "intra_gain_between",
    "intra_gain_transport", "measure_from_weights", "predict_mean", "predict_measure",
    "weights",
]
