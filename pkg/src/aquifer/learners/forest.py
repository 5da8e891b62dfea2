"""
Random forest of CART trees with class-weighted Gini splits.

Each tree is grown on its own bootstrap sample, drawn from a seed stream of
its own, so the forest is identical whatever the number of worker threads.
Trees are stored as flat arrays and the forest averages the value of the leaf
each tree sends a row to. A leaf value is the positive fraction of the
training rows in that leaf, counted with the class weights: under
``class_weight="balanced"`` a leaf holding 1 positive and 3 negatives out of a
1:3 training set is worth 0.5, not 0.25. With ``class_weight="none"`` it is
the plain fraction.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigurationError
from ..utils import spawn_seeds
from .model import TrainedModel, class_weights, training_rows

logger = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class RfConfig:
    n_estimators: int = 500
    max_depth: int = 50
    min_samples_leaf: int = 2
    min_samples_split: int = 2
    class_weight: str = "balanced"
    features_per_split: str = "sqrt"
    bootstrap: bool = True
    seed: int = 0
    threshold: float = 0.39

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ConfigurationError(f"n_estimators must be at least 1, got {self.n_estimators}.")
        if self.max_depth < 1:
            raise ConfigurationError(f"max_depth must be at least 1, got {self.max_depth}.")
        if self.min_samples_split < 2:
            raise ConfigurationError(f"min_samples_split must be at least 2, got {self.min_samples_split}.")
        if self.min_samples_leaf < 1:
            raise ConfigurationError(f"min_samples_leaf must be at least 1, got {self.min_samples_leaf}.")
        if self.class_weight not in ("balanced", "none"):
            raise ConfigurationError(f"class_weight must be 'balanced' or 'none', got {self.class_weight!r}.")
        if self.features_per_split not in ("sqrt", "log2", "all") and not str(self.features_per_split).isdigit():
            raise ConfigurationError(
                f"features_per_split must be 'sqrt', 'log2', 'all' or a count, got {self.features_per_split!r}."
            )

    def candidate_count(self, n_features: int) -> int:
        if self.features_per_split == "sqrt":
            count = int(math.sqrt(n_features))
        elif self.features_per_split == "log2":
            count = int(math.log2(n_features)) if n_features > 1 else 1
        elif self.features_per_split == "all":
            count = n_features
        else:
            count = int(self.features_per_split)
        return min(n_features, max(1, count))


@dataclass
class _Tree:
    feature: list
    threshold: list
    left: list
    right: list
    value: list

    def add_leaf(self, value: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        return len(self.value) - 1


def _best_split(X: np.ndarray, y: np.ndarray, w: np.ndarray, node: np.ndarray, cfg: RfConfig,
                n_candidates: int, rng: np.random.Generator):
    """
    Returns ``(feature, threshold, go_left)`` for the split with the largest
    weighted Gini decrease, or ``None`` when no valid split exists.

    Features are visited in random order until ``n_candidates`` non-constant
    ones have been evaluated.
    """
    n = node.shape[0]
    leaf = cfg.min_samples_leaf
    best = None
    best_impurity = math.inf
    evaluated = 0
    w_node, y_node = w[node], y[node]
    for f in rng.permutation(X.shape[1]):
        xs = X[node, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        if xs_sorted[0] == xs_sorted[-1]:
            continue
        evaluated += 1
        ws = w_node[order]
        cum_w = np.cumsum(ws)
        cum_pos = np.cumsum(ws * y_node[order])
        total_w, total_pos = cum_w[-1], cum_pos[-1]
        left_w, left_pos = cum_w[:-1], cum_pos[:-1]

        split_after = np.arange(1, n)
        valid = (xs_sorted[:-1] < xs_sorted[1:]) & (split_after >= leaf) & (n - split_after >= leaf)
        if valid.any():
            right_w = total_w - left_w
            right_pos = total_pos - left_pos
            with np.errstate(invalid="ignore", divide="ignore"):
                p_left = left_pos / left_w
                p_right = right_pos / right_w
            # Weighted child impurity: sum over children of w * 2p(1-p).
            impurity = 2.0 * (left_w * p_left * (1.0 - p_left) + right_w * p_right * (1.0 - p_right))
            impurity = np.where(valid, impurity, math.inf)
            i = int(np.argmin(impurity))
            if impurity[i] < best_impurity:
                best_impurity = impurity[i]
                threshold = (float(xs_sorted[i]) + float(xs_sorted[i + 1])) / 2.0
                best = (int(f), threshold)
        if evaluated >= n_candidates:
            break
    if best is None:
        return None
    feature, threshold = best
    return feature, threshold, X[node, feature].astype(np.float64) <= threshold


def _grow_tree(X: np.ndarray, y: np.ndarray, weights: np.ndarray, cfg: RfConfig,
               seed: np.random.SeedSequence) -> _Tree:
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    sample = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
    w = weights[y]
    n_candidates = cfg.candidate_count(X.shape[1])

    tree = _Tree([], [], [], [], [])
    root = tree.add_leaf(0.0)
    stack = [(root, sample, 0)]
    while stack:
        node_id, node, depth = stack.pop()
        node_w = w[node]
        pos_w = float(node_w[y[node] == 1].sum())
        total_w = float(node_w.sum())
        tree.value[node_id] = pos_w / total_w
        pure = pos_w == 0.0 or pos_w == total_w
        if (pure or depth >= cfg.max_depth or node.shape[0] < cfg.min_samples_split
                or node.shape[0] < 2 * cfg.min_samples_leaf):
            continue
        split = _best_split(X, y, w, node, cfg, n_candidates, rng)
        if split is None:
            continue
        feature, threshold, go_left = split
        left_id = tree.add_leaf(0.0)
        right_id = tree.add_leaf(0.0)
        tree.feature[node_id] = feature
        tree.threshold[node_id] = threshold
        tree.left[node_id] = left_id
        tree.right[node_id] = right_id
        stack.append((right_id, node[~go_left], depth + 1))
        stack.append((left_id, node[go_left], depth + 1))
    return tree


def train_rf(X: np.ndarray, y, cfg: RfConfig, rows=None, threads: int = 1) -> TrainedModel:
    """
    Grows ``cfg.n_estimators`` trees. The training rows are read into memory.
    """
    indices, labels = training_rows(X, y, rows)
    weights = class_weights(labels, cfg.class_weight)
    Xt = np.ascontiguousarray(X[indices], dtype=np.float32)
    seeds = spawn_seeds(cfg.seed, cfg.n_estimators, 2)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        trees = list(pool.map(lambda s: _grow_tree(Xt, labels, weights, cfg, s), seeds))

    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(t.value) for t in trees])
    arrays = {
        "tree_offsets": offsets,
        "feature": np.concatenate([np.asarray(t.feature, dtype=np.int32) for t in trees]),
        "threshold": np.concatenate([np.asarray(t.threshold, dtype=np.float64) for t in trees]),
        "left": np.concatenate([np.asarray(t.left, dtype=np.int32) for t in trees]),
        "right": np.concatenate([np.asarray(t.right, dtype=np.int32) for t in trees]),
        "value": np.concatenate([np.asarray(t.value, dtype=np.float64) for t in trees]),
    }
    logger.info("Forest: %d trees, %d nodes, %d training rows", len(trees), int(offsets[-1]), indices.shape[0])
    return TrainedModel(
        kind="forest",
        config=asdict(cfg),
        feature_dim=X.shape[1],
        default_threshold=cfg.threshold,
        arrays=arrays,
        seed=cfg.seed,
    )


def forest_proba(model: TrainedModel, block: np.ndarray) -> np.ndarray:
    a = model.arrays
    offsets = a["tree_offsets"]
    n = block.shape[0]
    rows = np.arange(n)
    total = np.zeros(n, dtype=np.float64)
    for t in range(offsets.shape[0] - 1):
        lo, hi = int(offsets[t]), int(offsets[t + 1])
        feature, threshold = a["feature"][lo:hi], a["threshold"][lo:hi]
        left, right = a["left"][lo:hi], a["right"][lo:hi]
        node = np.zeros(n, dtype=np.int64)
        while True:
            f = feature[node]
            internal = f >= 0
            if not internal.any():
                break
            at = node[internal]
            go_left = block[rows[internal], f[internal]].astype(np.float64) <= threshold[at]
            node[internal] = np.where(go_left, left[at], right[at])
        total += a["value"][lo:hi][node]
    return total / (offsets.shape[0] - 1)
