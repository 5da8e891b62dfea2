"""
Shared pieces of the three learners: the trained-model value, balanced class
weights, per-column standardization and training-data validation.
"""
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, DegenerateLabelsError, ShapeError
from ..features import FeatureMatrix

KINDS = ("linear", "forest", "mlp")
CHUNK_ROWS = 65536


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    config: dict
    feature_dim: int
    default_threshold: float
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    seed: int = 0
    feature_spec: dict | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown model kind {self.kind!r}.")
        for name, array in self.arrays.items():
            if array.dtype.kind == "f" and not np.isfinite(array).all():
                raise DataError(f"Model parameter '{name}' is not finite.")
            array.setflags(write=False)


def as_array(X) -> np.ndarray:
    return X.data if isinstance(X, FeatureMatrix) else X


def compute_balanced_weights(labels) -> np.ndarray:
    """
    Returns ``[w0, w1]`` with ``w_c = n / (2 * n_c)``.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError(f"Both classes are required, got {n_neg} negatives and {n_pos} positives.")
    return np.array([n / (2.0 * n_neg), n / (2.0 * n_pos)], dtype=np.float64)


def class_weights(labels: np.ndarray, mode: str) -> np.ndarray:
    if mode == "balanced":
        return compute_balanced_weights(labels)
    return np.ones(2, dtype=np.float64)


def training_rows(X: np.ndarray, y, rows) -> tuple[np.ndarray, np.ndarray]:
    """
    Validates a training request and returns ``(row_indices, labels)``.

    ``y`` is aligned with all rows of ``X``; ``rows`` optionally restricts
    training to a subset.
    """
    y = np.asarray(y)
    if X.ndim != 2:
        raise ShapeError(f"Features must be 2-D, got shape {X.shape}.")
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"Got {y.shape[0]} labels for {X.shape[0]} feature rows.")
    indices = np.arange(X.shape[0]) if rows is None else np.sort(np.asarray(rows, dtype=np.int64))
    labels = y[indices]
    if not np.isin(labels, (0, 1)).all():
        raise DataError("Labels must be binary (0 or 1).")
    labels = labels.astype(np.int64)
    compute_balanced_weights(labels)
    for start in range(0, indices.shape[0], CHUNK_ROWS):
        block = X[indices[start:start + CHUNK_ROWS]]
        if not np.isfinite(block).all():
            raise DataError("Training features contain non-finite values.")
    return indices, labels


def fit_standardizer(X: np.ndarray, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and scale over ``X[indices]``, read in chunks."""
    total = np.zeros(X.shape[1], dtype=np.float64)
    for start in range(0, indices.shape[0], CHUNK_ROWS):
        total += X[indices[start:start + CHUNK_ROWS]].astype(np.float64).sum(axis=0)
    mean = total / indices.shape[0]
    squares = np.zeros(X.shape[1], dtype=np.float64)
    for start in range(0, indices.shape[0], CHUNK_ROWS):
        centred = X[indices[start:start + CHUNK_ROWS]].astype(np.float64) - mean
        squares += (centred ** 2).sum(axis=0)
    scale = np.sqrt(squares / indices.shape[0])
    scale[scale == 0] = 1.0
    return mean, scale


def standardize(block: np.ndarray, model_arrays: dict) -> np.ndarray:
    block = block.astype(np.float64)
    if "mean" in model_arrays:
        block = (block - model_arrays["mean"]) / model_arrays["scale"]
    return block


def check_width(model: TrainedModel, X: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[1] != model.feature_dim:
        width = X.shape[1] if X.ndim == 2 else None
        raise ShapeError(f"Model expects {model.feature_dim} features per row, got {width}.")
