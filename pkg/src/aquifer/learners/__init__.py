"""
Probability-emitting classifiers: linear SGD, random forest and MLP.

The config defaults are the tuned hyperparameter sets (with their decision
thresholds); ``PRESETS`` exposes them by learner name.
"""
from dataclasses import replace

import numpy as np

from ..errors import ConfigurationError
from .forest import RfConfig, forest_proba, train_rf
from .mlp import MlpConfig, mlp_proba, train_mlp
from .model import CHUNK_ROWS, TrainedModel, as_array, check_width, compute_balanced_weights
from .persistence import load_model, save_model
from .sgd import SgdConfig, linear_proba, train_sgd

LEARNER_CONFIGS = {"sgd": SgdConfig, "rf": RfConfig, "mlp": MlpConfig}
PRESETS = {name: cls() for name, cls in LEARNER_CONFIGS.items()}

_PROBA = {"linear": linear_proba, "forest": forest_proba, "mlp": mlp_proba}

LearnerConfig = SgdConfig | RfConfig | MlpConfig


def train_model(X, y, cfg: LearnerConfig, rows=None, threads: int = 1,
                feature_spec: dict | None = None) -> TrainedModel:
    """Trains the learner that ``cfg`` configures; ``rows`` restricts training to a subset."""
    X = as_array(X)
    if isinstance(cfg, SgdConfig):
        model = train_sgd(X, y, cfg, rows=rows)
    elif isinstance(cfg, RfConfig):
        model = train_rf(X, y, cfg, rows=rows, threads=threads)
    elif isinstance(cfg, MlpConfig):
        model = train_mlp(X, y, cfg, rows=rows)
    else:
        raise ConfigurationError(f"Unknown learner config {type(cfg).__name__}.")
    if feature_spec is not None:
        model = replace(model, feature_spec=feature_spec)
    return model


def predict_proba(model: TrainedModel, X, rows=None) -> np.ndarray:
    """
    P(positive) per row, in [0, 1]. Rows are scored in chunks so disk-backed
    features are never read all at once.
    """
    X = as_array(X)
    check_width(model, X)
    indices = np.arange(X.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    proba = _PROBA[model.kind]
    out = np.empty(indices.shape[0], dtype=np.float64)
    for start in range(0, indices.shape[0], CHUNK_ROWS):
        block = np.asarray(X[indices[start:start + CHUNK_ROWS]])
        out[start:start + CHUNK_ROWS] = proba(model, block)
    return np.clip(out, 0.0, 1.0)


def with_seed(cfg: LearnerConfig, seed: int) -> LearnerConfig:
    return replace(cfg, seed=seed)


__all__ = [
    "LEARNER_CONFIGS",
    "PRESETS",
    "MlpConfig",
    "RfConfig",
    "SgdConfig",
    "TrainedModel",
    "compute_balanced_weights",
    "load_model",
    "predict_proba",
    "save_model",
    "train_model",
    "with_seed",
]
