"""
Linear classifier trained by per-sample stochastic gradient descent.

Minimizes the class-weighted loss plus ``(l2_alpha / 2) * ||w||^2`` with the
step size ``eta_t = eta0 / t ** power_t``. The L2 term is applied as an
implicit shrink ``w / (1 + eta * alpha)``, which stays stable for any alpha.
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from ..errors import ConfigurationError, TrainingDivergedError
from ..utils import make_rng
from .model import CHUNK_ROWS, TrainedModel, class_weights, fit_standardizer, standardize, training_rows

logger = logging.getLogger(__name__)

LOSSES = ("logistic", "modified_huber")


@dataclass(frozen=True)
class SgdConfig:
    loss: str = "logistic"
    l2_alpha: float = 1e-3
    class_weight: str = "balanced"
    epochs: int = 5
    eta0: float = 0.01
    power_t: float = 0.5
    seed: int = 0
    threshold: float = 0.62

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigurationError(f"SGD loss must be one of {LOSSES}, got {self.loss!r}.")
        if self.l2_alpha < 0:
            raise ConfigurationError(f"l2_alpha must be non-negative, got {self.l2_alpha}.")
        if self.class_weight not in ("balanced", "none"):
            raise ConfigurationError(f"class_weight must be 'balanced' or 'none', got {self.class_weight!r}.")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be at least 1, got {self.epochs}.")
        if not self.eta0 > 0:
            raise ConfigurationError(f"eta0 must be positive, got {self.eta0}.")


def loss_derivative(loss: str, score: float, sign: float) -> float:
    """d loss / d score for a label ``sign`` in {-1, +1}."""
    if loss == "logistic":
        return -sign * float(expit(-sign * score))
    margin = sign * score
    if margin >= 1.0:
        return 0.0
    if margin >= -1.0:
        return -2.0 * (1.0 - margin) * sign
    return -4.0 * sign


def train_sgd(X: np.ndarray, y, cfg: SgdConfig, rows=None) -> TrainedModel:
    indices, labels = training_rows(X, y, rows)
    weights = class_weights(labels, cfg.class_weight)
    mean, scale = fit_standardizer(X, indices)
    arrays = {"mean": mean, "scale": scale}
    rng = make_rng(cfg.seed, 1)

    w = np.zeros(X.shape[1], dtype=np.float64)
    b = 0.0
    t = 0
    signs = np.where(labels == 1, 1.0, -1.0)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(indices.shape[0])
        for start in range(0, order.shape[0], CHUNK_ROWS):
            chunk = order[start:start + CHUNK_ROWS]
            block = standardize(X[indices[chunk]], arrays)
            for x, position in zip(block, chunk):
                t += 1
                eta = cfg.eta0 / t ** cfg.power_t
                g = loss_derivative(cfg.loss, float(x @ w) + b, signs[position]) * weights[labels[position]]
                if g != 0.0:
                    w -= (eta * g) * x
                    b -= eta * g
                if cfg.l2_alpha:
                    w /= 1.0 + eta * cfg.l2_alpha
        if not (np.isfinite(w).all() and np.isfinite(b)):
            raise TrainingDivergedError(epoch, float("nan"))
        logger.debug("SGD epoch %d: |w| = %.6g, b = %.6g", epoch, float(np.linalg.norm(w)), b)

    arrays["weights"] = w
    arrays["bias"] = np.array([b])
    logger.info("Trained SGD (%s loss) on %d rows", cfg.loss, indices.shape[0])
    return TrainedModel(
        kind="linear",
        config=asdict(cfg),
        feature_dim=X.shape[1],
        default_threshold=cfg.threshold,
        arrays=arrays,
        seed=cfg.seed,
    )


def linear_proba(model: TrainedModel, block: np.ndarray) -> np.ndarray:
    scores = standardize(block, model.arrays) @ model.arrays["weights"] + model.arrays["bias"][0]
    if model.config["loss"] == "modified_huber":
        return (np.clip(scores, -1.0, 1.0) + 1.0) / 2.0
    return expit(scores)
