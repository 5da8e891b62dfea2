"""
Fully connected network with a sigmoid output, trained by mini-batch Adam on
class-weighted binary cross-entropy. Hidden layers use ReLU by default; tanh
and sigmoid are also available.
"""
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from ..errors import ConfigurationError, TrainingDivergedError
from ..utils import make_rng
from .model import TrainedModel, class_weights, fit_standardizer, standardize, training_rows

logger = logging.getLogger(__name__)

# name -> (f(z), f'(z) written in terms of z and a = f(z))
ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(z.dtype)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "sigmoid": (expit, lambda z, a: a * (1.0 - a)),
}


@dataclass(frozen=True)
class MlpConfig:
    hidden_layer_sizes: tuple[int, ...] = (75, 25, 100, 20, 75, 25)
    max_iter: int = 1000
    activation: str = "relu"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 256
    early_stop_tol: float = 1e-4
    patience: int = 10
    l2_alpha: float = 1e-4
    class_weight: str = "balanced"
    seed: int = 0
    threshold: float = 0.46

    def __post_init__(self):
        object.__setattr__(self, "hidden_layer_sizes", tuple(int(h) for h in self.hidden_layer_sizes))
        if not self.hidden_layer_sizes:
            raise ConfigurationError("The network needs at least one hidden layer.")
        if any(h < 1 for h in self.hidden_layer_sizes):
            raise ConfigurationError(f"Hidden layer sizes must be positive, got {self.hidden_layer_sizes}.")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {tuple(ACTIVATIONS)}, got {self.activation!r}.")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be at least 1, got {self.max_iter}.")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be at least 1, got {self.batch_size}.")
        if not self.learning_rate > 0 or self.l2_alpha < 0 or self.patience < 1:
            raise ConfigurationError("learning_rate must be positive, l2_alpha non-negative and patience >= 1.")
        if self.class_weight not in ("balanced", "none"):
            raise ConfigurationError(f"class_weight must be 'balanced' or 'none', got {self.class_weight!r}.")


def init_params(layer_sizes: list[int], rng: np.random.Generator) -> list[np.ndarray]:
    """He-normal weights and zero biases, as ``[W0, b0, W1, b1, ...]``."""
    params = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        params.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward_logits(params: list[np.ndarray], X: np.ndarray, activation: str = "relu") -> np.ndarray:
    hidden, _ = ACTIVATIONS[activation]
    a = X
    n_layers = len(params) // 2
    for layer in range(n_layers):
        z = a @ params[2 * layer] + params[2 * layer + 1]
        a = hidden(z) if layer < n_layers - 1 else z
    return a[:, 0]


def loss_and_gradients(params: list[np.ndarray], X: np.ndarray, y: np.ndarray, sample_weight: np.ndarray,
                       l2_alpha: float, activation: str = "relu") -> tuple[float, list[np.ndarray]]:
    """
    Mean weighted binary cross-entropy plus ``l2_alpha / (2n) * sum ||W||^2``
    and its gradient with respect to every parameter.
    """
    hidden, derivative = ACTIVATIONS[activation]
    n = X.shape[0]
    n_layers = len(params) // 2
    activations = [X]
    pre_activations = []
    a = X
    for layer in range(n_layers):
        z = a @ params[2 * layer] + params[2 * layer + 1]
        pre_activations.append(z)
        a = hidden(z) if layer < n_layers - 1 else z
        activations.append(a)
    logits = activations[-1][:, 0]

    # log(1 + e^z) - y z, evaluated without overflow.
    bce = np.logaddexp(0.0, logits) - y * logits
    penalty = sum(float((params[2 * layer] ** 2).sum()) for layer in range(n_layers))
    loss = float((sample_weight * bce).sum()) / n + l2_alpha * penalty / (2.0 * n)

    grads = [None] * len(params)
    delta = (sample_weight * (expit(logits) - y) / n)[:, np.newaxis]
    for layer in range(n_layers - 1, -1, -1):
        W = params[2 * layer]
        grads[2 * layer] = activations[layer].T @ delta + l2_alpha * W / n
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ W.T) * derivative(pre_activations[layer - 1], activations[layer])
    return loss, grads


def train_mlp(X: np.ndarray, y, cfg: MlpConfig, rows=None) -> TrainedModel:
    indices, labels = training_rows(X, y, rows)
    weights = class_weights(labels, cfg.class_weight)
    mean, scale = fit_standardizer(X, indices)
    arrays = {"mean": mean, "scale": scale}
    init_rng = make_rng(cfg.seed, 3, 0)
    shuffle_rng = make_rng(cfg.seed, 3, 1)

    layer_sizes = [X.shape[1], *cfg.hidden_layer_sizes, 1]
    params = init_params(layer_sizes, init_rng)
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0
    n = indices.shape[0]
    batch_size = min(cfg.batch_size, n)
    best_loss = math.inf
    stale_epochs = 0

    for epoch in range(1, cfg.max_iter + 1):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            batch = np.sort(order[start:start + batch_size])
            block = standardize(X[indices[batch]], arrays)
            targets = labels[batch].astype(np.float64)
            loss, grads = loss_and_gradients(params, block, targets, weights[labels[batch]], cfg.l2_alpha,
                                             cfg.activation)
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            epoch_loss += loss * batch.shape[0]

            step += 1
            correction1 = 1.0 - cfg.beta1 ** step
            correction2 = 1.0 - cfg.beta2 ** step
            for p, g, m_p, v_p in zip(params, grads, m, v):
                m_p *= cfg.beta1
                m_p += (1.0 - cfg.beta1) * g
                v_p *= cfg.beta2
                v_p += (1.0 - cfg.beta2) * g * g
                p -= cfg.learning_rate * (m_p / correction1) / (np.sqrt(v_p / correction2) + cfg.adam_eps)

        epoch_loss /= n
        if not math.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch, epoch_loss)
        logger.debug("MLP epoch %d: loss %.6f", epoch, epoch_loss)
        if epoch_loss > best_loss - cfg.early_stop_tol:
            stale_epochs += 1
        else:
            stale_epochs = 0
        best_loss = min(best_loss, epoch_loss)
        if stale_epochs >= cfg.patience:
            logger.info("MLP stopped early after %d epochs (loss %.6f)", epoch, epoch_loss)
            break

    for i, p in enumerate(params):
        arrays[f"W{i // 2}" if i % 2 == 0 else f"b{i // 2}"] = p
    logger.info("Trained MLP %s on %d rows", cfg.hidden_layer_sizes, n)
    return TrainedModel(
        kind="mlp",
        config=asdict(cfg),
        feature_dim=X.shape[1],
        default_threshold=cfg.threshold,
        arrays=arrays,
        seed=cfg.seed,
    )


def model_params(model: TrainedModel) -> list[np.ndarray]:
    n_layers = sum(1 for name in model.arrays if name.startswith("W"))
    params = []
    for layer in range(n_layers):
        params.extend((model.arrays[f"W{layer}"], model.arrays[f"b{layer}"]))
    return params


def mlp_proba(model: TrainedModel, block: np.ndarray) -> np.ndarray:
    activation = model.config.get("activation", "relu")
    return expit(forward_logits(model_params(model), standardize(block, model.arrays), activation))
