"""Seeding and small shared helpers."""
import math

import numpy as np

from .errors import DataError


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Returns a generator for an independent stream derived from ``seed``.

    Streams are addressed by a path of integers (for instance ``(2, tree)`` for
    the bootstrap of one tree), so every consumer draws from its own
    ``SeedSequence`` branch and results never depend on call order or on how
    many workers run concurrently.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream)))


def spawn_seeds(seed: int, count: int, *stream: int) -> list[np.random.SeedSequence]:
    parent = np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream))
    return parent.spawn(count)


def ensure_finite(values: np.ndarray, what: str) -> None:
    """Raises DataError naming the first non-finite flat index."""
    bad = ~np.isfinite(values)
    if bad.any():
        index = int(np.flatnonzero(bad.reshape(-1))[0])
        raise DataError(f"{what} contains a non-finite value at index {index}.")


def isclose_rel(a: float, b: float, rel: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0)
