import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / 'src'))

from aquifer.raster_io import BuildingClass, Polygon


def square(x0, y0, size, label=BuildingClass.RESIDENTIAL, holes=()):
    exterior = ((x0, y0), (x0 + size, y0), (x0 + size, y0 + size), (x0, y0 + size))
    return Polygon(class_label=label, exterior=exterior, holes=tuple(holes))


def blobs(rng, n=200, dims=4, gap=4.0):
    """Two Gaussian clouds whose centres are ``gap`` apart."""
    labels = np.zeros(n, dtype=np.int64)
    labels[: n // 2] = 1
    X = rng.normal(0.0, 1.0, size=(n, dims)) + gap * labels[:, None] / np.sqrt(dims)
    return X.astype(np.float32), labels
