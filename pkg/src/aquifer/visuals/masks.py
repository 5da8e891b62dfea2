"""
Colour renderings of masks and images, written as binary PPM (P6).
"""
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from ..errors import ShapeError, ValidationError
from ..features import RGB_BANDS_8, select_bands
from ..raster_io import NON_BUILDING, NON_RESIDENTIAL, RESIDENTIAL, STAGE2_PALETTE, Mask, MultibandImage

TP_COLOR = (255, 0, 0)
FP_COLOR = (0, 255, 0)
FN_COLOR = (0, 0, 255)
BACKGROUND = (0, 0, 0)

STAGE2_COLORS = {
    "truth": {RESIDENTIAL: (128, 128, 128), NON_RESIDENTIAL: (255, 255, 255)},
    "prediction": {RESIDENTIAL: (255, 0, 0), NON_RESIDENTIAL: (255, 255, 0)},
}


def _positives(mask) -> np.ndarray:
    if isinstance(mask, Mask):
        return mask.positives()
    return np.asarray(mask) > 0


def render_confusion_mask(pred, truth) -> Image.Image:
    """TP red, FP green, FN blue, TN black."""
    p, t = _positives(pred), _positives(truth)
    if p.shape != t.shape or p.ndim != 2:
        raise ShapeError(f"Prediction shape {p.shape} does not match truth shape {t.shape}.")
    rgb = np.zeros((*p.shape, 3), dtype=np.uint8)
    rgb[p & t] = TP_COLOR
    rgb[p & ~t] = FP_COLOR
    rgb[~p & t] = FN_COLOR
    return Image.fromarray(rgb)


def render_stage2_mask(mask, mode: str = "prediction") -> Image.Image:
    """
    Residential/non-residential buildings in gray/white (``truth``) or
    red/yellow (``prediction``); everything else black.
    """
    if mode not in STAGE2_COLORS:
        raise ValidationError(f"mode must be 'truth' or 'prediction', got {mode!r}.")
    values = mask.values if isinstance(mask, Mask) else np.asarray(mask)
    outside = ~np.isin(values, STAGE2_PALETTE)
    if outside.any():
        index = int(np.flatnonzero(outside.reshape(-1))[0])
        raise ValidationError(f"Value {int(values.reshape(-1)[index])} at index {index} is not a stage-2 label.")
    rgb = np.zeros((*values.shape, 3), dtype=np.uint8)
    for label, color in STAGE2_COLORS[mode].items():
        rgb[values == label] = color
    rgb[values == NON_BUILDING] = BACKGROUND
    return Image.fromarray(rgb)


def _stretch(values: np.ndarray, low_pct: float, high_pct: float) -> np.ndarray:
    lo, hi = np.percentile(values, [low_pct, high_pct])
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = (np.clip(values, lo, hi) - lo) / (hi - lo)
    return np.round(scaled * 255.0).astype(np.uint8)


def render_probability_mask(probs) -> Image.Image:
    """Probabilities mapped linearly onto 0..255 gray."""
    probs = np.asarray(getattr(probs, "probs", probs), dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeError(f"Probability mask must be 2-D, got shape {probs.shape}.")
    gray = np.round(np.clip(probs, 0.0, 1.0) * 255.0).astype(np.uint8)
    return Image.fromarray(np.repeat(gray[:, :, np.newaxis], 3, axis=2))


def render_rgb(image: MultibandImage, bands: Sequence[int] = RGB_BANDS_8,
               low_pct: float = 2.0, high_pct: float = 98.0) -> Image.Image:
    """True-colour composite, each band stretched between two percentiles."""
    if len(bands) != 3:
        raise ValidationError(f"An RGB composite needs 3 bands, got {len(bands)}.")
    subset = select_bands(image, bands).data
    rgb = np.stack([_stretch(plane, low_pct, high_pct) for plane in subset], axis=2)
    return Image.fromarray(rgb)


def save_rendering(image: Image.Image, path: str | Path) -> None:
    image.convert("RGB").save(path, format="PPM")
