"""
Polygon annotations to ground-truth masks.

A pixel (column i, row j) belongs to a polygon when its center (i + 0.5, j + 0.5)
is inside under the even-odd rule over all rings (holes included). Edges follow
a half-open convention: an edge includes its lower-y endpoint and excludes its
upper-y endpoint, so a horizontal ray never counts a shared vertex twice.
"""
import logging

import numpy as np

from .errors import ValidationError
from .raster_io import (
    BINARY_PALETTE,
    NON_RESIDENTIAL,
    RESIDENTIAL,
    STAGE2_PALETTE,
    AnnotationSet,
    BuildingClass,
    Mask,
    Point,
    Polygon,
    Ring,
)

logger = logging.getLogger(__name__)


def _ring_edges(ring: Ring):
    for index, start in enumerate(ring):
        yield start, ring[(index + 1) % len(ring)]


def point_in_polygon(point: Point, polygon: Polygon) -> bool:
    px, py = point
    crossings = 0
    for ring in polygon.rings:
        for (x0, y0), (x1, y1) in _ring_edges(ring):
            if (y0 <= py < y1) or (y1 <= py < y0):
                x_cross = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
                if px < x_cross:
                    crossings += 1
    return crossings % 2 == 1


def _polygon_coverage(polygon: Polygon, width: int, height: int) -> np.ndarray:
    """Boolean ``height x width`` raster of pixel centers inside ``polygon``."""
    inside = np.zeros((height, width), dtype=bool)
    ys_all = np.arange(height, dtype=np.float64) + 0.5
    xs = np.arange(width, dtype=np.float64) + 0.5

    # Outside the vertical extent a ray crosses no edge at all.
    min_y = min(y for ring in polygon.rings for _, y in ring)
    max_y = max(y for ring in polygon.rings for _, y in ring)
    row_lo = max(0, int(np.floor(min_y - 0.5)))
    row_hi = min(height, int(np.ceil(max_y - 0.5)) + 1)
    if row_lo >= row_hi:
        return inside
    ys = ys_all[row_lo:row_hi]
    band = inside[row_lo:row_hi]

    for ring in polygon.rings:
        for (x0, y0), (x1, y1) in _ring_edges(ring):
            if y0 == y1:
                continue
            rows = ((y0 <= ys) & (ys < y1)) | ((y1 <= ys) & (ys < y0))
            if not rows.any():
                continue
            x_cross = x0 + (ys[rows] - y0) * (x1 - x0) / (y1 - y0)
            band[rows] ^= xs[np.newaxis, :] < x_cross[:, np.newaxis]
    return inside


def coverage(annotations: AnnotationSet, width: int, height: int,
             class_filter: frozenset[BuildingClass] | None = None) -> np.ndarray:
    if width < 1 or height < 1:
        raise ValidationError(f"Raster dimensions must be at least 1x1, got {width}x{height}.")
    union = np.zeros((height, width), dtype=bool)
    for polygon in annotations.filtered(class_filter):
        union |= _polygon_coverage(polygon, width, height)
    return union


def rasterize_annotations(annotations: AnnotationSet, width: int, height: int,
                          class_filter: frozenset[BuildingClass] | None = None) -> Mask:
    """
    Renders the union of the (optionally filtered) polygons as a 0/255 mask.
    """
    inside = coverage(annotations, width, height, class_filter)
    logger.info("Rasterized %d polygons: %d positive pixels", len(annotations.filtered(class_filter)), int(inside.sum()))
    return Mask(values=np.where(inside, 255, 0).astype(np.uint8), palette=BINARY_PALETTE)


def rasterize_stage2(annotations: AnnotationSet, width: int, height: int) -> Mask:
    """
    Residential pixels become 128 and non-residential pixels 255; where both
    overlap non-residential wins. Unclassified buildings stay 0.
    """
    residential = coverage(annotations, width, height, frozenset({BuildingClass.RESIDENTIAL}))
    non_residential = coverage(annotations, width, height, frozenset({BuildingClass.NON_RESIDENTIAL}))
    values = np.zeros((height, width), dtype=np.uint8)
    values[residential] = RESIDENTIAL
    values[non_residential] = NON_RESIDENTIAL
    return Mask(values=values, palette=STAGE2_PALETTE)
