"""
Readers and writers for the pipeline's artifacts.

Multiband images and probability maps use the MBR container: a one-line JSON
header terminated by a newline, followed by band-planar little-endian 32-bit
floats (row-major inside each plane). Masks are binary PGM (P5, maxval 255),
annotations are JSON with polygons in pixel coordinates.
"""
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError, FormatError, SizeMismatchError, ValidationError
from .utils import ensure_finite

logger = logging.getLogger(__name__)

MBR_DTYPE = "f32le"
MAX_BANDS = 16
DEFAULT_PIXEL_SIZE_M = 1.24

BINARY_PALETTE = (0, 255)
STAGE2_PALETTE = (0, 128, 255)
# Stage-2 palette meaning.
NON_BUILDING = 0
RESIDENTIAL = 128
NON_RESIDENTIAL = 255

_HEADER_FIELDS = ("width", "height", "bands", "pixel_size_m", "dtype")


class BuildingClass(str, Enum):
    RESIDENTIAL = "residential"
    NON_RESIDENTIAL = "non_residential"
    UNCLASSIFIED = "unclassified_building"


ALL_BUILDING_CLASSES = frozenset(BuildingClass)

Point = tuple[float, float]
Ring = tuple[Point, ...]


@dataclass(frozen=True)
class MultibandImage:
    """A ``bands x height x width`` float32 raster."""

    data: np.ndarray
    pixel_size_m: float = DEFAULT_PIXEL_SIZE_M

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValidationError(f"Image data must be 3-D (bands, height, width), got shape {self.data.shape}.")
        bands, height, width = self.data.shape
        if width < 1 or height < 1:
            raise ValidationError(f"Image must be at least 1x1 pixels, got {width}x{height}.")
        if not 1 <= bands <= MAX_BANDS:
            raise ValidationError(f"Image must have between 1 and {MAX_BANDS} bands, got {bands}.")
        if not (math.isfinite(self.pixel_size_m) and self.pixel_size_m > 0):
            raise ValidationError(f"pixel_size_m must be positive, got {self.pixel_size_m}.")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))
        ensure_finite(self.data, "Image data")
        self.data.setflags(write=False)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def pixel_count(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class Polygon:
    class_label: BuildingClass
    exterior: Ring
    holes: tuple[Ring, ...] = ()

    @property
    def rings(self) -> tuple[Ring, ...]:
        return (self.exterior, *self.holes)


@dataclass(frozen=True)
class AnnotationSet:
    polygons: tuple[Polygon, ...] = ()

    def __len__(self) -> int:
        return len(self.polygons)

    def __iter__(self):
        return iter(self.polygons)

    def filtered(self, classes: frozenset[BuildingClass] | None) -> tuple[Polygon, ...]:
        if classes is None:
            return self.polygons
        return tuple(p for p in self.polygons if p.class_label in classes)


@dataclass(frozen=True)
class Mask:
    """An 8-bit label raster (``height x width``) restricted to a palette."""

    values: np.ndarray
    palette: tuple[int, ...] = BINARY_PALETTE

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValidationError(f"Mask values must be 2-D, got shape {self.values.shape}.")
        outside = ~np.isin(self.values, np.array(self.palette))
        if outside.any():
            index = int(np.flatnonzero(outside.reshape(-1))[0])
            raise ValidationError(
                f"Mask value {int(self.values.reshape(-1)[index])} at index {index} is not in palette {self.palette}."
            )
        values = self.values if self.values.dtype == np.uint8 else self.values.astype(np.uint8)
        object.__setattr__(self, "values", values)
        values.setflags(write=False)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def positives(self) -> np.ndarray:
        """Boolean raster of non-zero (building) pixels."""
        return self.values > 0


@dataclass(frozen=True)
class ProbabilityMask:
    probs: np.ndarray
    pixel_size_m: float = DEFAULT_PIXEL_SIZE_M

    def __post_init__(self):
        if self.probs.ndim != 2:
            raise ValidationError(f"Probability mask must be 2-D, got shape {self.probs.shape}.")
        ensure_finite(self.probs, "Probability mask")
        outside = (self.probs < 0) | (self.probs > 1)
        if outside.any():
            index = int(np.flatnonzero(outside.reshape(-1))[0])
            raise DataError(f"Probability {float(self.probs.reshape(-1)[index])} at index {index} is outside [0, 1].")
        self.probs.setflags(write=False)

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]


# --- MBR container ---

def _encode_header(width: int, height: int, bands: int, pixel_size_m: float) -> bytes:
    header = {
        "width": width,
        "height": height,
        "bands": bands,
        "pixel_size_m": pixel_size_m,
        "dtype": MBR_DTYPE,
    }
    return json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n"


def _parse_header(raw: bytes, path: Path) -> dict:
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"'{path}': header is not valid JSON ({e}).")
    if not isinstance(header, dict):
        raise FormatError(f"'{path}': header must be a JSON object.")
    for name in _HEADER_FIELDS:
        if name not in header:
            raise FormatError(f"'{path}': header is missing field '{name}'.")
    for name in ("width", "height", "bands"):
        value = header[name]
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise FormatError(f"'{path}': header field '{name}' must be a positive integer, got {value!r}.")
    if header["bands"] > MAX_BANDS:
        raise FormatError(f"'{path}': header field 'bands' exceeds {MAX_BANDS}.")
    size = header["pixel_size_m"]
    if isinstance(size, bool) or not isinstance(size, (int, float)) or not size > 0:
        raise FormatError(f"'{path}': header field 'pixel_size_m' must be a positive number, got {size!r}.")
    if header["dtype"] != MBR_DTYPE:
        raise FormatError(f"'{path}': header field 'dtype' must be '{MBR_DTYPE}', got {header['dtype']!r}.")
    return header


def _read_mbr(path: Path) -> tuple[dict, np.ndarray]:
    path = Path(path)
    raw = path.read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise FormatError(f"'{path}': missing newline-terminated header.")
    header = _parse_header(raw[:newline], path)
    payload = raw[newline + 1:]
    count = header["bands"] * header["width"] * header["height"]
    if len(payload) != 4 * count:
        raise SizeMismatchError(
            f"'{path}': header declares {count} samples ({4 * count} bytes) but payload holds {len(payload)} bytes."
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(header["bands"], header["height"], header["width"])
    ensure_finite(data, f"'{path}' payload")
    return header, data.astype(np.float32, copy=False)


def _write_mbr(path: Path, data: np.ndarray, pixel_size_m: float) -> None:
    bands, height, width = data.shape
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(_encode_header(width, height, bands, pixel_size_m))
            fh.write(payload)
    except OSError as e:
        raise OSError(f"Could not write '{path}': {e}") from e


def load_image(path: str | Path) -> MultibandImage:
    header, data = _read_mbr(Path(path))
    logger.info("Loaded %s: %dx%d, %d bands", path, header["width"], header["height"], header["bands"])
    return MultibandImage(data=data, pixel_size_m=float(header["pixel_size_m"]))


def save_image(image: MultibandImage, path: str | Path) -> None:
    _write_mbr(Path(path), image.data, image.pixel_size_m)


def load_probability_mask(path: str | Path) -> ProbabilityMask:
    header, data = _read_mbr(Path(path))
    if header["bands"] != 1:
        raise FormatError(f"'{path}': probability masks have exactly 1 band, found {header['bands']}.")
    return ProbabilityMask(probs=data[0], pixel_size_m=float(header["pixel_size_m"]))


def save_probability_mask(mask: ProbabilityMask, path: str | Path) -> None:
    _write_mbr(Path(path), mask.probs[np.newaxis, :, :], mask.pixel_size_m)


# --- Annotations ---

def _parse_ring(raw, polygon_index: int, what: str) -> Ring:
    if not isinstance(raw, list):
        raise ValidationError(f"Polygon {polygon_index}: {what} must be a list of [x, y] pairs.")
    ring = []
    for vertex in raw:
        if not (isinstance(vertex, (list, tuple)) and len(vertex) == 2):
            raise ValidationError(f"Polygon {polygon_index}: {what} has a vertex that is not an [x, y] pair.")
        x, y = vertex
        if isinstance(x, bool) or isinstance(y, bool) or not isinstance(x, (int, float)) or not isinstance(y, (int, float)):
            raise ValidationError(f"Polygon {polygon_index}: {what} has a non-numeric coordinate.")
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValidationError(f"Polygon {polygon_index}: {what} has a non-finite coordinate.")
        ring.append((float(x), float(y)))
    if len(ring) < 3:
        raise ValidationError(f"Polygon {polygon_index}: {what} has {len(ring)} vertices, at least 3 are required.")
    return tuple(ring)


def parse_annotations(document: dict) -> AnnotationSet:
    if not isinstance(document, dict) or not isinstance(document.get("polygons"), list):
        raise ValidationError("Annotation document must be an object with a 'polygons' list.")
    polygons = []
    for index, raw in enumerate(document["polygons"]):
        if not isinstance(raw, dict):
            raise ValidationError(f"Polygon {index}: expected an object.")
        try:
            label = BuildingClass(raw.get("class"))
        except ValueError:
            raise ValidationError(f"Polygon {index}: unknown class {raw.get('class')!r}.")
        exterior = _parse_ring(raw.get("exterior"), index, "exterior")
        holes = tuple(
            _parse_ring(hole, index, f"hole {h}") for h, hole in enumerate(raw.get("holes", []))
        )
        polygons.append(Polygon(class_label=label, exterior=exterior, holes=holes))
    return AnnotationSet(polygons=tuple(polygons))


def annotations_to_document(annotations: AnnotationSet) -> dict:
    return {
        "polygons": [
            {
                "class": p.class_label.value,
                "exterior": [list(v) for v in p.exterior],
                "holes": [[list(v) for v in hole] for hole in p.holes],
            }
            for p in annotations.polygons
        ]
    }


def load_annotations(path: str | Path) -> AnnotationSet:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"'{path}': not valid JSON ({e}).")
    annotations = parse_annotations(document)
    logger.info("Loaded %d polygons from %s", len(annotations), path)
    return annotations


def save_annotations(annotations: AnnotationSet, path: str | Path) -> None:
    text = json.dumps(annotations_to_document(annotations), separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


# --- Masks (PGM P5) ---

def infer_palette(values: np.ndarray) -> tuple[int, ...]:
    present = set(np.unique(values).tolist())
    for palette in (BINARY_PALETTE, STAGE2_PALETTE):
        if present <= set(palette):
            return palette
    raise ValidationError(f"Mask values {sorted(present)} fit neither the binary nor the stage-2 palette.")


def save_mask(mask: Mask, path: str | Path) -> None:
    image = Image.fromarray(np.ascontiguousarray(mask.values))
    image.save(path, format="PPM")


def load_mask(path: str | Path, palette: Sequence[int] | None = None) -> Mask:
    try:
        with Image.open(path) as image:
            image.load()
            if image.format != "PPM" or image.mode != "L":
                raise FormatError(f"'{path}': expected a binary PGM (P5) mask, found {image.format} {image.mode}.")
            values = np.array(image, dtype=np.uint8)
    except UnidentifiedImageError:
        raise FormatError(f"'{path}': not a PGM image.")
    palette = tuple(palette) if palette is not None else infer_palette(values)
    return Mask(values=values, palette=palette)


def binary_mask(positive: np.ndarray) -> Mask:
    return Mask(values=np.where(positive, 255, 0).astype(np.uint8), palette=BINARY_PALETTE)
