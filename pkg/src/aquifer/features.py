"""
Per-pixel feature extraction: frame expansion and HOG descriptors.

Rows are pixels in row-major order. Frame features hold, for every offset
(dy, dx) of the (2k+1)x(2k+1) neighbourhood scanned row-major from (-k, -k)
to (k, k), all band values of the neighbour at that offset. Out-of-image
neighbours are clamped to the nearest edge pixel.
"""
import json
import logging
import math
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, FormatError, SizeMismatchError
from .raster_io import MultibandImage
from .utils import ensure_finite

logger = logging.getLogger(__name__)

FEATURE_DTYPE = "f32le"
# Red, green and blue in the band order of the 8-band multispectral product.
RGB_BANDS_8 = (0, 4, 3)


@dataclass(frozen=True)
class FrameConfig:
    k: int = 4
    padding: str = "replicate"

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 0:
            raise ConfigurationError(f"Frame width k must be a non-negative integer, got {self.k!r}.")
        if self.padding != "replicate":
            raise ConfigurationError(f"Unsupported frame padding {self.padding!r}; only 'replicate' is available.")

    def columns(self, bands: int) -> int:
        return bands * (2 * self.k + 1) ** 2

    def check_image(self, image: MultibandImage) -> None:
        shortest = min(image.width, image.height)
        # A single-pixel-wide image has no neighbours to read, so any frame is pure replication.
        if shortest > 1 and self.k > shortest / 2:
            raise ConfigurationError(
                f"Frame width k={self.k} is too large for a {image.width}x{image.height} image "
                f"(at most {shortest // 2})."
            )


@dataclass(frozen=True)
class HogConfig:
    cell_size: int = 8
    bins: int = 9
    orientation_range: str = "unsigned_0_180"
    block: int = 2
    block_norm: str = "l2"
    epsilon: float = 1e-12
    channel_reduction: str = "band_mean"

    def __post_init__(self):
        if self.cell_size < 2:
            raise ConfigurationError(f"HOG cell_size must be at least 2, got {self.cell_size}.")
        if self.bins < 2:
            raise ConfigurationError(f"HOG bins must be at least 2, got {self.bins}.")
        if self.block < 1:
            raise ConfigurationError(f"HOG block must be at least 1 cell, got {self.block}.")
        if not self.epsilon > 0:
            raise ConfigurationError(f"HOG epsilon must be positive, got {self.epsilon}.")
        if self.orientation_range != "unsigned_0_180" or self.block_norm != "l2" or self.channel_reduction != "band_mean":
            raise ConfigurationError("HOG supports only unsigned orientations, L2 block norm and band-mean input.")

    @property
    def descriptor_length(self) -> int:
        return self.block * self.block * self.bins


@dataclass(frozen=True)
class FeatureMatrix:
    """``rows x cols`` float32 features; ``data`` may be a disk-backed memmap."""

    data: np.ndarray
    col_meaning: tuple[str, ...]

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ConfigurationError(f"Feature data must be 2-D, got shape {self.data.shape}.")
        if len(self.col_meaning) != self.data.shape[1]:
            raise ConfigurationError(
                f"col_meaning has {len(self.col_meaning)} entries for {self.data.shape[1]} columns."
            )

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def select_bands(image: MultibandImage, band_indices: Sequence[int]) -> MultibandImage:
    indices = list(band_indices)
    if not indices:
        raise ConfigurationError("At least one band must be selected.")
    for index in indices:
        if not 0 <= index < image.bands:
            raise ConfigurationError(f"Band index {index} is outside 0..{image.bands - 1}.")
    return MultibandImage(data=np.ascontiguousarray(image.data[indices]), pixel_size_m=image.pixel_size_m)


def frame_col_meaning(bands: int, cfg: FrameConfig) -> tuple[str, ...]:
    k = cfg.k
    return tuple(
        f"frame:dy={dy},dx={dx},band={b}"
        for dy in range(-k, k + 1)
        for dx in range(-k, k + 1)
        for b in range(bands)
    )


def hog_col_meaning(cfg: HogConfig) -> tuple[str, ...]:
    return tuple(
        f"hog:cell_y={cy},cell_x={cx},bin={b}"
        for cy in range(cfg.block)
        for cx in range(cfg.block)
        for b in range(cfg.bins)
    )


def _fill_frame(image: MultibandImage, cfg: FrameConfig, out: np.ndarray) -> None:
    k = cfg.k
    bands, height, width = image.data.shape
    padded = np.pad(image.data, ((0, 0), (k, k), (k, k)), mode="edge")
    col = 0
    for dy in range(-k, k + 1):
        for dx in range(-k, k + 1):
            window = padded[:, k + dy:k + dy + height, k + dx:k + dx + width]
            out[:, col:col + bands] = window.reshape(bands, -1).T
            col += bands


def expand_frame_features(image: MultibandImage, cfg: FrameConfig) -> FeatureMatrix:
    cfg.check_image(image)
    out = np.empty((image.pixel_count, cfg.columns(image.bands)), dtype=np.float32)
    _fill_frame(image, cfg, out)
    return FeatureMatrix(data=out, col_meaning=frame_col_meaning(image.bands, cfg))


def _cell_histograms(image: MultibandImage, cfg: HogConfig) -> np.ndarray:
    """Returns ``n_cells_y x n_cells_x x bins`` magnitude-weighted histograms."""
    channel = image.data.astype(np.float64).mean(axis=0)
    height, width = channel.shape
    # Central differences inside, one-sided at the borders.
    gy = np.gradient(channel, axis=0) if height > 1 else np.zeros_like(channel)
    gx = np.gradient(channel, axis=1) if width > 1 else np.zeros_like(channel)
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)

    # Bin b is centred on b * width; votes are split linearly between the two nearest centres.
    bin_width = 180.0 / cfg.bins
    position = orientation / bin_width
    lower = np.floor(position).astype(np.int64)
    upper_share = position - lower
    lower %= cfg.bins
    upper = (lower + 1) % cfg.bins

    n_cells_y = math.ceil(height / cfg.cell_size)
    n_cells_x = math.ceil(width / cfg.cell_size)
    rows, cols = np.indices((height, width))
    cell_index = (rows // cfg.cell_size) * n_cells_x + (cols // cfg.cell_size)

    hist = np.zeros((n_cells_y * n_cells_x, cfg.bins), dtype=np.float64)
    np.add.at(hist, (cell_index.ravel(), lower.ravel()), (magnitude * (1.0 - upper_share)).ravel())
    np.add.at(hist, (cell_index.ravel(), upper.ravel()), (magnitude * upper_share).ravel())
    return hist.reshape(n_cells_y, n_cells_x, cfg.bins)


def hog_block_descriptors(image: MultibandImage, cfg: HogConfig) -> np.ndarray:
    """
    Returns ``n_blocks_y x n_blocks_x x descriptor_length`` L2-normalized block
    descriptors. Blocks tile the cell grid without overlap; cells missing from
    a partial block at the right or bottom edge contribute zeros.
    """
    hist = _cell_histograms(image, cfg)
    n_cells_y, n_cells_x, bins = hist.shape
    n_blocks_y = math.ceil(n_cells_y / cfg.block)
    n_blocks_x = math.ceil(n_cells_x / cfg.block)
    padded = np.zeros((n_blocks_y * cfg.block, n_blocks_x * cfg.block, bins), dtype=np.float64)
    padded[:n_cells_y, :n_cells_x] = hist
    blocks = (
        padded.reshape(n_blocks_y, cfg.block, n_blocks_x, cfg.block, bins)
        .transpose(0, 2, 1, 3, 4)
        .reshape(n_blocks_y, n_blocks_x, cfg.descriptor_length)
    )
    norms = np.sqrt((blocks ** 2).sum(axis=-1, keepdims=True) + cfg.epsilon ** 2)
    return blocks / norms


def compute_hog(image: MultibandImage, cfg: HogConfig) -> FeatureMatrix:
    """
    Every pixel receives the descriptor of the block that contains its cell.
    """
    if image.width < cfg.cell_size or image.height < cfg.cell_size:
        raise ConfigurationError(
            f"Image {image.width}x{image.height} is smaller than one {cfg.cell_size}px HOG cell."
        )
    blocks = hog_block_descriptors(image, cfg)
    block_px = cfg.cell_size * cfg.block
    rows = np.arange(image.height) // block_px
    cols = np.arange(image.width) // block_px
    per_pixel = blocks[rows[:, np.newaxis], cols[np.newaxis, :]]
    data = per_pixel.reshape(image.pixel_count, cfg.descriptor_length).astype(np.float32)
    return FeatureMatrix(data=data, col_meaning=hog_col_meaning(cfg))


def _feature_header(rows: int, meaning: tuple[str, ...]) -> bytes:
    header = {"rows": rows, "cols": len(meaning), "dtype": FEATURE_DTYPE, "col_meaning": list(meaning)}
    return json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n"


def _allocate(rows: int, meaning: tuple[str, ...], memory_budget_bytes: int | None,
              spill_dir: str | Path | None) -> np.ndarray:
    """
    In-memory matrix within the budget. Above it, a memmap laid out as a
    feature file: a named one in ``spill_dir`` that ``load_features`` can
    read back, or an anonymous one that disappears with the mapping.
    """
    cols = len(meaning)
    size = rows * cols * 4
    if memory_budget_bytes is None or size <= memory_budget_bytes:
        return np.empty((rows, cols), dtype=np.float32)
    header = _feature_header(rows, meaning)
    if spill_dir is None:
        spill = tempfile.TemporaryFile(prefix="aquifer-features-")
        name = "an anonymous file"
    else:
        spill = tempfile.NamedTemporaryFile(prefix="aquifer-features-", suffix=".features", dir=spill_dir,
                                            delete=False)
        name = spill.name
    logger.info("Features need %d bytes (budget %d); spilling to %s", size, memory_budget_bytes, name)
    with spill:
        spill.write(header)
        spill.truncate(len(header) + size)
        spill.flush()
        return np.memmap(spill, dtype="<f4", mode="r+", offset=len(header), shape=(rows, cols))


def assemble_features(image: MultibandImage, frame_cfg: FrameConfig, hog_cfg: HogConfig | None = None,
                      memory_budget_bytes: int | None = None, spill_dir: str | Path | None = None) -> FeatureMatrix:
    """
    Concatenates frame features and, when ``hog_cfg`` is given, HOG features.

    Matrices larger than ``memory_budget_bytes`` are written to a memmap so
    gradient-based learners can stream mini-batches from disk.
    """
    frame_cfg.check_image(image)
    meaning = frame_col_meaning(image.bands, frame_cfg)
    hog = None
    if hog_cfg is not None:
        hog = compute_hog(image, hog_cfg)
        meaning = meaning + hog.col_meaning
    out = _allocate(image.pixel_count, meaning, memory_budget_bytes, spill_dir)
    frame_cols = frame_cfg.columns(image.bands)
    _fill_frame(image, frame_cfg, out[:, :frame_cols])
    if hog is not None:
        out[:, frame_cols:] = hog.data
    logger.info("Assembled %d x %d feature matrix", out.shape[0], out.shape[1])
    return FeatureMatrix(data=out, col_meaning=meaning)


def feature_spec(bands: int, frame_cfg: FrameConfig, hog_cfg: HogConfig | None,
                 band_indices: Sequence[int] | None = None) -> dict:
    """JSON-compatible description of how a feature matrix is built."""
    hog_cols = hog_cfg.descriptor_length if hog_cfg is not None else 0
    return {
        "frame": asdict(frame_cfg),
        "hog": asdict(hog_cfg) if hog_cfg is not None else None,
        "band_indices": list(band_indices) if band_indices is not None else None,
        "bands": bands,
        "feature_dim": frame_cfg.columns(bands) + hog_cols,
    }


def save_features(features: FeatureMatrix, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_feature_header(features.rows, features.col_meaning))
        for start in range(0, features.rows, 65536):
            chunk = np.asarray(features.data[start:start + 65536], dtype="<f4")
            fh.write(np.ascontiguousarray(chunk).tobytes())


def load_features(path: str | Path, mmap: bool = False) -> FeatureMatrix:
    path = Path(path)
    with open(path, "rb") as fh:
        line = fh.readline()
    try:
        header = json.loads(line.decode("utf-8"))
        rows, cols, meaning = header["rows"], header["cols"], tuple(header["col_meaning"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise FormatError(f"'{path}': invalid feature header ({e}).")
    if header.get("dtype") != FEATURE_DTYPE:
        raise FormatError(f"'{path}': unsupported feature dtype {header.get('dtype')!r}.")
    offset = len(line)
    expected = offset + 4 * rows * cols
    actual = path.stat().st_size
    if actual != expected:
        raise SizeMismatchError(f"'{path}': expected {expected} bytes for {rows}x{cols} features, found {actual}.")
    if mmap:
        data = np.memmap(path, dtype="<f4", mode="r", offset=offset, shape=(rows, cols))
    else:
        data = np.fromfile(path, dtype="<f4", offset=offset).reshape(rows, cols)
        ensure_finite(data, f"'{path}' features")
    return FeatureMatrix(data=data, col_meaning=meaning)
