"""
Synthetic multiband scenes with known building footprints.

Buildings are rectangles (optionally rotated) placed by seeded rejection
sampling so that their margin-padded bounding boxes never intersect. Building
pixels take their class profile, the rest of the image the background profile
plus an optional Perlin texture, and independent Gaussian noise is added to
every band.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field

import noise as perlin_noise
import numpy as np

from .errors import CongestionError, ConfigurationError
from .raster_io import DEFAULT_PIXEL_SIZE_M, MAX_BANDS, AnnotationSet, BuildingClass, MultibandImage, Polygon
from .rasterize import coverage
from .utils import make_rng

logger = logging.getLogger(__name__)

BACKGROUND = "background"
PROFILE_KEYS = (BACKGROUND, BuildingClass.RESIDENTIAL.value, BuildingClass.NON_RESIDENTIAL.value)

# Band order: red, red edge, coastal, blue, green, yellow, NIR1, NIR2.
_PROFILES_8 = {
    BACKGROUND: (0.25, 0.35, 0.15, 0.18, 0.30, 0.28, 0.55, 0.50),
    BuildingClass.RESIDENTIAL.value: (0.65, 0.55, 0.30, 0.35, 0.40, 0.50, 0.45, 0.42),
    BuildingClass.NON_RESIDENTIAL.value: (0.80, 0.80, 0.70, 0.75, 0.80, 0.80, 0.78, 0.76),
}


def default_profiles(bands: int) -> dict[str, tuple[float, ...]]:
    """The 8-band profiles, truncated or cycled to ``bands`` entries."""
    return {
        key: tuple(profile[i % len(profile)] for i in range(bands))
        for key, profile in _PROFILES_8.items()
    }


@dataclass(frozen=True)
class SceneConfig:
    width: int = 128
    height: int = 128
    bands: int = 8
    n_residential: int = 12
    n_nonresidential: int = 6
    building_size_range: tuple[int, int] = (6, 16)
    spectral_profiles: dict = field(default_factory=dict)
    min_separation: float = 0.2
    noise_sigma: float = 0.05
    texture_amplitude: float = 0.0
    texture_scale: float = 32.0
    rotation: bool = False
    margin: int = 1
    max_attempts: int = 1000
    pixel_size_m: float = DEFAULT_PIXEL_SIZE_M
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigurationError(f"Scene must be at least 1x1, got {self.width}x{self.height}.")
        if not 1 <= self.bands <= MAX_BANDS:
            raise ConfigurationError(f"bands must be between 1 and {MAX_BANDS}, got {self.bands}.")
        if self.n_residential < 0 or self.n_nonresidential < 0:
            raise ConfigurationError("Building counts must be non-negative.")
        lo, hi = (int(v) for v in self.building_size_range)
        if not 1 <= lo <= hi:
            raise ConfigurationError(f"building_size_range must satisfy 1 <= min <= max, got {self.building_size_range}.")
        object.__setattr__(self, "building_size_range", (lo, hi))
        if self.noise_sigma < 0 or self.texture_amplitude < 0:
            raise ConfigurationError("noise_sigma and texture_amplitude must be non-negative.")
        if self.texture_scale <= 0 or self.margin < 0 or self.max_attempts < 1:
            raise ConfigurationError("texture_scale must be positive, margin non-negative and max_attempts >= 1.")

        profiles = dict(self.spectral_profiles) or default_profiles(self.bands)
        if set(profiles) != set(PROFILE_KEYS):
            raise ConfigurationError(f"spectral_profiles needs exactly the keys {PROFILE_KEYS}, got {sorted(profiles)}.")
        profiles = {key: tuple(float(v) for v in profiles[key]) for key in PROFILE_KEYS}
        for key, profile in profiles.items():
            if len(profile) != self.bands:
                raise ConfigurationError(f"Profile '{key}' has {len(profile)} values for {self.bands} bands.")
        for a, b in itertools.combinations(PROFILE_KEYS, 2):
            distance = math.dist(profiles[a], profiles[b])
            if distance < self.min_separation:
                raise ConfigurationError(
                    f"Profiles '{a}' and '{b}' are {distance:.4f} apart, below min_separation {self.min_separation}."
                )
        object.__setattr__(self, "spectral_profiles", profiles)


def _rectangle(cx: float, cy: float, w: int, h: int, angle: float) -> tuple[tuple[float, float], ...]:
    c, s = math.cos(angle), math.sin(angle)
    corners = ((-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2))
    return tuple((cx + x * c - y * s, cy + x * s + y * c) for x, y in corners)


def _place(cfg: SceneConfig, rng: np.random.Generator, taken: list) -> tuple[tuple[float, float], ...]:
    lo, hi = cfg.building_size_range
    for _ in range(cfg.max_attempts):
        w = int(rng.integers(lo, hi + 1))
        h = int(rng.integers(lo, hi + 1))
        if cfg.rotation:
            angle = float(rng.uniform(0.0, math.pi))
            half_w = (w * abs(math.cos(angle)) + h * abs(math.sin(angle))) / 2
            half_h = (w * abs(math.sin(angle)) + h * abs(math.cos(angle))) / 2
        else:
            angle = 0.0
            half_w, half_h = w / 2, h / 2
        if 2 * half_w > cfg.width or 2 * half_h > cfg.height:
            continue
        if cfg.rotation:
            cx = float(rng.uniform(half_w, cfg.width - half_w))
            cy = float(rng.uniform(half_h, cfg.height - half_h))
        else:
            # Integer corners keep axis-aligned footprints on the pixel grid.
            cx = int(rng.integers(0, cfg.width - w + 1)) + half_w
            cy = int(rng.integers(0, cfg.height - h + 1)) + half_h
        box = (cx - half_w - cfg.margin, cy - half_h - cfg.margin, cx + half_w + cfg.margin, cy + half_h + cfg.margin)
        if any(box[0] < t[2] and t[0] < box[2] and box[1] < t[3] and t[1] < box[3] for t in taken):
            continue
        taken.append(box)
        return _rectangle(cx, cy, w, h, angle)
    raise CongestionError(
        f"Could not place building {len(taken) + 1} after {cfg.max_attempts} attempts; "
        "use fewer or smaller buildings or a larger scene."
    )


def _background_texture(cfg: SceneConfig, base: int) -> np.ndarray:
    texture = np.empty((cfg.height, cfg.width), dtype=np.float64)
    for y in range(cfg.height):
        for x in range(cfg.width):
            texture[y, x] = perlin_noise.pnoise2(
                x / cfg.texture_scale, y / cfg.texture_scale,
                octaves=4, persistence=0.5, lacunarity=2.0, base=base,
            )
    return texture


def generate_scene(cfg: SceneConfig) -> tuple[MultibandImage, AnnotationSet]:
    place_rng = make_rng(cfg.seed, 5, 0)
    noise_rng = make_rng(cfg.seed, 5, 1)
    classes = ([BuildingClass.RESIDENTIAL] * cfg.n_residential
               + [BuildingClass.NON_RESIDENTIAL] * cfg.n_nonresidential)
    taken = []
    polygons = tuple(Polygon(class_label=label, exterior=_place(cfg, place_rng, taken)) for label in classes)

    profiles = {key: np.asarray(p, dtype=np.float64) for key, p in cfg.spectral_profiles.items()}
    data = np.broadcast_to(profiles[BACKGROUND][:, None, None], (cfg.bands, cfg.height, cfg.width)).copy()
    if cfg.texture_amplitude > 0:
        base = int(make_rng(cfg.seed, 5, 2).integers(0, 256))
        data += cfg.texture_amplitude * _background_texture(cfg, base)[np.newaxis]
    for polygon in polygons:
        inside = coverage(AnnotationSet((polygon,)), cfg.width, cfg.height)
        data[:, inside] = profiles[polygon.class_label.value][:, np.newaxis]
    if cfg.noise_sigma > 0:
        data += noise_rng.normal(0.0, cfg.noise_sigma, size=data.shape)

    logger.info("Generated %dx%d scene with %d buildings (seed %d)", cfg.width, cfg.height, len(polygons), cfg.seed)
    return MultibandImage(data=data.astype(np.float32), pixel_size_m=cfg.pixel_size_m), AnnotationSet(polygons)
