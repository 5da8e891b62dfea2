"""
Expected residential and non-residential building areas from the two
probability masks, and the daily water consumption they imply.

Per-person consumption figures are turned into per-area rates through an
occupancy assumption (square feet per person).
"""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, ShapeError
from .raster_io import DEFAULT_PIXEL_SIZE_M, ProbabilityMask
from .utils import isclose_rel

logger = logging.getLogger(__name__)

M2_PER_FT2 = 0.09290304
FT2_PER_M2 = 10.7639104167
SQUARE_KM_M2 = 1e6

# Daily water consumption, gallons per square kilometre.
CITY_BENCHMARKS = {"phoenix": 0.194e6, "portland": 0.091e6}
BENCHMARK_BAND = 0.40


@dataclass(frozen=True)
class PixelGeometry:
    pixel_area_m2: float = DEFAULT_PIXEL_SIZE_M ** 2

    def __post_init__(self):
        if not (math.isfinite(self.pixel_area_m2) and self.pixel_area_m2 > 0):
            raise ConfigurationError(f"pixel_area_m2 must be positive, got {self.pixel_area_m2}.")

    @classmethod
    def from_pixel_size(cls, pixel_size_m: float) -> "PixelGeometry":
        return cls(pixel_area_m2=pixel_size_m * pixel_size_m)


def per_person_to_per_area_rate(gal_per_person_day: float, occupancy_ft2: float) -> float:
    """Gallons per square metre per day for a person occupying ``occupancy_ft2``."""
    if not gal_per_person_day > 0:
        raise ConfigurationError(f"Consumption per person must be positive, got {gal_per_person_day}.")
    if not occupancy_ft2 > 0:
        raise ConfigurationError(f"Occupancy must be positive, got {occupancy_ft2}.")
    return gal_per_person_day / (occupancy_ft2 * M2_PER_FT2)


@dataclass(frozen=True)
class ConsumptionRates:
    w_r_gal_per_person_day: float = 40.0
    w_nr_gal_per_person_day: float = 21.0
    occupancy_ft2_per_person: float = 750.0
    ft2_per_m2: float = field(default=FT2_PER_M2, init=False)

    def __post_init__(self):
        for name in ("w_r_gal_per_person_day", "w_nr_gal_per_person_day", "occupancy_ft2_per_person"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value}.")

    @property
    def residential_rate(self) -> float:
        return per_person_to_per_area_rate(self.w_r_gal_per_person_day, self.occupancy_ft2_per_person)

    @property
    def nonresidential_rate(self) -> float:
        return per_person_to_per_area_rate(self.w_nr_gal_per_person_day, self.occupancy_ft2_per_person)


@dataclass(frozen=True)
class ConsumptionReport:
    area_residential_m2: float
    area_nonresidential_m2: float
    water_gal_per_day: float
    residential_share_gal: float
    nonresidential_share_gal: float
    rates: ConsumptionRates
    geometry: PixelGeometry
    image_area_m2: float = SQUARE_KM_M2

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rates"]["residential_gal_per_m2_day"] = self.rates.residential_rate
        out["rates"]["nonresidential_gal_per_m2_day"] = self.rates.nonresidential_rate
        return out


def _probabilities(mask, what: str) -> np.ndarray:
    probs = np.asarray(mask.probs if isinstance(mask, ProbabilityMask) else mask, dtype=np.float64)
    if not np.isfinite(probs).all() or (probs < 0).any() or (probs > 1).any():
        raise DataError(f"{what} probabilities must be finite and lie in [0, 1].")
    return probs


def expected_areas(p_building, p_res_given_building, geom: PixelGeometry = PixelGeometry()) -> tuple[float, float]:
    """
    ``(A_R, A_NR)`` in square metres: the pixel area times the sum of
    P(building) * P(residential | building), and of P(building) times its
    complement. Sums are compensated (``math.fsum``).
    """
    pb = _probabilities(p_building, "Building")
    pr = _probabilities(p_res_given_building, "Residential")
    if pb.shape != pr.shape:
        raise ShapeError(f"Building mask shape {pb.shape} does not match residential mask shape {pr.shape}.")
    pb, pr = pb.reshape(-1), pr.reshape(-1)
    area_r = geom.pixel_area_m2 * math.fsum(pb * pr)
    area_nr = geom.pixel_area_m2 * math.fsum(pb * (1.0 - pr))
    logger.info("Expected areas: residential %.3f m2, non-residential %.3f m2", area_r, area_nr)
    return area_r, area_nr


def harden(mask, threshold: float) -> np.ndarray:
    """0/1 probabilities from a threshold (positive when p >= threshold)."""
    return (_probabilities(mask, "Thresholded") >= threshold).astype(np.float64)


def water_consumption(area_r: float, area_nr: float, rates: ConsumptionRates = ConsumptionRates(),
                      geom: PixelGeometry = PixelGeometry(), image_area_m2: float = SQUARE_KM_M2) -> ConsumptionReport:
    if area_r < 0 or area_nr < 0:
        raise DataError(f"Areas must be non-negative, got A_R={area_r}, A_NR={area_nr}.")
    if not image_area_m2 > 0:
        raise ConfigurationError(f"image_area_m2 must be positive, got {image_area_m2}.")
    residential = area_r * rates.residential_rate
    nonresidential = area_nr * rates.nonresidential_rate
    return ConsumptionReport(
        area_residential_m2=area_r,
        area_nonresidential_m2=area_nr,
        water_gal_per_day=residential + nonresidential,
        residential_share_gal=residential,
        nonresidential_share_gal=nonresidential,
        rates=rates,
        geometry=geom,
        image_area_m2=image_area_m2,
    )


@dataclass(frozen=True)
class BenchmarkResult:
    city: str
    reference_gal_per_km2: float
    ratio: float
    deviation: float
    within_band: bool
    exact_match: bool


@dataclass(frozen=True)
class BenchmarkComparison:
    water_gal_per_km2: float
    band: float
    results: tuple[BenchmarkResult, ...]

    @property
    def within_any_band(self) -> bool:
        return any(r.within_band for r in self.results)

    def to_dict(self) -> dict:
        return {
            "water_gal_per_km2": self.water_gal_per_km2,
            "band": self.band,
            "within_any_band": self.within_any_band,
            "cities": {r.city: asdict(r) for r in self.results},
        }


def benchmark_comparison(report: ConsumptionReport, benchmarks: dict[str, float] = CITY_BENCHMARKS,
                         band: float = BENCHMARK_BAND) -> BenchmarkComparison:
    """
    Compares consumption per square kilometre with recorded city figures.
    A city is within band when the relative deviation is at most ``band``.
    """
    per_km2 = report.water_gal_per_day * SQUARE_KM_M2 / report.image_area_m2
    results = []
    for city, reference in sorted(benchmarks.items()):
        ratio = per_km2 / reference
        deviation = abs(ratio - 1.0)
        results.append(BenchmarkResult(
            city=city,
            reference_gal_per_km2=reference,
            ratio=ratio,
            deviation=deviation,
            within_band=deviation <= band,
            exact_match=isclose_rel(per_km2, reference),
        ))
    return BenchmarkComparison(water_gal_per_km2=per_km2, band=band, results=tuple(results))
