import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / 'src'))

from aquifer.raster_io import AnnotationSet, BuildingClass, MultibandImage

from .helpers import square


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_image(rng):
    return MultibandImage(data=rng.uniform(0, 1, size=(3, 12, 10)).astype(np.float32))


@pytest.fixture
def two_buildings():
    return AnnotationSet((
        square(1, 1, 4, BuildingClass.RESIDENTIAL),
        square(6, 6, 3, BuildingClass.NON_RESIDENTIAL),
    ))
