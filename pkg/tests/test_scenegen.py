import numpy as np
import pytest

# Ensure src is in path for imports if running pytest from project root
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / 'src'))

from aquifer.errors import CongestionError, ConfigurationError
from aquifer.evaluation import optimal_threshold
from aquifer.features import FrameConfig, expand_frame_features
from aquifer.learners import RfConfig, predict_proba, train_model
from aquifer.raster_io import BuildingClass
from aquifer.rasterize import rasterize_annotations
from aquifer.scenegen import BACKGROUND, SceneConfig, default_profiles, generate_scene

QUIET = dict(width=48, height=40, n_residential=4, n_nonresidential=2, building_size_range=(4, 8), noise_sigma=0.0)


def test_same_seed_same_scene():
    first_image, first_ann = generate_scene(SceneConfig(seed=5))
    second_image, second_ann = generate_scene(SceneConfig(seed=5))
    assert first_image.data.tobytes() == second_image.data.tobytes()
    assert first_ann == second_ann
    other_image, _ = generate_scene(SceneConfig(seed=6))
    assert other_image.data.tobytes() != first_image.data.tobytes()


def test_default_scene_shape():
    image, annotations = generate_scene(SceneConfig())
    assert image.data.shape == (8, 128, 128)
    assert image.data.dtype == np.float32
    assert image.pixel_size_m == 1.24
    labels = [p.class_label for p in annotations]
    assert labels == [BuildingClass.RESIDENTIAL] * 12 + [BuildingClass.NON_RESIDENTIAL] * 6


def test_zero_buildings():
    image, annotations = generate_scene(SceneConfig(n_residential=0, n_nonresidential=0, noise_sigma=0.0))
    assert len(annotations) == 0
    background = np.asarray(default_profiles(8)[BACKGROUND], dtype=np.float32)
    assert np.array_equal(image.data, np.broadcast_to(background[:, None, None], image.data.shape))


def test_noise_free_pixels_take_their_profile():
    cfg = SceneConfig(**QUIET, seed=3)
    image, annotations = generate_scene(cfg)
    profiles = {key: np.asarray(p, dtype=np.float32) for key, p in cfg.spectral_profiles.items()}
    for cls in (BuildingClass.RESIDENTIAL, BuildingClass.NON_RESIDENTIAL):
        inside = rasterize_annotations(annotations, cfg.width, cfg.height, frozenset({cls})).positives()
        assert inside.any()
        assert np.array_equal(image.data[:, inside], np.repeat(profiles[cls.value][:, None], inside.sum(), axis=1))
    outside = ~rasterize_annotations(annotations, cfg.width, cfg.height).positives()
    assert np.all(image.data[:, outside] == profiles[BACKGROUND][:, None])


def test_axis_aligned_buildings_sit_on_the_grid():
    cfg = SceneConfig(**QUIET, seed=9)
    _, annotations = generate_scene(cfg)
    total = 0
    for polygon in annotations:
        xs = [x for x, _ in polygon.exterior]
        ys = [y for _, y in polygon.exterior]
        assert all(float(v).is_integer() for v in xs + ys)
        assert 0 <= min(xs) and max(xs) <= cfg.width
        assert 0 <= min(ys) and max(ys) <= cfg.height
        total += (max(xs) - min(xs)) * (max(ys) - min(ys))
    # Footprints never overlap, so the mask counts every building in full.
    mask = rasterize_annotations(annotations, cfg.width, cfg.height)
    assert mask.positives().sum() == total


def test_rotated_buildings_stay_inside():
    cfg = SceneConfig(width=64, height=64, n_residential=5, n_nonresidential=3, building_size_range=(4, 8),
                      rotation=True, seed=2)
    _, annotations = generate_scene(cfg)
    assert len(annotations) == 8
    for polygon in annotations:
        for x, y in polygon.exterior:
            assert -1e-9 <= x <= cfg.width + 1e-9
            assert -1e-9 <= y <= cfg.height + 1e-9


def test_oversized_building_is_congestion():
    with pytest.raises(CongestionError, match="Could not place building 1"):
        generate_scene(SceneConfig(width=10, height=10, n_residential=1, n_nonresidential=0,
                                   building_size_range=(20, 20), max_attempts=50))


def test_crowded_scene_is_congestion():
    cfg = SceneConfig(width=16, height=16, n_residential=40, n_nonresidential=0,
                      building_size_range=(6, 8), max_attempts=100)
    with pytest.raises(CongestionError) as excinfo:
        generate_scene(cfg)
    assert excinfo.value.exit_code == 3


def test_profiles_must_be_separated():
    profiles = {"background": (0.1, 0.1), "residential": (0.1, 0.15), "non_residential": (0.9, 0.9)}
    with pytest.raises(ConfigurationError, match="below min_separation"):
        SceneConfig(bands=2, spectral_profiles=profiles)


def test_profiles_must_match_band_count():
    with pytest.raises(ConfigurationError, match="values for 3 bands"):
        SceneConfig(bands=3, spectral_profiles=default_profiles(4))
    with pytest.raises(ConfigurationError, match="exactly the keys"):
        SceneConfig(bands=2, spectral_profiles={"background": (0.0, 0.0)})


def test_default_profiles_follow_band_count():
    assert all(len(p) == 3 for p in default_profiles(3).values())
    twelve = default_profiles(12)
    assert twelve[BACKGROUND][8:] == twelve[BACKGROUND][:4]


def test_invalid_size_range():
    with pytest.raises(ConfigurationError, match="building_size_range"):
        SceneConfig(building_size_range=(8, 4))


def test_texture_varies_background():
    cfg = SceneConfig(width=24, height=24, n_residential=0, n_nonresidential=0, noise_sigma=0.0,
                      texture_amplitude=0.1, texture_scale=8.0, seed=4)
    image, _ = generate_scene(cfg)
    assert np.unique(image.data[0]).size > 1
    assert np.array_equal(image.data, generate_scene(cfg)[0].data)


def test_noise_free_scene_is_separable_by_a_shallow_tree():
    cfg = SceneConfig(**QUIET, seed=11)
    image, annotations = generate_scene(cfg)
    X = expand_frame_features(image, FrameConfig(k=0)).data
    y = rasterize_annotations(annotations, cfg.width, cfg.height).positives().reshape(-1).astype(np.int64)
    model = train_model(X, y, RfConfig(n_estimators=1, max_depth=2, features_per_split="all", bootstrap=False))
    _, jaccard = optimal_threshold(predict_proba(model, X), y)
    assert jaccard == 1.0
