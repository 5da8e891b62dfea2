"""End-to-end runs of the three stages on a synthetic scene."""
import json
from dataclasses import replace

import numpy as np
import pytest
from click.testing import CliRunner

# Ensure src is in path for imports if running pytest from project root
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / 'src'))

from aquifer.cli import cli
from aquifer.evaluation import kfold_cv
from aquifer.features import FrameConfig, HogConfig, assemble_features
from aquifer.learners import PRESETS
from aquifer.raster_io import RESIDENTIAL, load_mask
from aquifer.rasterize import rasterize_annotations, rasterize_stage2
from aquifer.scenegen import SceneConfig, generate_scene

FOREST = ["--model", "rf", "--k", "1", "--set", "n_estimators=20", "--set", "max_depth=10"]
NETWORK = ["--model", "mlp", "--k", "1", "--set", "hidden_layer_sizes=16", "--set", "max_iter=40"]


def _run(*args):
    result = CliRunner().invoke(cli, ["--no-record-timing", *map(str, args)])
    assert result.exit_code == 0, result.output
    return result


def _pipeline(root: Path) -> dict:
    image, annotations = root / "scene.mbr", root / "scene.json"
    _run("synth", "-o", image, "--annotations", annotations, "--seed", 21)
    _run("rasterize", image, annotations, "-o", root / "buildings.pgm")
    _run("rasterize", image, annotations, "-o", root / "classes.pgm", "--class-filter", "stage2")
    _run("train", image, root / "buildings.pgm", "-o", root / "stage1.model", "--half", "columns", *FOREST)
    _run("train", image, root / "classes.pgm", "-o", root / "stage2.model", "--stage", "restype", *NETWORK)
    _run("predict", root / "stage1.model", image, "-o", root / "p_building.mbr")
    _run("predict", root / "stage2.model", image, "-o", root / "p_residential.mbr")
    _run("evaluate", root / "p_building.mbr", root / "buildings.pgm", "-o", root / "stage1.json", "--half", "columns")
    _run("evaluate", root / "p_residential.mbr", root / "classes.pgm", "-o", root / "stage2.json", "--stage", "restype")
    _run("estimate", root / "p_building.mbr", root / "p_residential.mbr", "-o", root / "water.json")
    return {path.name: path.read_bytes() for path in sorted(root.iterdir()) if ".manifest" not in path.name}


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("first")
    return root, _pipeline(root)


def test_building_stage_generalizes_to_the_held_out_half(first_run):
    root, _ = first_run
    report = json.loads((root / "stage1.json").read_text())
    assert report["pixels"] == 128 * 64
    assert report["metrics"]["pixel_jaccard"] > 0.6
    assert report["metrics"]["auc"] > 0.9


def test_residential_stage_is_scored_on_buildings_only(first_run):
    root, _ = first_run
    report = json.loads((root / "stage2.json").read_text())
    classes = load_mask(root / "classes.pgm").values
    assert report["pixels"] == int((classes > 0).sum())
    assert 0.0 <= report["metrics"]["balanced_accuracy"] <= 1.0


def test_expected_building_area_tracks_the_ground_truth(first_run):
    root, _ = first_run
    water = json.loads((root / "water.json").read_text())
    report = water["report"]
    pixel_area = 1.24 ** 2
    true_area = int(load_mask(root / "buildings.pgm").positives().sum()) * pixel_area
    estimated = report["area_residential_m2"] + report["area_nonresidential_m2"]
    assert estimated == pytest.approx(true_area, rel=0.3)
    assert report["water_gal_per_day"] > 0
    assert report["image_area_m2"] == pytest.approx(128 * 128 * pixel_area)
    assert set(water["benchmarks"]["cities"]) == {"phoenix", "portland"}


def test_pipeline_is_deterministic(first_run, tmp_path):
    _, outputs = first_run
    again = _pipeline(tmp_path)
    assert again.keys() == outputs.keys()
    for name, payload in outputs.items():
        assert again[name] == payload, name


def test_manifests_do_not_depend_on_timing(first_run):
    root, _ = first_run
    manifest = json.loads(Path(f"{root / 'water.json'}.manifest.json").read_text())
    assert manifest["subcommand"] == "estimate"
    assert manifest["config"]["rates"]["w_r_gal_per_person_day"] == 40.0
    assert "timing" not in manifest
    assert np.isclose(manifest["config"]["geometry"]["pixel_area_m2"], 1.24 ** 2)


@pytest.fixture(scope="module")
def cross_validated():
    """Five-fold CV of the reduced presets on the default 128x128 scene."""
    cfg = SceneConfig()
    image, annotations = generate_scene(cfg)
    buildings = rasterize_annotations(annotations, cfg.width, cfg.height).positives().reshape(-1).astype(np.int64)
    classes = rasterize_stage2(annotations, cfg.width, cfg.height).values.reshape(-1)
    forest = replace(PRESETS["rf"], n_estimators=50)
    learners = {
        "sgd": PRESETS["sgd"],
        "rf": forest,
        "mlp": replace(PRESETS["mlp"], hidden_layer_sizes=(16, 16)),
    }
    stage1 = assemble_features(image, FrameConfig(k=4), HogConfig()).data
    reports = {name: kfold_cv(stage1, buildings, learner, folds=5) for name, learner in learners.items()}
    stage2 = assemble_features(image, FrameConfig(k=4)).data
    reports["restype"] = kfold_cv(stage2, (classes == RESIDENTIAL).astype(np.int64), forest, folds=5,
                                  rows=np.flatnonzero(classes > 0))
    return reports


@pytest.mark.parametrize("name", ["rf", "mlp"])
def test_nonlinear_learners_find_buildings(cross_validated, name):
    mean = cross_validated[name].mean_test
    assert mean.pixel_jaccard >= 0.90
    assert mean.auc >= 0.98


def test_linear_learner_does_not_beat_nonlinear_ones(cross_validated):
    jaccard = {name: report.mean_test.pixel_jaccard for name, report in cross_validated.items()}
    assert jaccard["sgd"] <= min(jaccard["rf"], jaccard["mlp"])


def test_residential_classification_is_balanced(cross_validated):
    assert cross_validated["restype"].mean_test.balanced_accuracy >= 0.95
