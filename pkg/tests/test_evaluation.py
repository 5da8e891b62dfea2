import csv

import numpy as np
import pytest

# Ensure src is in path for imports if running pytest from project root
import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / 'src'))

from aquifer.errors import ConfigurationError, DegenerateLabelsError, ShapeError
from aquifer.evaluation import (
    Confusion,
    MetricsReport,
    RocCurve,
    auc_trapezoid,
    confusion_counts,
    evaluate_probabilities,
    grid_search,
    kfold_cv,
    mean_report,
    metrics_from_confusion,
    optimal_threshold,
    roc_curve,
    split_halves,
    stratified_folds,
)
from aquifer.learners import RfConfig, SgdConfig
from aquifer.raster_io import Mask

from .helpers import blobs


def _curve(fpr, tpr):
    return RocCurve(fpr=np.array(fpr, dtype=float), tpr=np.array(tpr, dtype=float),
                    thresholds=np.zeros(len(fpr)))


def test_confusion_counts():
    assert confusion_counts([1, 1, 0], [1, 1, 0]) == Confusion(tp=2, tn=1, fp=0, fn=0)
    assert confusion_counts([1], [0]).fp == 1
    assert confusion_counts([0], [1]).fn == 1


def test_confusion_counts_partition(rng):
    pred = rng.integers(0, 2, size=(10, 10))
    truth = rng.integers(0, 2, size=(10, 10))
    assert confusion_counts(pred, truth).total == 100


def test_confusion_accepts_masks():
    pred = Mask(values=np.array([[255, 0], [255, 255]], dtype=np.uint8))
    truth = Mask(values=np.array([[255, 255], [0, 255]], dtype=np.uint8))
    assert confusion_counts(pred, truth) == Confusion(tp=2, tn=0, fp=1, fn=1)


def test_confusion_shape_mismatch():
    with pytest.raises(ShapeError):
        confusion_counts(np.zeros((2, 3)), np.zeros((3, 2)))


def test_metrics_from_confusion():
    report = metrics_from_confusion(Confusion(tp=50, tn=0, fp=25, fn=25))
    assert report.pixel_jaccard == 0.5
    assert report.pos_accuracy == pytest.approx(2 / 3)
    assert report.neg_accuracy == 0.0
    assert report.balanced_accuracy == pytest.approx(1 / 3)
    assert report.degenerate == ()


def test_perfect_prediction_scores_one():
    report = metrics_from_confusion(Confusion(tp=7, tn=3, fp=0, fn=0))
    assert (report.pixel_jaccard, report.pos_accuracy, report.neg_accuracy, report.balanced_accuracy) == (1, 1, 1, 1)
    assert report.degenerate == ()


def test_zero_true_positives():
    assert metrics_from_confusion(Confusion(tp=0, tn=5, fp=2, fn=3)).pixel_jaccard == 0.0


def test_degenerate_denominators_are_flagged():
    report = metrics_from_confusion(Confusion(tp=0, tn=4, fp=0, fn=0))
    assert report.pixel_jaccard == 0.0
    assert report.pos_accuracy == 0.0
    assert set(report.degenerate) == {"pixel_jaccard", "pos_accuracy"}


def test_auc_closed_forms():
    assert auc_trapezoid(_curve([0, 1], [0, 1])) == 0.5
    assert auc_trapezoid(_curve([0, 0, 1], [0, 1, 1])) == 1.0
    assert auc_trapezoid(_curve([0, 0.5, 1], [0, 1, 1])) == 0.75


def test_roc_examples():
    right = roc_curve([0.9, 0.1], [1, 0])
    assert (0.0, 1.0) in zip(right.fpr.tolist(), right.tpr.tolist())
    assert auc_trapezoid(right) == 1.0
    assert auc_trapezoid(roc_curve([0.1, 0.9], [1, 0])) == 0.0
    constant = roc_curve([0.5] * 6, [1, 0, 1, 0, 0, 1])
    assert constant.fpr.tolist() == [0.0, 1.0]
    assert constant.tpr.tolist() == [0.0, 1.0]
    assert auc_trapezoid(constant) == 0.5


def test_roc_with_tied_scores():
    # The positive ties with one negative: the curve jumps straight to (0.5, 1).
    curve = roc_curve([0.9, 0.9, 0.1], [1, 0, 0])
    assert curve.fpr.tolist() == [0.0, 0.5, 1.0]
    assert curve.tpr.tolist() == [0.0, 1.0, 1.0]
    assert auc_trapezoid(curve) == 0.75


def test_roc_needs_both_classes():
    with pytest.raises(DegenerateLabelsError):
        roc_curve([0.2, 0.4], [1, 1])
    with pytest.raises(DegenerateLabelsError):
        optimal_threshold([0.2, 0.4], [0, 0])


def _mann_whitney(probs, labels):
    pos = probs[labels == 1]
    neg = probs[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (pos.shape[0] * neg.shape[0])


def _random_instance(rng):
    n = int(rng.integers(2, 60))
    labels = rng.integers(0, 2, size=n)
    labels[:2] = [0, 1]
    probs = rng.uniform(0, 1, size=n)
    if rng.uniform() < 0.5:
        # Coarse values force plenty of ties.
        probs = np.round(probs, 1)
    return probs, labels


def test_auc_matches_rank_statistic(rng):
    for _ in range(200):
        probs, labels = _random_instance(rng)
        curve = roc_curve(probs, labels)
        assert np.all(np.diff(curve.fpr) >= 0)
        assert np.all(np.diff(curve.tpr) >= 0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
        assert auc_trapezoid(curve) == pytest.approx(_mann_whitney(probs, labels), abs=1e-12)


def test_optimal_threshold_examples():
    assert optimal_threshold([0.2, 0.8], [0, 1]) == (0.5, 1.0)
    assert optimal_threshold([0.05, 0.3, 0.6, 0.61], [0, 0, 1, 1])[1] == 1.0
    threshold, jaccard = optimal_threshold([0.5] * 5, [1, 1, 0, 0, 0])
    assert threshold == 0.0
    assert jaccard == pytest.approx(2 / 5)


def test_optimal_threshold_prefers_smallest_on_ties():
    # Thresholds 0 and 0.7 both give P_J = 1/2.
    assert optimal_threshold([0.2, 0.4, 0.6, 0.8], [1, 0, 0, 1]) == (0.0, 0.5)
    threshold, jaccard = optimal_threshold([0.2, 0.6, 0.8, 0.9], [0, 1, 0, 1])
    assert jaccard == pytest.approx(2 / 3)
    assert threshold == pytest.approx(0.4)


def test_optimal_threshold_beats_fine_grid(rng):
    grid = np.linspace(0.0, 1.0, 1001)
    for _ in range(200):
        probs, labels = _random_instance(rng)
        threshold, jaccard = optimal_threshold(probs, labels)
        best_on_grid = max(
            metrics_from_confusion(confusion_counts(probs >= t, labels)).pixel_jaccard for t in grid
        )
        assert jaccard >= best_on_grid - 1e-12
        at_threshold = metrics_from_confusion(confusion_counts(probs >= threshold, labels)).pixel_jaccard
        assert at_threshold == pytest.approx(jaccard, abs=1e-12)


def test_evaluate_probabilities():
    report = evaluate_probabilities([0.2, 0.8, 0.9, 0.1], [0, 1, 1, 0])
    assert report.optimal_threshold == pytest.approx(0.5)
    assert report.threshold == report.optimal_threshold
    assert report.pixel_jaccard == 1.0
    assert report.auc == 1.0
    fixed = evaluate_probabilities([0.2, 0.8, 0.9, 0.1], [0, 1, 1, 0], threshold=0.85)
    assert fixed.threshold == 0.85
    assert fixed.optimal_threshold is None
    assert fixed.pixel_jaccard == 0.5


def test_roc_csv(tmp_path, rng):
    probs, labels = _random_instance(rng)
    path = tmp_path / "roc.csv"
    roc_curve(probs, labels).write_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0] == {"threshold": "inf", "fpr": "0.0", "tpr": "0.0"}
    fpr = [float(r["fpr"]) for r in rows]
    assert fpr == sorted(fpr)
    assert (float(rows[-1]["fpr"]), float(rows[-1]["tpr"])) == (1.0, 1.0)


def test_stratified_folds_partition():
    labels = np.array([0] * 5 + [1] * 5)
    fold_of = stratified_folds(labels, 5, seed=0)
    assert np.bincount(fold_of).tolist() == [2] * 5
    for fold in range(5):
        assert sorted(labels[fold_of == fold].tolist()) == [0, 1]


def test_stratified_folds_balance(rng):
    labels = (rng.uniform(size=103) < 0.3).astype(int)
    fold_of = stratified_folds(labels, 4, seed=11)
    sizes = np.bincount(fold_of)
    assert sizes.max() - sizes.min() <= 1
    for cls in (0, 1):
        per_fold = np.bincount(fold_of[labels == cls], minlength=4)
        assert per_fold.max() - per_fold.min() <= 1
    assert np.array_equal(fold_of, stratified_folds(labels, 4, seed=11))


def test_stratified_folds_errors():
    with pytest.raises(ConfigurationError, match="at least 2 folds"):
        stratified_folds([0, 1, 0, 1], 1, seed=0)
    with pytest.raises(ConfigurationError, match="too few"):
        stratified_folds([0, 0, 0, 0, 1, 1], 3, seed=0)


def test_mean_report_is_arithmetic():
    a = MetricsReport(0.2, 0.4, 0.6, 0.5, auc=0.7, optimal_threshold=0.3)
    b = MetricsReport(0.4, 0.8, 1.0, 0.9, auc=0.9, optimal_threshold=0.5, degenerate=("neg_accuracy",))
    mean = mean_report([a, b])
    assert mean.pixel_jaccard == pytest.approx(0.3)
    assert mean.auc == pytest.approx(0.8)
    assert mean.optimal_threshold == pytest.approx(0.4)
    assert mean.degenerate == ("neg_accuracy",)


def test_kfold_on_separable_blobs(rng):
    X, y = blobs(rng)
    report = kfold_cv(X, y, RfConfig(n_estimators=5, max_depth=6, seed=2), folds=5, seed=1)
    assert len(report.folds) == 5
    assert sum(f.n_test for f in report.folds) == 200
    assert all(f.n_train + f.n_test == 200 for f in report.folds)
    assert report.mean_test.pixel_jaccard > 0.8
    assert report.mean_test.pixel_jaccard == pytest.approx(
        np.mean([f.test.pixel_jaccard for f in report.folds]))
    again = kfold_cv(X, y, RfConfig(n_estimators=5, max_depth=6, seed=2), folds=5, seed=1)
    assert again.to_dict() == report.to_dict()


def test_kfold_on_row_subset(rng):
    X, y = blobs(rng)
    rows = np.arange(0, 200, 2)
    report = kfold_cv(X, y, SgdConfig(seed=1), folds=4, seed=0, rows=rows)
    assert sum(f.n_test for f in report.folds) == 100


def test_grid_search_ranks_by_held_out_jaccard(rng):
    X, y = blobs(rng, gap=1.0)
    results = grid_search(X, y, RfConfig(seed=4), {"n_estimators": [1, 6], "max_depth": [2]}, folds=3, seed=0)
    assert [r["params"]["n_estimators"] for r in results] in ([1, 6], [6, 1])
    assert all(r["params"]["max_depth"] == 2 for r in results)
    scores = [r["mean_test"]["pixel_jaccard"] for r in results]
    assert scores == sorted(scores, reverse=True)


def test_grid_search_rejects_unknown_field(rng):
    X, y = blobs(rng)
    with pytest.raises(ConfigurationError, match="Invalid grid parameter"):
        grid_search(X, y, SgdConfig(), {"depth": [1]}, folds=2)


def test_split_halves():
    left, right = split_halves(4, 6)
    assert left.shape == right.shape == (12,)
    assert set((left % 6).tolist()) == {0, 1, 2}
    assert np.array_equal(np.sort(np.r_[left, right]), np.arange(24))
    top, bottom = split_halves(4, 6, axis="rows")
    assert np.array_equal(top, np.arange(12))
    with pytest.raises(ConfigurationError):
        split_halves(4, 6, axis="diagonal")
