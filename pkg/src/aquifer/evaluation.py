"""
Confusion-based metrics, ROC/AUC, Jaccard-optimal thresholding and
stratified k-fold cross-validation.

A pixel is predicted positive when its probability is at least the threshold.
"""
import csv
import itertools
import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DegenerateLabelsError, ShapeError
from .learners import LearnerConfig, predict_proba, train_model
from .raster_io import Mask
from .utils import make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Confusion:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsReport:
    pixel_jaccard: float
    pos_accuracy: float
    neg_accuracy: float
    balanced_accuracy: float
    auc: float | None = None
    threshold: float | None = None
    # Only set when the threshold was found by the sweep.
    optimal_threshold: float | None = None
    degenerate: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = asdict(self)
        out["degenerate"] = list(self.degenerate)
        return out


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["threshold", "fpr", "tpr"])
            for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
                writer.writerow([repr(float(t)), repr(float(f)), repr(float(p))])


def _as_binary(values) -> np.ndarray:
    if isinstance(values, Mask):
        return values.positives().reshape(-1)
    return np.asarray(values).reshape(-1) > 0


def _truth_labels(truth) -> np.ndarray:
    labels = _as_binary(truth)
    if labels.all() or not labels.any():
        raise DegenerateLabelsError("Both classes must be present in the ground truth.")
    return labels


def confusion_counts(predicted, truth) -> Confusion:
    pred_shape = predicted.values.shape if isinstance(predicted, Mask) else np.shape(predicted)
    truth_shape = truth.values.shape if isinstance(truth, Mask) else np.shape(truth)
    if pred_shape != truth_shape:
        raise ShapeError(f"Prediction shape {pred_shape} does not match truth shape {truth_shape}.")
    pred = _as_binary(predicted)
    true = _as_binary(truth)
    tp = int(np.count_nonzero(pred & true))
    fp = int(np.count_nonzero(pred & ~true))
    fn = int(np.count_nonzero(~pred & true))
    return Confusion(tp=tp, tn=pred.shape[0] - tp - fp - fn, fp=fp, fn=fn)


def metrics_from_confusion(c: Confusion) -> MetricsReport:
    """
    Zero denominators give a metric of 0 and are listed in ``degenerate``.
    """
    degenerate = []

    def ratio(num: int, den: int, name: str) -> float:
        if den == 0:
            degenerate.append(name)
            return 0.0
        return num / den

    pixel_jaccard = ratio(c.tp, c.tp + c.fn + c.fp, "pixel_jaccard")
    pos_accuracy = ratio(c.tp, c.tp + c.fn, "pos_accuracy")
    neg_accuracy = ratio(c.tn, c.fp + c.tn, "neg_accuracy")
    return MetricsReport(
        pixel_jaccard=pixel_jaccard,
        pos_accuracy=pos_accuracy,
        neg_accuracy=neg_accuracy,
        balanced_accuracy=(pos_accuracy + neg_accuracy) / 2.0,
        degenerate=tuple(degenerate),
    )


def roc_curve(probs, truth) -> RocCurve:
    """
    Sweeps thresholds over the distinct probabilities in descending order,
    starting from (0, 0); the last point is always (1, 1).
    """
    labels = _truth_labels(truth)
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    if probs.shape != labels.shape:
        raise ShapeError(f"Got {probs.shape[0]} probabilities for {labels.shape[0]} labels.")
    order = np.argsort(-probs, kind="stable")
    p_sorted = probs[order]
    hits = labels[order].astype(np.int64)
    # Last index of each run of equal probabilities.
    ends = np.flatnonzero(np.r_[p_sorted[1:] != p_sorted[:-1], True])
    tps = np.cumsum(hits)[ends]
    fps = ends + 1 - tps
    n_pos = int(hits.sum())
    n_neg = hits.shape[0] - n_pos
    return RocCurve(
        fpr=np.r_[0.0, fps / n_neg],
        tpr=np.r_[0.0, tps / n_pos],
        thresholds=np.r_[np.inf, p_sorted[ends]],
    )


def auc_trapezoid(curve: RocCurve) -> float:
    f, t = curve.fpr, curve.tpr
    return float(np.sum((f[1:] - f[:-1]) * (t[:-1] + t[1:]) / 2.0))


def candidate_thresholds(probs: np.ndarray) -> np.ndarray:
    distinct = np.unique(probs)
    return np.unique(np.r_[0.0, (distinct[:-1] + distinct[1:]) / 2.0, 1.0])


def optimal_threshold(probs, truth) -> tuple[float, float]:
    """
    Returns ``(threshold, pixel_jaccard)`` maximizing Pixel Jaccard over the
    candidate set (0, 1 and midpoints between consecutive distinct
    probabilities); ties go to the smallest threshold.
    """
    labels = _truth_labels(truth)
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    if probs.shape != labels.shape:
        raise ShapeError(f"Got {probs.shape[0]} probabilities for {labels.shape[0]} labels.")
    candidates = candidate_thresholds(probs)
    pos = np.sort(probs[labels])
    neg = np.sort(probs[~labels])
    tp = pos.shape[0] - np.searchsorted(pos, candidates, side="left")
    fp = neg.shape[0] - np.searchsorted(neg, candidates, side="left")
    jaccard = tp / (pos.shape[0] + fp)
    best = int(np.argmax(jaccard))
    return float(candidates[best]), float(jaccard[best])


def evaluate_probabilities(probs, truth, threshold: float | None = None) -> MetricsReport:
    """
    Full report for a probability vector. Without ``threshold`` the
    Jaccard-optimal one is searched and recorded as ``optimal_threshold``.
    """
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    labels = _truth_labels(truth)
    swept = None
    if threshold is None:
        threshold, _ = optimal_threshold(probs, labels)
        swept = float(threshold)
    report = metrics_from_confusion(confusion_counts(probs >= threshold, labels))
    auc = auc_trapezoid(roc_curve(probs, labels))
    return replace(report, auc=auc, threshold=float(threshold), optimal_threshold=swept)


# --- Cross-validation ---

@dataclass(frozen=True)
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    test: MetricsReport
    train: MetricsReport

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "test": self.test.to_dict(),
            "train": self.train.to_dict(),
        }


@dataclass(frozen=True)
class CvReport:
    folds: tuple[FoldResult, ...]
    mean_test: MetricsReport
    mean_train: MetricsReport

    def to_dict(self) -> dict:
        return {
            "folds": [f.to_dict() for f in self.folds],
            "mean": {"test": self.mean_test.to_dict(), "train": self.mean_train.to_dict()},
        }


def mean_report(reports: list[MetricsReport]) -> MetricsReport:
    values = {}
    for f in fields(MetricsReport):
        if f.name == "degenerate":
            continue
        column = [getattr(r, f.name) for r in reports]
        values[f.name] = None if any(v is None for v in column) else math.fsum(column) / len(column)
    degenerate = tuple(sorted({name for r in reports for name in r.degenerate}))
    return MetricsReport(degenerate=degenerate, **values)


def stratified_folds(labels, folds: int, seed: int) -> np.ndarray:
    """
    Fold id per sample. Each class is shuffled and dealt round-robin, the
    dealing continuing from one class to the next, so fold sizes and per-fold
    class counts differ by at most one.
    """
    labels = np.asarray(labels).reshape(-1)
    if folds < 2:
        raise ConfigurationError(f"Cross-validation needs at least 2 folds, got {folds}.")
    rng = make_rng(seed, 4)
    fold_of = np.empty(labels.shape[0], dtype=np.int64)
    dealt = 0
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        if members.shape[0] < folds:
            raise ConfigurationError(
                f"Class {cls} has {members.shape[0]} samples, too few to stratify into {folds} folds."
            )
        shuffled = rng.permutation(members)
        fold_of[shuffled] = (dealt + np.arange(shuffled.shape[0])) % folds
        dealt += shuffled.shape[0]
    return fold_of


def kfold_cv(X, y, cfg: LearnerConfig, folds: int = 5, seed: int = 0, rows=None, threads: int = 1) -> CvReport:
    """
    Trains on k-1 folds, picks the Jaccard-optimal threshold on the held-out
    fold and scores both the held-out and the training rows at it.
    """
    y = np.asarray(y).reshape(-1)
    indices = np.arange(y.shape[0]) if rows is None else np.sort(np.asarray(rows, dtype=np.int64))
    labels = y[indices]
    fold_of = stratified_folds(labels, folds, seed)
    results = []
    for fold in range(folds):
        train_idx = indices[fold_of != fold]
        test_idx = indices[fold_of == fold]
        model = train_model(X, y, cfg, rows=train_idx, threads=threads)
        test_probs = predict_proba(model, X, rows=test_idx)
        test_report = evaluate_probabilities(test_probs, y[test_idx])
        train_probs = predict_proba(model, X, rows=train_idx)
        train_report = evaluate_probabilities(train_probs, y[train_idx], threshold=test_report.threshold)
        logger.info("Fold %d/%d: P_J %.4f, AUC %.4f", fold + 1, folds, test_report.pixel_jaccard, test_report.auc)
        results.append(FoldResult(fold, train_idx.shape[0], test_idx.shape[0], test_report, train_report))
    return CvReport(
        folds=tuple(results),
        mean_test=mean_report([r.test for r in results]),
        mean_train=mean_report([r.train for r in results]),
    )


def grid_search(X, y, base_cfg: LearnerConfig, grid: dict[str, list], folds: int = 5, seed: int = 0,
                rows=None, threads: int = 1) -> list[dict]:
    """
    Cross-validates every combination in ``grid`` (field name -> values) and
    returns the results best first by mean held-out Pixel Jaccard.
    """
    names = sorted(grid)
    results = []
    for combo in itertools.product(*(grid[name] for name in names)):
        params = dict(zip(names, combo))
        try:
            cfg = replace(base_cfg, **params)
        except TypeError as e:
            raise ConfigurationError(f"Invalid grid parameter: {e}")
        report = kfold_cv(X, y, cfg, folds=folds, seed=seed, rows=rows, threads=threads)
        results.append({"params": params, "mean_test": report.mean_test.to_dict(),
                        "mean_train": report.mean_train.to_dict()})
    results.sort(key=lambda r: -r["mean_test"]["pixel_jaccard"])
    return results


def split_halves(height: int, width: int, axis: str = "columns") -> tuple[np.ndarray, np.ndarray]:
    """
    Row-major pixel indices of the first and second half of the image, split
    into left/right (``columns``) or top/bottom (``rows``).
    """
    rows, cols = np.indices((height, width))
    if axis == "columns":
        first = cols < width // 2
    elif axis == "rows":
        first = rows < height // 2
    else:
        raise ConfigurationError(f"axis must be 'columns' or 'rows', got {axis!r}.")
    first = first.reshape(-1)
    return np.flatnonzero(first), np.flatnonzero(~first)
