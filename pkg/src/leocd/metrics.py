"""Detection and reconstruction quality: confusion counts, ROC/AUC, PSNR,
download curves and per-class score histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .raster import BandStack, BinaryMap, ScoreMap


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def tpr(self) -> float | None:
        pos = self.tp + self.fn
        return self.tp / pos if pos else None

    @property
    def fpr(self) -> float | None:
        neg = self.fp + self.tn
        return self.fp / neg if neg else None

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "tpr": self.tpr, "fpr": self.fpr}


@dataclass(frozen=True)
class RocCurve:
    """ROC points as (threshold, fpr, tpr), thresholds descending.

    The first point uses threshold +inf, giving (0, 0).
    """

    points: list[tuple[float, float, float]]
    auc: float


def _same_shape(a, b, what="maps"):
    if a.shape != b.shape:
        raise DataError(f"{what} differ in geometry: {a.shape} vs {b.shape}")


def confusion(pred: BinaryMap, truth: BinaryMap, subset: np.ndarray | None = None) -> ConfusionCounts:
    _same_shape(pred, truth)
    p, t = pred.as_bool(), truth.as_bool()
    if subset is not None:
        p, t = p[subset], t[subset]
    return ConfusionCounts(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        tn=int(np.sum(~p & ~t)),
        fn=int(np.sum(~p & t)),
    )


def roc_auc(scores: ScoreMap, truth: BinaryMap) -> RocCurve:
    """Empirical ROC with one step per distinct score; trapezoidal AUC.

    Pixels sharing a score move together, so tied (changed, unchanged)
    pairs contribute half, as in the Mann-Whitney statistic.
    """
    _same_shape(scores, truth)
    s = scores.values.ravel()
    y = truth.as_bool().ravel()
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both changed and unchanged pixels")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    tp_cum = np.cumsum(y_sorted)
    fp_cum = np.cumsum(~y_sorted)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    points = [(math.inf, 0.0, 0.0)]
    for e in ends:
        points.append((float(s_sorted[e]), int(fp_cum[e]) / n_neg, int(tp_cum[e]) / n_pos))
    # integrate on integer counts, divide once at the end
    fp_c = np.r_[0, fp_cum[ends]].astype(np.int64)
    tp_c = np.r_[0, tp_cum[ends]].astype(np.int64)
    area2 = int(np.sum((fp_c[1:] - fp_c[:-1]) * (tp_c[1:] + tp_c[:-1])))
    auc = area2 / (2.0 * n_pos * n_neg)
    return RocCurve(points, auc)


def psnr(a: BandStack, b: BandStack, max_value: float) -> float:
    """Peak SNR in dB over all samples; ``math.inf`` for identical inputs."""
    if a.geometry != b.geometry:
        raise DataError(f"images differ in geometry: {a.geometry} vs {b.geometry}")
    if not max_value > 0:
        raise DataError("max_value must be positive")
    mse = float(np.mean((a.samples - b.samples) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def format_db(value: float) -> str | float:
    """Report form of a dB value: the string "inf" stands in for infinity."""
    return "inf" if math.isinf(value) else value


def fraction_selected(scores: ScoreMap, tau: float) -> float:
    return int(np.sum(scores.values >= tau)) / scores.values.size


def cumulative_download_curve(scores: ScoreMap) -> list[tuple[float, float]]:
    """Share of pixels with score >= threshold, thresholds descending."""
    s = np.sort(scores.values.ravel())[::-1]
    n = s.size
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    return [(float(s[e]), (int(e) + 1) / n) for e in ends]


@dataclass(frozen=True)
class ScoreHistograms:
    edges: np.ndarray
    changed: np.ndarray
    unchanged: np.ndarray
    changed_empty: bool
    unchanged_empty: bool


def score_histograms(scores: ScoreMap, truth: BinaryMap, n_bins: int) -> ScoreHistograms:
    """Per-class probability mass over equal-width bins of [0, 1].

    The last bin is closed on the right. An empty class yields zeros and
    the matching ``*_empty`` flag.
    """
    if n_bins < 1:
        raise DataError("n_bins must be >= 1")
    _same_shape(scores, truth)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    t = truth.as_bool()
    out = []
    for sel in (t, ~t):
        counts, _ = np.histogram(scores.values[sel], bins=edges)
        total = counts.sum()
        out.append(counts / total if total else np.zeros(n_bins))
    return ScoreHistograms(edges, out[0], out[1], not t.any(), bool(t.all()))
