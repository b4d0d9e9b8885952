"""OOD detection and calibration metrics.

Scores follow one convention throughout: higher means more in-distribution.
Equal scores are always treated as a single threshold step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

IN_DIST = "in_dist"
OUT_DIST = "out_dist"


@dataclass(frozen=True)
class ScoredSample:
    score: float
    origin: str

    def __post_init__(self):
        if self.origin not in (IN_DIST, OUT_DIST):
            raise ValueError(f"origin must be {IN_DIST!r} or {OUT_DIST!r}")
        if not math.isfinite(self.score):
            raise ValueError("score must be finite")


def split_scores(samples) -> tuple[np.ndarray, np.ndarray]:
    ins = np.array([s.score for s in samples if s.origin == IN_DIST], dtype=np.float64)
    outs = np.array([s.score for s in samples if s.origin == OUT_DIST], dtype=np.float64)
    return ins, outs


def to_samples(in_scores, out_scores) -> list[ScoredSample]:
    return [ScoredSample(float(s), IN_DIST) for s in in_scores] + [
        ScoredSample(float(s), OUT_DIST) for s in out_scores
    ]


def _check(in_scores, out_scores, need_both=True):
    ins = np.asarray(in_scores, dtype=np.float64).ravel()
    outs = np.asarray(out_scores, dtype=np.float64).ravel()
    if need_both and (ins.size == 0 or outs.size == 0):
        raise ValueError("both in- and out-of-distribution scores are required")
    if not (np.all(np.isfinite(ins)) and np.all(np.isfinite(outs))):
        raise ValueError("scores must be finite")
    return ins, outs


def _rank_needed(fraction_percent, n):
    # smallest k with k / n >= N%; rounding guards 0.95 * 20 = 19.000000000000004
    return max(1, math.ceil(round(fraction_percent * n / 100.0, 9)))


def fpr_at_tpr(in_scores, out_scores, n_percent=95.0) -> float:
    """FPR with OOD as positives, flagged when ``score <= threshold``.

    The threshold is the smallest OOD score that flags at least N% of OOD.
    """
    ins, outs = _check(in_scores, out_scores)
    k = _rank_needed(n_percent, outs.size)
    threshold = np.sort(outs)[k - 1]
    return float(np.mean(ins <= threshold))


def tnr_at_tpr(in_scores, out_scores, n_percent=95.0) -> float:
    """TNR with in-distribution as positives, accepted when ``score >= threshold``.

    The threshold is the largest in-distribution score keeping TPR >= N%.
    """
    ins, outs = _check(in_scores, out_scores)
    k = _rank_needed(n_percent, ins.size)
    threshold = np.sort(ins)[::-1][k - 1]
    return float(np.mean(outs < threshold))


def tnr_at_tpr95(in_scores, out_scores) -> float:
    return tnr_at_tpr(in_scores, out_scores, 95.0)


def _oriented(in_scores, out_scores, positive):
    ins, outs = _check(in_scores, out_scores, need_both=False)
    if positive == IN_DIST:
        return ins, outs
    if positive == OUT_DIST:
        return -outs, -ins
    raise ValueError(f"positive must be {IN_DIST!r} or {OUT_DIST!r}")


def _grouped_counts(pos, neg):
    """Cumulative (tp, fp) at each distinct threshold, scanning scores high to low."""
    scores = np.concatenate([pos, neg])
    is_pos = np.concatenate([np.ones(pos.size), np.zeros(neg.size)])
    order = np.argsort(-scores, kind="mergesort")
    scores, is_pos = scores[order], is_pos[order]
    last = np.r_[scores[1:] != scores[:-1], True]
    tp = np.cumsum(is_pos)[last]
    fp = np.cumsum(1.0 - is_pos)[last]
    return scores[last], tp, fp


def roc_curve(in_scores, out_scores, positive=IN_DIST):
    """ROC points (fpr, tpr, thresholds), starting at (0, 0)."""
    pos, neg = _oriented(in_scores, out_scores, positive)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both classes are required for ROC")
    thr, tp, fp = _grouped_counts(pos, neg)
    fpr = np.r_[0.0, fp / neg.size]
    tpr = np.r_[0.0, tp / pos.size]
    sign = 1.0 if positive == IN_DIST else -1.0
    return fpr, tpr, np.r_[np.inf, sign * thr]


def auroc(in_scores, out_scores, positive=IN_DIST) -> float:
    pos, neg = _oriented(in_scores, out_scores, positive)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both classes are required for AUROC")
    _, tp, fp = _grouped_counts(pos, neg)
    # trapezoids on integer counts, normalized once at the end
    tp = np.r_[0.0, tp]
    fp = np.r_[0.0, fp]
    area = np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])) / 2.0
    return float(area / (pos.size * neg.size))


def aupr(in_scores, out_scores, positive=IN_DIST) -> float:
    """Average precision: sum over recall increments of the precision there."""
    pos, neg = _oriented(in_scores, out_scores, positive)
    if pos.size == 0:
        raise ValueError("no positive samples")
    _, tp, fp = _grouped_counts(pos, neg)
    precision = tp / (tp + fp)
    gained = np.diff(np.r_[0.0, tp])
    return float(np.sum(gained * precision) / pos.size)


def detection_accuracy(in_scores, out_scores) -> float:
    """max over thresholds t of 1/2 P_in(score > t) + 1/2 P_out(score <= t)."""
    ins, outs = _check(in_scores, out_scores)
    cuts = np.r_[-np.inf, np.unique(np.concatenate([ins, outs]))]
    ins_sorted, outs_sorted = np.sort(ins), np.sort(outs)
    in_le = np.searchsorted(ins_sorted, cuts, side="right") / ins.size
    out_le = np.searchsorted(outs_sorted, cuts, side="right") / outs.size
    return float(np.max(0.5 * (1.0 - in_le) + 0.5 * out_le))


def ood_metrics(in_scores, out_scores) -> dict:
    """FPR95 / AUROC / AUPR with OOD as the positive class."""
    return {
        "fpr95": fpr_at_tpr(in_scores, out_scores, 95.0),
        "auroc": auroc(in_scores, out_scores, positive=OUT_DIST),
        "aupr": aupr(in_scores, out_scores, positive=OUT_DIST),
    }


def detector_metrics(in_scores, out_scores) -> dict:
    """TNR95 / AUROC / DAcc / AUPRin / AUPRout with in-distribution as positives."""
    return {
        "tnr95": tnr_at_tpr95(in_scores, out_scores),
        "auroc": auroc(in_scores, out_scores, positive=IN_DIST),
        "dacc": detection_accuracy(in_scores, out_scores),
        "aupr_in": aupr(in_scores, out_scores, positive=IN_DIST),
        "aupr_out": aupr(in_scores, out_scores, positive=OUT_DIST),
    }


@dataclass
class CalibrationBins:
    m: int
    counts: np.ndarray
    accuracy: np.ndarray
    confidence: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    def rows(self):
        e = self.edges
        for i in range(self.m):
            yield e[i], e[i + 1], int(self.counts[i]), float(self.accuracy[i]), float(self.confidence[i])


def bin_index(probs, m: int) -> np.ndarray:
    """Equal-width bins over (0, 1]; a value on an edge goes to the lower bin."""
    idx = np.ceil(np.asarray(probs, dtype=np.float64) * m).astype(np.int64) - 1
    return np.clip(idx, 0, m - 1)


def calibration_errors(max_probs, correct, m: int = 15):
    """Returns ``(ece, mce, CalibrationBins)``; empty bins are skipped."""
    probs = np.asarray(max_probs, dtype=np.float64).ravel()
    correct = np.asarray(correct).ravel().astype(bool)
    if probs.size == 0:
        raise ValueError("no predictions given")
    if probs.shape != correct.shape:
        raise ValueError("max_probs and correct must have the same length")
    if m < 1:
        raise ValueError("m must be >= 1")
    if np.any(probs <= 0) or np.any(probs > 1):
        raise ValueError("probabilities must lie in (0, 1]")
    idx = bin_index(probs, m)
    counts = np.bincount(idx, minlength=m).astype(np.int64)
    safe = np.maximum(counts, 1)
    acc = np.bincount(idx, weights=correct.astype(np.float64), minlength=m) / safe
    conf = np.bincount(idx, weights=probs, minlength=m) / safe
    gaps = np.abs(acc - conf)
    filled = counts > 0
    ece = float(np.sum(counts[filled] / probs.size * gaps[filled]))
    mce = float(gaps[filled].max())
    return ece, mce, CalibrationBins(m, counts, acc, conf)


def score_histogram(scores, bins=20, lo=0.0, hi=1.0):
    """Binned counts (Figure-1 style softmax histogram data)."""
    counts, edges = np.histogram(np.asarray(scores, dtype=np.float64), bins=bins, range=(lo, hi))
    return edges, counts
