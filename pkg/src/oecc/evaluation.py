"""Model-level evaluation: MSP detection, calibration and post-training detectors."""

from __future__ import annotations

import numpy as np

from .core_nn import MlpModel, predict
from .data_synth import Dataset
from .detectors.gram import (
    DEFAULT_ORDERS,
    compute_normalizers,
    fit_gram,
    gram_score,
    validation_partition,
)
from .detectors.mahalanobis import DEFAULT_EPSILONS, MahalanobisDetector
from .detectors.msp import msp_score
from .metrics import aupr, auroc, calibration_errors, detector_metrics, fpr_at_tpr

AUPR_OUT_RATIO = 0.2  # OOD : in-distribution = 1 : 5


def ratio_subset(out_scores, n_in, ratio=AUPR_OUT_RATIO):
    """Leading OOD scores such that len(out) = ratio * n_in (at least 1)."""
    k = max(1, min(len(out_scores), int(round(ratio * n_in))))
    return np.asarray(out_scores)[:k]


def msp_ood_metrics(in_scores, out_scores) -> dict:
    """FPR95 and AUROC on everything; AUPR (OOD positive) on a 1:5 OOD:in subset."""
    return {
        "fpr95": fpr_at_tpr(in_scores, out_scores, 95.0),
        "auroc": auroc(in_scores, out_scores, positive="out_dist"),
        "aupr": aupr(in_scores, ratio_subset(out_scores, len(in_scores)), positive="out_dist"),
    }


def evaluate_msp(model: MlpModel, d_in_test: Dataset, d_out_test: Dataset) -> dict:
    s_in = msp_score(model, d_in_test.features)
    s_out = msp_score(model, d_out_test.features)
    out = msp_ood_metrics(s_in, s_out)
    out["accuracy"] = float(np.mean(predict(model, d_in_test.features) == d_in_test.labels))
    return out


def calibration_report(model: MlpModel, d_in_test: Dataset, m: int = 15):
    probs = msp_score(model, d_in_test.features)
    correct = predict(model, d_in_test.features) == d_in_test.labels
    ece, mce, bins = calibration_errors(probs, correct, m)
    return {"ece": ece, "mce": mce, "m": m, "n": int(len(probs))}, bins


def evaluate_mahalanobis(model, d_in_train, d_in_val, d_out_val, d_in_test, d_out_test, epsilons=DEFAULT_EPSILONS):
    det = MahalanobisDetector.fit(model, d_in_train.features, d_in_train.labels,
                                  d_in_val.features, d_out_val.features, epsilons)
    metrics = detector_metrics(det.score(model, d_in_test.features), det.score(model, d_out_test.features))
    metrics["epsilon"] = det.epsilon
    return metrics, det


def evaluate_gram(model, d_in_train, d_in_test, d_out_test, orders=DEFAULT_ORDERS, val_fraction=0.1, seed=0):
    """Normalizers come from a random partition of the in-distribution test set,
    which is then excluded from scoring."""
    sig = fit_gram(model, d_in_train.features, orders)
    val_idx, rest_idx = validation_partition(len(d_in_test), val_fraction, seed)
    sig = compute_normalizers(sig, model, d_in_test.features[val_idx])
    metrics = detector_metrics(gram_score(sig, model, d_in_test.features[rest_idx]),
                               gram_score(sig, model, d_out_test.features))
    return metrics, sig
