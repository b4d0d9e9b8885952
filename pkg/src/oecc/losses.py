"""Cross-entropy, confidence control and total-variation-to-uniform losses.

All losses take logits and return the loss together with its gradient with
respect to those logits, so they plug straight into ``core_nn.backward``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_nn import MlpModel, ShapeError, log_softmax, predict, softmax

LOSS_MODES = ("oecc", "oe")


@dataclass(frozen=True)
class OeccConfig:
    lambda1: float
    lambda2: float
    a_tr: float
    k: int
    mode: str = "oecc"  # "oe": KL-to-uniform comparison baseline on the outlier batch

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        if not 0.0 <= self.a_tr <= 1.0:
            raise ValueError(f"a_tr must lie in [0, 1], got {self.a_tr}")
        if self.k < 2:
            raise ValueError("need at least two classes")
        if self.mode not in LOSS_MODES:
            raise ValueError(f"unknown loss mode {self.mode!r}")


@dataclass(frozen=True)
class LossBreakdown:
    """Weighted loss contributions; ``total`` is their plain sum."""

    ce_term: float
    confidence_term: float
    tv_term: float

    @property
    def total(self) -> float:
        return self.ce_term + self.confidence_term + self.tv_term

    def as_dict(self) -> dict:
        return {"ce": self.ce_term, "conf": self.confidence_term, "tv": self.tv_term, "total": self.total}


def _check_labels(labels, n, k) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.round(labels)):
            raise ValueError("labels must be integers")
        labels = labels.astype(np.int64)
    if n and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    return labels


def cross_entropy(logits, labels) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient (softmax - onehot) / n."""
    z = np.asarray(logits, dtype=np.float64)
    n, k = z.shape
    if n == 0:
        raise ShapeError("empty batch")
    labels = _check_labels(labels, n, k)
    logp = log_softmax(z)
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def tv_distance(probs_row, k: int) -> float:
    """Total variation distance between ``probs_row`` and the uniform law on k classes."""
    p = np.asarray(probs_row, dtype=np.float64)
    if p.shape != (k,):
        raise ShapeError(f"expected a length-{k} probability vector, got shape {p.shape}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("input is not a probability vector")
    return 0.5 * float(np.abs(1.0 / k - p).sum())


def uniform_l1(logits) -> np.ndarray:
    """Per-row sum_l |1/K - p_l|, i.e. twice the TV distance to uniform."""
    p = softmax(logits)
    return np.abs(1.0 / p.shape[1] - p).sum(axis=1)


def _softmax_vjp(p, v):
    # gradient wrt logits of sum_l v_l p_l, row-wise
    return p * (v - (v * p).sum(axis=1, keepdims=True))


def confidence_penalty(logits_in, a_tr: float) -> tuple[float, np.ndarray]:
    """(a_tr - mean max-softmax)^2 and its logit gradient."""
    p = softmax(logits_in)
    n = p.shape[0]
    top = np.argmax(p, axis=1)
    pmax = p[np.arange(n), top]
    gap = a_tr - pmax.mean()
    onehot = np.zeros_like(p)
    onehot[np.arange(n), top] = 1.0
    # d pmax_i / d z_i = p_top (e_top - p)
    grad = -2.0 * gap / n * _softmax_vjp(p, onehot)
    return float(gap**2), grad


def uniform_l1_penalty(logits_oe) -> tuple[float, np.ndarray]:
    """Batch mean of sum_l |1/K - p_l| with subgradient 0 at p_l = 1/K."""
    p = softmax(logits_oe)
    n, k = p.shape
    diff = p - 1.0 / k
    value = np.abs(diff).sum(axis=1).mean()
    return float(value), _softmax_vjp(p, np.sign(diff)) / n


def kl_uniform_penalty(logits_oe) -> tuple[float, np.ndarray]:
    """Cross-entropy to the uniform label (KL to uniform up to a constant)."""
    z = np.asarray(logits_oe, dtype=np.float64)
    n, k = z.shape
    logp = log_softmax(z)
    value = -logp.mean(axis=1).mean()
    return float(value), (np.exp(logp) - 1.0 / k) / n


def oecc_terms(logits_in, labels_in, logits_oe, cfg: OeccConfig):
    """Full OECC objective on one in-distribution and one outlier batch.

    Returns ``(LossBreakdown, grad_in, grad_oe)``.
    """
    z_in = np.asarray(logits_in, dtype=np.float64)
    z_oe = np.asarray(logits_oe, dtype=np.float64)
    if z_in.ndim != 2 or z_in.shape[0] == 0:
        raise ShapeError("logits_in must be a nonempty 2-D batch")
    if z_in.shape[1] != cfg.k:
        raise ShapeError(f"logits have {z_in.shape[1]} classes, config says {cfg.k}")
    if z_oe.size == 0:
        z_oe = z_oe.reshape(0, cfg.k)
    if z_oe.ndim != 2 or z_oe.shape[1] != cfg.k:
        raise ShapeError(f"outlier logits shape {z_oe.shape} incompatible with k={cfg.k}")

    ce, grad_in = cross_entropy(z_in, labels_in)
    conf = 0.0
    if cfg.lambda1 > 0:
        conf_raw, g = confidence_penalty(z_in, cfg.a_tr)
        conf = cfg.lambda1 * conf_raw
        grad_in = grad_in + cfg.lambda1 * g
    tv = 0.0
    grad_oe = np.zeros_like(z_oe)
    if cfg.lambda2 > 0 and z_oe.shape[0] > 0:
        penalty = uniform_l1_penalty if cfg.mode == "oecc" else kl_uniform_penalty
        raw, g = penalty(z_oe)
        tv = cfg.lambda2 * raw
        grad_oe = cfg.lambda2 * g
    return LossBreakdown(ce, conf, tv), grad_in, grad_oe


def estimate_a_tr(model: MlpModel, features, labels) -> float:
    """Training accuracy: fraction of samples whose argmax matches the label."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] == 0:
        raise ValueError("cannot estimate accuracy on an empty set")
    labels = _check_labels(labels, features.shape[0], model.num_classes)
    return float(np.mean(predict(model, features) == labels))
