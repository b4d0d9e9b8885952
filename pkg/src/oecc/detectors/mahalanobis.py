"""Mahalanobis detector: class-conditional Gaussians with a tied covariance.

Per layer, the confidence score of a feature vector is the negative squared
Mahalanobis distance to the closest class mean. Optional input preprocessing
nudges the input along the sign of the score gradient, and a logistic
regression over the per-layer scores combines them into a single score.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..core_nn import MlpModel, backward_from, forward
from ..metrics import auroc
from .features import layer_features

log = logging.getLogger(__name__)

DEFAULT_EPSILONS = (0.0, 0.0005, 0.001, 0.002, 0.005, 0.01)


@dataclass
class LayerGaussian:
    means: np.ndarray  # (K, d)
    covariance: np.ndarray  # (d, d), regularized
    precision: np.ndarray

    @classmethod
    def from_moments(cls, means, covariance):
        covariance = np.asarray(covariance, dtype=np.float64)
        return cls(np.asarray(means, dtype=np.float64), covariance, np.linalg.inv(covariance))


@dataclass
class GaussianStats:
    layers: list[LayerGaussian]

    @property
    def num_classes(self) -> int:
        return self.layers[0].means.shape[0]

    def to_dict(self) -> dict:
        return {"layers": [{"means": g.means, "covariance": g.covariance, "precision": g.precision} for g in self.layers]}

    @classmethod
    def from_dict(cls, d) -> "GaussianStats":
        return cls([
            LayerGaussian(np.asarray(g["means"], float), np.asarray(g["covariance"], float), np.asarray(g["precision"], float))
            for g in d["layers"]
        ])


def tied_gaussian(feats, labels, k: int) -> LayerGaussian:
    feats = np.asarray(feats, dtype=np.float64)
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=k)
    if counts.size > k:
        raise ValueError(f"labels exceed class count {k}")
    if np.any(counts < 2):
        raise ValueError(f"every class needs at least 2 samples, got counts {counts.tolist()}")
    d = feats.shape[1]
    means = np.stack([feats[labels == c].mean(axis=0) for c in range(k)])
    centered = feats - means[labels]
    cov = centered.T @ centered / len(feats)
    # relative ridge, floored so identical points still give an invertible matrix
    eps = max(1e-6 * np.trace(cov) / d, 1e-12)
    return LayerGaussian.from_moments(means, cov + eps * np.eye(d))


def fit_gaussian_stats(feats_per_layer, labels, k: int) -> GaussianStats:
    return GaussianStats([tied_gaussian(f, labels, k) for f in feats_per_layer])


def fit_mahalanobis(model: MlpModel, x, labels) -> GaussianStats:
    return fit_gaussian_stats(layer_features(model, x), labels, model.num_classes)


def _closest(g: LayerGaussian, f):
    diff = f[:, None, :] - g.means[None, :, :]  # (n, K, d)
    dist = np.einsum("nkd,de,nke->nk", diff, g.precision, diff)
    c = np.argmin(dist, axis=1)
    return -dist[np.arange(len(f)), c], c


def layer_score(g: LayerGaussian, feats) -> np.ndarray:
    return _closest(g, np.asarray(feats, dtype=np.float64))[0]


def mahalanobis_score(stats: GaussianStats, feats_per_layer) -> np.ndarray:
    """(n, L) matrix of per-layer scores; 0 is the maximum, reached at a class mean."""
    if len(feats_per_layer) != len(stats.layers):
        raise ValueError(f"expected {len(stats.layers)} layers, got {len(feats_per_layer)}")
    cols = []
    for g, f in zip(stats.layers, feats_per_layer):
        f = np.asarray(f, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != g.means.shape[1]:
            raise ValueError(f"feature dim {f.shape} does not match layer dim {g.means.shape[1]}")
        cols.append(layer_score(g, f))
    return np.column_stack(cols)


def score_input_gradient(model: MlpModel, stats: GaussianStats, x, layer: int) -> np.ndarray:
    """Gradient of the closest-class score at ``layer`` with respect to the input."""
    trace = forward(model, x)
    g = stats.layers[layer]
    f = trace.post[layer]
    _, c = _closest(g, f)
    upstream = -2.0 * (f - g.means[c]) @ g.precision
    return backward_from(model, trace, layer, upstream).inputs


def input_preprocess(model: MlpModel, stats: GaussianStats, x, epsilon: float, layer: int | None = None) -> np.ndarray:
    """x + epsilon * sign(grad_x score): a step that raises the confidence score."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if epsilon == 0:
        return x.copy()
    layer = len(stats.layers) - 1 if layer is None else layer
    return x + epsilon * np.sign(score_input_gradient(model, stats, x, layer))


def layer_scores(model: MlpModel, stats: GaussianStats, x, epsilon: float = 0.0) -> np.ndarray:
    """Per-layer scores, each computed on the input preprocessed for that layer."""
    if epsilon == 0:
        return mahalanobis_score(stats, layer_features(model, x))
    cols = []
    for l, g in enumerate(stats.layers):
        xh = input_preprocess(model, stats, x, epsilon, l)
        cols.append(layer_score(g, forward(model, xh).post[l]))
    return np.column_stack(cols)


@dataclass
class EnsembleWeights:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray

    def score(self, scores) -> np.ndarray:
        """Logit of the ensemble; monotone in the in-distribution probability."""
        return ((np.asarray(scores) - self.mean) / self.std) @ self.weights + self.bias

    def to_dict(self) -> dict:
        return {"weights": self.weights, "bias": self.bias, "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d) -> "EnsembleWeights":
        return cls(np.asarray(d["weights"], float), float(d["bias"]), np.asarray(d["mean"], float), np.asarray(d["std"], float))


def fit_logistic(scores_in, scores_out, tol=1e-6, max_iter=10_000) -> EnsembleWeights:
    """Logistic regression (in = 1, out = 0) by full-batch gradient descent."""
    s_in = np.atleast_2d(np.asarray(scores_in, dtype=np.float64))
    s_out = np.atleast_2d(np.asarray(scores_out, dtype=np.float64))
    if s_in.shape[0] == 0 or s_out.shape[0] == 0:
        raise ValueError("both validation sets must be nonempty")
    x = np.vstack([s_in, s_out])
    y = np.r_[np.ones(len(s_in)), np.zeros(len(s_out))]
    n, L = x.shape
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    if np.all(std == 0):
        log.warning("degenerate validation scores; falling back to uniform layer weights")
        return EnsembleWeights(np.full(L, 1.0 / L), 0.0, mean, np.ones(L))
    std = np.where(std > 0, std, 1.0)
    xa = np.hstack([(x - mean) / std, np.ones((n, 1))])
    # step 1/L for the logistic loss, L = lambda_max(X^T X) / (4n)
    lr = 4.0 * n / np.linalg.eigvalsh(xa.T @ xa)[-1]
    theta = np.zeros(L + 1)
    for _ in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-np.clip(xa @ theta, -500, 500)))
        grad = xa.T @ (p - y) / n
        if np.linalg.norm(grad) < tol:
            break
        theta -= lr * grad
    return EnsembleWeights(theta[:L], float(theta[L]), mean, std)


def fit_ensemble(stats: GaussianStats, model: MlpModel, val_in, val_out, epsilon: float = 0.0) -> EnsembleWeights:
    return fit_logistic(layer_scores(model, stats, val_in, epsilon), layer_scores(model, stats, val_out, epsilon))


@dataclass
class MahalanobisDetector:
    stats: GaussianStats
    ensemble: EnsembleWeights
    epsilon: float = 0.0

    @classmethod
    def fit(cls, model, x_train, y_train, val_in, val_out, epsilons=DEFAULT_EPSILONS):
        """Fit Gaussians, then pick the noise magnitude by validation AUROC."""
        stats = fit_mahalanobis(model, x_train, y_train)
        best = None
        for eps in epsilons:
            s_in = layer_scores(model, stats, val_in, eps)
            s_out = layer_scores(model, stats, val_out, eps)
            ens = fit_logistic(s_in, s_out)
            a = auroc(ens.score(s_in), ens.score(s_out))
            if best is None or a > best[0]:
                best = (a, eps, ens)
        return cls(stats, best[2], best[1])

    def score(self, model, x) -> np.ndarray:
        return self.ensemble.score(layer_scores(model, self.stats, x, self.epsilon))

    def to_dict(self) -> dict:
        return {"kind": "mahalanobis", "epsilon": self.epsilon, "stats": self.stats.to_dict(), "ensemble": self.ensemble.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "MahalanobisDetector":
        return cls(GaussianStats.from_dict(d["stats"]), EnsembleWeights.from_dict(d["ensemble"]), float(d["epsilon"]))
