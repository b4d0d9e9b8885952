"""Gram-matrix detector for dense activations.

For an activation vector ``a`` the order-p correlation entries are
``(|a_i|^p |a_j|^p)^(1/p) * sign(a_i a_j)`` for ``i <= j``. Training samples
record, per predicted class, layer, order and entry, the range of values
seen. A test sample's deviation from those ranges is summed per layer and
normalized by the mean layer deviation on held-out in-distribution data.

For real activations every order gives ``a_i * a_j`` up to rounding, so the
orders are redundant here. They are kept so signatures match the general form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..core_nn import MlpModel
from .features import layer_features

DEFAULT_ORDERS = (1, 2, 3, 4)
DEV_EPS = 1e-12
NORMALIZER_FLOOR = 1e-12


class StateError(RuntimeError):
    """Raised when a signature is used before it is fully fitted."""


def gram_entries(a, p: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    i, j = np.triu_indices(a.shape[1])
    ai, aj = a[:, i], a[:, j]
    return np.sign(ai * aj) * (np.abs(ai) ** p * np.abs(aj) ** p) ** (1.0 / p)


@dataclass
class GramSignature:
    orders: tuple[int, ...]
    k: int
    mins: list[list[list[np.ndarray]]]  # [class][layer][order] -> entries
    maxs: list[list[list[np.ndarray]]]
    usable: np.ndarray
    normalizers: np.ndarray | None = field(default=None)

    @property
    def num_layers(self) -> int:
        return len(self.mins[int(np.argmax(self.usable))])

    def to_dict(self) -> dict:
        return {
            "kind": "gram",
            "orders": list(self.orders),
            "k": self.k,
            "usable": self.usable.tolist(),
            "mins": self.mins,
            "maxs": self.maxs,
            "normalizers": None if self.normalizers is None else self.normalizers,
        }

    @classmethod
    def from_dict(cls, d) -> "GramSignature":
        def arrs(t):
            return [[[np.asarray(e, dtype=np.float64) for e in layer] for layer in cls_] for cls_ in t]

        norm = d.get("normalizers")
        return cls(tuple(d["orders"]), int(d["k"]), arrs(d["mins"]), arrs(d["maxs"]),
                   np.asarray(d["usable"], dtype=bool), None if norm is None else np.asarray(norm, float))


def assign_classes(sig: GramSignature, logits) -> np.ndarray:
    """Argmax class, restricted to classes that have a usable signature."""
    z = np.where(sig.usable[None, :], np.asarray(logits, dtype=np.float64), -np.inf)
    return np.argmax(z, axis=1)


def fit_gram_features(feats_per_layer, classes, k: int, orders=DEFAULT_ORDERS) -> GramSignature:
    orders = tuple(int(p) for p in orders)
    if not orders or any(p < 1 for p in orders):
        raise ValueError("orders must be a nonempty list of integers >= 1")
    classes = np.asarray(classes)
    usable = np.array([np.any(classes == c) for c in range(k)])
    if not usable.any():
        raise ValueError("no training samples")
    entries = [[gram_entries(f, p) for p in orders] for f in feats_per_layer]
    mins, maxs = [], []
    for c in range(k):
        sel = classes == c
        if not usable[c]:
            mins.append([])
            maxs.append([])
            continue
        mins.append([[e[sel].min(axis=0) for e in layer] for layer in entries])
        maxs.append([[e[sel].max(axis=0) for e in layer] for layer in entries])
    return GramSignature(orders, k, mins, maxs, usable)


def fit_gram(model: MlpModel, x, orders=DEFAULT_ORDERS) -> GramSignature:
    """Fit ranges per predicted class (the class each training sample is assigned to)."""
    feats = layer_features(model, x)
    return fit_gram_features(feats, np.argmax(feats[-1], axis=1), model.num_classes, orders)


def entry_deviation(v, mn, mx) -> np.ndarray:
    """Relative distance of ``v`` outside ``[mn, mx]``; zero inside."""
    below = np.where(v < mn, (mn - v) / (np.abs(mn) + DEV_EPS), 0.0)
    above = np.where(v > mx, (v - mx) / (np.abs(mx) + DEV_EPS), 0.0)
    return below + above


def layer_deviations(sig: GramSignature, feats_per_layer, classes=None) -> np.ndarray:
    """Unnormalized deviations, shape (n, L). Classes default to the logit argmax."""
    if len(feats_per_layer) != sig.num_layers:
        raise ValueError(f"expected {sig.num_layers} layers, got {len(feats_per_layer)}")
    if classes is None:
        classes = assign_classes(sig, feats_per_layer[-1])
    classes = np.asarray(classes)
    n = len(classes)
    out = np.zeros((n, sig.num_layers))
    for c in np.unique(classes):
        if not sig.usable[c]:
            raise ValueError(f"class {c} has no signature")
        sel = classes == c
        for l, f in enumerate(feats_per_layer):
            for o, p in enumerate(sig.orders):
                v = gram_entries(f[sel], p)
                out[sel, l] += entry_deviation(v, sig.mins[c][l][o], sig.maxs[c][l][o]).sum(axis=1)
    return out


def compute_normalizers_features(sig: GramSignature, feats_per_layer, classes=None) -> GramSignature:
    if len(feats_per_layer[0]) == 0:
        raise ValueError("validation partition is empty")
    dev = layer_deviations(sig, feats_per_layer, classes)
    return replace(sig, normalizers=np.maximum(dev.mean(axis=0), NORMALIZER_FLOOR))


def compute_normalizers(sig: GramSignature, model: MlpModel, x_val) -> GramSignature:
    x_val = np.asarray(x_val, dtype=np.float64)
    if x_val.shape[0] == 0:
        raise ValueError("validation partition is empty")
    return compute_normalizers_features(sig, layer_features(model, x_val))


def total_deviation_features(sig: GramSignature, feats_per_layer, classes=None):
    if sig.normalizers is None:
        raise StateError("signature has no normalizers; call compute_normalizers first")
    dev = layer_deviations(sig, feats_per_layer, classes)
    return dev, (dev / sig.normalizers).sum(axis=1)


def gram_deviation(sig: GramSignature, model: MlpModel, x):
    """Returns ``(layer_deviations (n, L), total (n,))``."""
    return total_deviation_features(sig, layer_features(model, x))


def gram_score(sig: GramSignature, model: MlpModel, x) -> np.ndarray:
    return -gram_deviation(sig, model, x)[1]


def validation_partition(n: int, fraction: float = 0.1, seed: int = 0):
    """Random (validation, remainder) index split of ``range(n)``."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    perm = np.random.default_rng([seed, 11]).permutation(n)
    n_val = max(1, int(round(fraction * n)))
    return np.sort(perm[:n_val]), np.sort(perm[n_val:])
