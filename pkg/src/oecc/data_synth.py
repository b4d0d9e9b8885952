"""Seeded synthetic in-distribution and OOD families on d-dimensional vectors.

In-distribution data are Gaussian blobs. OOD families are vector analogs of
the usual synthetic image sets: noise families (Gaussian, uniform, Bernoulli,
Rademacher, piecewise-constant "blobs"), and families derived from an
in-distribution base set (pairwise arithmetic / signed geometric means and a
fixed coordinate permutation, the analog of shuffled image patches).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .io_utils import read_csv, write_csv


class Role(str, enum.Enum):
    D_IN_TRAIN = "d_in_train"
    D_IN_VAL = "d_in_val"
    D_IN_TEST = "d_in_test"
    D_OUT_OE = "d_out_oe"
    D_OUT_VAL = "d_out_val"
    D_OUT_TEST = "d_out_test"

    @property
    def in_distribution(self) -> bool:
        return self.value.startswith("d_in")


NOISE_FAMILIES = ("gaussian_noise", "uniform_noise", "bernoulli", "rademacher", "blobs_edges")
DERIVED_FAMILIES = ("arithmetic_mean", "geometric_mean", "permuted")
OOD_FAMILIES = NOISE_FAMILIES + DERIVED_FAMILIES
FAMILIES = ("gaussian_blobs",) + OOD_FAMILIES


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None
    role: Role
    family: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.role = Role(self.role)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if (self.labels is not None) != self.role.in_distribution:
            raise ValueError(f"labels must be present iff role is in-distribution ({self.role.value})")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.features),):
                raise ValueError("one label per sample required")

    def __len__(self):
        return len(self.features)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.features[idx], labels, self.role, self.family)

    def with_role(self, role) -> "Dataset":
        return Dataset(self.features, self.labels, role, self.family)


@dataclass
class SynthSpec:
    dim: int = 8
    classes: int = 2
    family: str = "gaussian_blobs"
    params: dict = field(default_factory=dict)
    seed: int = 0
    count: int = 2000

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.count < 1 or self.dim < 1:
            raise ValueError("count and dim must be >= 1")
        if self.classes < 2:
            raise ValueError("need at least two classes")


def blob_means(dim: int, classes: int, separation: float, scale: float, seed: int, offset: float = 0.0) -> np.ndarray:
    """Class means along random orthogonal directions, neighbours ``separation * scale`` apart.

    The means are centred, then shifted by ``offset`` along a further random
    direction orthogonal to the span of the class means, which moves the data
    away from the origin where the noise families live.
    """
    rng = np.random.default_rng([seed, 7])
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    if classes <= dim:
        dirs = q[:, :classes].T
    else:
        dirs = rng.standard_normal((classes, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs = dirs - dirs.mean(axis=0)
    dists = np.linalg.norm(dirs[:, None] - dirs[None], axis=-1)
    means = dirs * (separation * scale / dists[dists > 0].min())
    if offset:
        if classes >= dim:
            raise ValueError("offset needs classes < dim")
        means = means + offset * q[:, classes]
    return means


def gen_in_distribution(spec: SynthSpec, role=Role.D_IN_TRAIN) -> Dataset:
    if spec.family != "gaussian_blobs":
        raise ValueError("in-distribution data must use the gaussian_blobs family")
    p = spec.params
    scale = float(p.get("scale", 1.0))
    if scale <= 0:
        raise ValueError("scale must be positive")
    if "means" in p:
        means = np.asarray(p["means"], dtype=np.float64)
        if means.shape != (spec.classes, spec.dim):
            raise ValueError(f"means must have shape {(spec.classes, spec.dim)}")
    else:
        # means depend on layout_seed only, so train/test draws share them
        means = blob_means(spec.dim, spec.classes, float(p.get("separation", 10.0)), scale,
                           int(p.get("layout_seed", 0)), float(p.get("offset", 0.0)))
    rng = np.random.default_rng(spec.seed)
    labels = rng.permutation(np.arange(spec.count) % spec.classes)
    features = means[labels] + scale * rng.standard_normal((spec.count, spec.dim))
    return Dataset(features, labels, role, "gaussian_blobs")


def _blobs_edges(rng, n, d, height):
    # piecewise-constant vectors: a few contiguous segments at +-height
    out = np.zeros((n, d))
    for i in range(n):
        for _ in range(rng.integers(1, 3)):
            start = rng.integers(0, d)
            length = rng.integers(1, max(2, d // 2) + 1)
            out[i, start : start + length] = height * rng.choice((-1.0, 1.0))
    return out


def _pairs(rng, n_base, count, pairing):
    if pairing == "identity":
        if count > n_base:
            raise ValueError("identity pairing needs count <= base size")
        idx = np.arange(count)
        return idx, idx
    return rng.integers(0, n_base, count), rng.integers(0, n_base, count)


def gen_ood(spec: SynthSpec, base: Dataset | None = None, role=Role.D_OUT_TEST) -> Dataset:
    fam = spec.family
    if fam not in OOD_FAMILIES:
        raise ValueError(f"{fam!r} is not an OOD family")
    p = spec.params
    rng = np.random.default_rng(spec.seed)
    n, d = spec.count, spec.dim
    if fam in DERIVED_FAMILIES:
        if base is None:
            raise ValueError(f"family {fam!r} needs a base in-distribution dataset")
        if base.dim != d:
            raise ValueError(f"base dim {base.dim} != spec dim {d}")
        x = base.features
        if fam == "permuted":
            perm = np.arange(d)
            while d > 1 and np.array_equal(perm, np.arange(d)):
                perm = rng.permutation(d)
            rows = rng.permutation(len(x))[:n] if n <= len(x) else rng.integers(0, len(x), n)
            feats = x[rows][:, perm]
        else:
            i, j = _pairs(rng, len(x), n, p.get("pairing", "random"))
            a, b = x[i], x[j]
            feats = 0.5 * (a + b) if fam == "arithmetic_mean" else np.sign(a * b) * np.sqrt(np.abs(a * b))
    elif fam == "gaussian_noise":
        feats = float(p.get("loc", 0.0)) + float(p.get("scale", 1.0)) * rng.standard_normal((n, d))
    elif fam == "uniform_noise":
        low, high = float(p.get("low", -1.0)), float(p.get("high", 1.0))
        if not low < high:
            raise ValueError("uniform_noise needs low < high")
        feats = rng.uniform(low, high, (n, d))
    elif fam == "bernoulli":
        prob = float(p.get("p", 0.5))
        if not 0.0 <= prob <= 1.0:
            raise ValueError("bernoulli p must lie in [0, 1]")
        feats = (rng.random((n, d)) < prob).astype(np.float64) * float(p.get("scale", 1.0))
    elif fam == "rademacher":
        feats = rng.choice((-1.0, 1.0), size=(n, d)) * float(p.get("scale", 1.0))
    else:
        feats = _blobs_edges(rng, n, d, float(p.get("height", 1.0)))
    return Dataset(feats, None, role, fam)


@dataclass(frozen=True)
class RoleMap:
    oe: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]

    def families(self, role: Role) -> tuple[str, ...]:
        return {Role.D_OUT_OE: self.oe, Role.D_OUT_VAL: self.val, Role.D_OUT_TEST: self.test}[Role(role)]


DEFAULT_ROLES = RoleMap(
    oe=("uniform_noise",),
    val=("arithmetic_mean", "permuted"),
    test=("gaussian_noise", "rademacher", "bernoulli", "geometric_mean"),
)


def assign_roles(oe=None, val=None, test=None) -> RoleMap:
    """Build an OE / validation / test family split with pairwise-disjoint roles."""
    if oe is None and val is None and test is None:
        return DEFAULT_ROLES
    groups = [tuple(g) if g is not None else () for g in (oe, val, test)]
    if any(not g for g in groups):
        raise ValueError("every role needs at least one family")
    flat = [f for g in groups for f in g]
    for f in flat:
        if f not in OOD_FAMILIES:
            raise ValueError(f"unknown OOD family {f!r}")
    if len(set(flat)) < 3:
        raise ValueError("at least three distinct OOD families are required")
    if len(set(flat)) != len(flat):
        raise ValueError("a family may be used by only one role")
    return RoleMap(*groups)


def gen_ood_mixture(families, dim, count, seed, base=None, params=None, role=Role.D_OUT_TEST) -> Dataset:
    """Equal-share mixture over several families; each family gets its own seed stream."""
    params = params or {}
    parts = []
    shares = np.full(len(families), count // len(families))
    shares[: count % len(families)] += 1
    for idx, (fam, c) in enumerate(zip(families, shares)):
        if c == 0:
            continue
        sub_seed = int(np.random.SeedSequence([seed, idx]).generate_state(1)[0])
        parts.append(gen_ood(SynthSpec(dim, 2, fam, params.get(fam, {}), sub_seed, int(c)), base, role).features)
    return Dataset(np.vstack(parts), None, role, "+".join(families))


# CSV layout: f0..f{d-1}[,label]; roles live in the sidecar manifest.

def save_dataset(ds: Dataset, path) -> None:
    header = [f"f{j}" for j in range(ds.dim)]
    if ds.labels is not None:
        header.append("label")
        rows = ([*map(float, x), int(y)] for x, y in zip(ds.features, ds.labels))
    else:
        rows = (list(map(float, x)) for x in ds.features)
    write_csv(Path(path), header, rows)


def load_dataset(path, role, family="") -> Dataset:
    header, rows = read_csv(path)
    has_label = bool(header) and header[-1] == "label"
    try:
        arr = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric value ({exc})") from None
    if arr.size == 0:
        arr = arr.reshape(0, len(header))
    if arr.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    if has_label:
        return Dataset(arr[:, :-1], arr[:, -1].astype(np.int64), role, family)
    return Dataset(arr, None, role, family)
