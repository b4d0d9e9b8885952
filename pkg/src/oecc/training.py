"""Two-stage training: cross-entropy pretraining, then OECC fine-tuning.

Each stage draws its shuffling from its own seeded stream, so a stage's
trajectory depends only on (seed, stage) and the data it is given.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .core_nn import MlpModel, MomentumState, backward, cosine_lr, forward, init_mlp, sgd_momentum_step, softmax
from .data_synth import Dataset, Role
from .losses import LossBreakdown, OeccConfig, cross_entropy, estimate_a_tr, oecc_terms
from .metrics import auroc, fpr_at_tpr

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (0.03, 0.06, 0.09, 0.12)
OE_REFERENCE_BATCH = 256

# rng stream ids per stage
PRETRAIN_STREAM = 1
FINETUNE_IN_STREAM = 2
FINETUNE_OE_STREAM = 3
INIT_STREAM = 4


@dataclass
class TrainConfig:
    seed: int = 0
    hidden: tuple[int, ...] = (32, 32)
    activation: str = "relu"
    pretrain_epochs: int = 100
    finetune_epochs: int = 30
    lr_pretrain: float = 0.1
    lr_finetune: float = 0.01
    batch_in: int = 128
    batch_oe: int = 256
    momentum: float = 0.9
    lambda1: float = 0.06
    lambda2: float = 0.06
    lambda1_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    lambda2_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    loss_mode: str = "oecc"

    def __post_init__(self):
        if self.batch_in < 1 or self.batch_oe < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.lr_pretrain <= 0 or self.lr_finetune <= 0:
            raise ValueError("learning rates must be positive")
        if self.pretrain_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be nonnegative")

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}

    @classmethod
    def from_mapping(cls, raw: dict) -> "TrainConfig":
        """Build from key=value pairs (strings or already-typed values); unknown keys are rejected."""
        defaults = cls()
        kwargs = {}
        for key, value in raw.items():
            if not hasattr(defaults, key):
                raise ValueError(f"unknown training config key {key!r}")
            default = getattr(defaults, key)
            if isinstance(default, tuple):
                items = value.replace(",", " ").split() if isinstance(value, str) else value
                elem = int if key == "hidden" else float
                kwargs[key] = tuple(elem(v) for v in items)
            else:
                kwargs[key] = type(default)(value)
        return cls(**kwargs)


def oecc_config(cfg: TrainConfig, a_tr: float, k: int, lambda1=None, lambda2=None) -> OeccConfig:
    """Loss config for fine-tuning.

    Lambdas are given relative to a 256-row outlier batch whose penalty is
    summed rather than averaged; the loss averages, so both regularizer
    weights are multiplied by that reference batch size. The KL baseline
    keeps its plain mean.
    """
    l1 = cfg.lambda1 if lambda1 is None else lambda1
    l2 = cfg.lambda2 if lambda2 is None else lambda2
    if cfg.loss_mode == "oecc":
        l1, l2 = l1 * OE_REFERENCE_BATCH, l2 * OE_REFERENCE_BATCH
    return OeccConfig(l1, l2, a_tr, k, cfg.loss_mode)


def stage_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def build_model(cfg: TrainConfig, input_dim: int, k: int) -> MlpModel:
    return init_mlp([input_dim, *cfg.hidden, k], seed=[cfg.seed, INIT_STREAM], activation=cfg.activation)


def steps_per_epoch(n: int, batch: int) -> int:
    return math.ceil(n / batch)


def _check_labeled(ds: Dataset):
    if ds.labels is None or len(ds) == 0:
        raise ValueError("training needs a nonempty labeled in-distribution dataset")


def train_cross_entropy(model: MlpModel, x, y, epochs: int, lr0: float, batch: int, momentum: float,
                        rng: np.random.Generator, history: list | None = None, stage="pretrain") -> MlpModel:
    """Plain CE training with SGD momentum and a per-epoch cosine schedule."""
    model = model.copy()
    state = MomentumState()
    n = len(x)
    for epoch in range(epochs):
        lr = cosine_lr(epoch, epochs, lr0)
        order = rng.permutation(n)
        total = 0.0
        for s in range(steps_per_epoch(n, batch)):
            idx = order[s * batch : (s + 1) * batch]
            trace = forward(model, x[idx])
            loss, g = cross_entropy(trace.logits, y[idx])
            sgd_momentum_step(model, backward(model, trace, g), lr, state, momentum)
            total += loss
        if history is not None:
            ce = total / steps_per_epoch(n, batch)
            history.append({"stage": stage, "epoch": epoch, "ce": ce, "conf": 0.0, "tv": 0.0, "total": ce, "lr": lr})
    return model


def pretrain(model: MlpModel, d_in_train: Dataset, cfg: TrainConfig, history: list | None = None):
    """Cross-entropy stage. Returns ``(model, a_tr)`` with a_tr frozen from the trained model."""
    _check_labeled(d_in_train)
    model = train_cross_entropy(model, d_in_train.features, d_in_train.labels, cfg.pretrain_epochs,
                                cfg.lr_pretrain, cfg.batch_in, cfg.momentum, stage_rng(cfg.seed, PRETRAIN_STREAM), history)
    return model, estimate_a_tr(model, d_in_train.features, d_in_train.labels)


def _cycle_batches(n: int, batch: int, rng: np.random.Generator):
    """Endless minibatch indices; reshuffles on every pass over the data."""
    buf = np.empty(0, dtype=np.int64)
    while True:
        while len(buf) < batch:
            buf = np.concatenate([buf, rng.permutation(n)])
        yield buf[:batch]
        buf = buf[batch:]


def finetune_oecc(model: MlpModel, d_in_train: Dataset, d_out_oe: Dataset, cfg: TrainConfig, oecc_cfg: OeccConfig,
                  history: list | None = None) -> MlpModel:
    """OECC stage: every step uses ``batch_in`` labeled and ``batch_oe`` outlier rows.

    Both batches go through one forward pass and are split at the loss.
    """
    _check_labeled(d_in_train)
    if len(d_out_oe) == 0:
        raise ValueError("outlier exposure set is empty")
    if oecc_cfg.k != model.num_classes:
        raise ValueError(f"config k={oecc_cfg.k} but model has {model.num_classes} classes")
    model = model.copy()
    state = MomentumState()
    x, y = d_in_train.features, d_in_train.labels
    x_oe = d_out_oe.features
    n = len(x)
    rng_in = stage_rng(cfg.seed, FINETUNE_IN_STREAM)
    oe_batches = _cycle_batches(len(x_oe), cfg.batch_oe, stage_rng(cfg.seed, FINETUNE_OE_STREAM))
    n_steps = steps_per_epoch(n, cfg.batch_in)
    for epoch in range(cfg.finetune_epochs):
        lr = cosine_lr(epoch, cfg.finetune_epochs, cfg.lr_finetune)
        order = rng_in.permutation(n)
        sums = np.zeros(3)
        for s in range(n_steps):
            idx = order[s * cfg.batch_in : (s + 1) * cfg.batch_in]
            oe_idx = next(oe_batches)
            trace = forward(model, np.vstack([x[idx], x_oe[oe_idx]]))
            m = len(idx)
            parts, g_in, g_oe = oecc_terms(trace.logits[:m], y[idx], trace.logits[m:], oecc_cfg)
            grads = backward(model, trace, np.vstack([g_in, g_oe]))
            sgd_momentum_step(model, grads, lr, state, cfg.momentum)
            sums += (parts.ce_term, parts.confidence_term, parts.tv_term)
        if history is not None:
            ce, conf, tv = (float(v) for v in sums / n_steps)
            history.append({"stage": "finetune", "epoch": epoch, "ce": ce, "conf": conf, "tv": tv,
                            "total": LossBreakdown(ce, conf, tv).total, "lr": lr})
    return model


def msp(model: MlpModel, x) -> np.ndarray:
    return softmax(forward(model, x).logits).max(axis=1)


@dataclass
class TuneReport:
    cells: list[dict] = field(default_factory=list)
    selected: tuple[float, float] | None = None


def cell_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _families(ds: Dataset) -> set[str]:
    return {f for f in ds.family.split("+") if f}


def tune_lambdas(model_factory, datasets: dict, cfg: TrainConfig):
    """Grid search over (lambda1, lambda2) by validation FPR95.

    ``model_factory()`` returns a fresh ``(pretrained_model, a_tr)``. Each cell
    is fine-tuned with its own seed derived from ``cfg.seed`` and the cell
    index. Ties on FPR95 go to the higher AUROC, then the smaller lambda2, then
    the smaller lambda1.
    """
    if not cfg.lambda1_grid or not cfg.lambda2_grid:
        raise ValueError("lambda grids must be nonempty")
    roles = {r.value for r in Role}
    ds = {Role(k): v for k, v in datasets.items() if k in roles}
    for role in (Role.D_IN_TRAIN, Role.D_IN_VAL, Role.D_OUT_OE, Role.D_OUT_VAL):
        if role not in ds:
            raise ValueError(f"missing dataset for role {role.value}")
    if Role.D_OUT_TEST in ds and _families(ds[Role.D_OUT_VAL]) & _families(ds[Role.D_OUT_TEST]):
        raise ValueError("validation and test OOD families overlap")
    report = TuneReport()
    best_key = None
    for index, (l1, l2) in enumerate(itertools.product(cfg.lambda1_grid, cfg.lambda2_grid)):
        model, a_tr = model_factory()
        cell_cfg = replace(cfg, seed=cell_seed(cfg.seed, index))
        ocfg = oecc_config(cfg, a_tr, model.num_classes, l1, l2)
        tuned = finetune_oecc(model, ds[Role.D_IN_TRAIN], ds[Role.D_OUT_OE], cell_cfg, ocfg)
        s_in = msp(tuned, ds[Role.D_IN_VAL].features)
        s_out = msp(tuned, ds[Role.D_OUT_VAL].features)
        fpr = fpr_at_tpr(s_in, s_out, 95.0)
        auc = auroc(s_in, s_out, positive="out_dist")
        report.cells.append({"lambda1": l1, "lambda2": l2, "fpr95": fpr, "auroc": auc, "seed": cell_cfg.seed})
        key = (fpr, -auc, l2, l1)
        if best_key is None or key < best_key:
            best_key = key
            report.selected = (l1, l2)
        log.info("lambda1=%g lambda2=%g fpr95=%.4f auroc=%.4f", l1, l2, fpr, auc)
    return report.selected[0], report.selected[1], report
