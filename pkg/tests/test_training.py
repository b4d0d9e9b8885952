import math
from dataclasses import replace

import numpy as np
import pytest

import oecc.training as training
from oecc.benchmark import BenchmarkConfig, make_datasets
from oecc.core_nn import dumps_checkpoint
from oecc.data_synth import Dataset, Role, SynthSpec, gen_in_distribution
from oecc.losses import OeccConfig, estimate_a_tr
from oecc.training import (
    DEFAULT_LAMBDA_GRID,
    FINETUNE_IN_STREAM,
    TrainConfig,
    build_model,
    finetune_oecc,
    msp,
    oecc_config,
    pretrain,
    stage_rng,
    steps_per_epoch,
    train_cross_entropy,
    tune_lambdas,
)

from oracles import fpr_oracle, logistic_accuracy

SMALL = BenchmarkConfig(count=400)


def small_cfg(**kw):
    return TrainConfig(**({"pretrain_epochs": 20, "finetune_epochs": 4} | kw))


@pytest.fixture(scope="module")
def data():
    return make_datasets(0, SMALL)


@pytest.fixture(scope="module")
def pretrained(data):
    cfg = small_cfg()
    return pretrain(build_model(cfg, 8, 2), data[Role.D_IN_TRAIN], cfg)


def test_separated_blobs_reach_high_training_accuracy():
    ds = gen_in_distribution(SynthSpec(dim=8, classes=2, params={"separation": 10.0}, seed=0, count=2000))
    assert logistic_accuracy(ds.features, ds.labels) >= 0.99
    cfg = TrainConfig(pretrain_epochs=100)
    _, a_tr = pretrain(build_model(cfg, 8, 2), ds, cfg)
    assert a_tr >= 0.99


def test_zero_epochs_leave_model_unchanged(data):
    cfg = small_cfg(pretrain_epochs=0)
    model0 = build_model(cfg, 8, 2)
    model, a_tr = pretrain(model0, data[Role.D_IN_TRAIN], cfg)
    assert dumps_checkpoint(model) == dumps_checkpoint(model0)
    assert a_tr == estimate_a_tr(model0, data[Role.D_IN_TRAIN].features, data[Role.D_IN_TRAIN].labels)


def test_pretraining_is_deterministic(data, pretrained):
    cfg = small_cfg()
    model, a_tr = pretrain(build_model(cfg, 8, 2), data[Role.D_IN_TRAIN], cfg)
    assert a_tr == pretrained[1]
    assert dumps_checkpoint(model) == dumps_checkpoint(pretrained[0])
    other, _ = pretrain(build_model(replace(cfg, seed=1), 8, 2), data[Role.D_IN_TRAIN], replace(cfg, seed=1))
    assert dumps_checkpoint(other) != dumps_checkpoint(model)


def test_zero_lambdas_continue_cross_entropy(data, pretrained):
    cfg = small_cfg()
    model, a_tr = pretrained
    tuned = finetune_oecc(model, data[Role.D_IN_TRAIN], data[Role.D_OUT_OE], cfg, OeccConfig(0.0, 0.0, a_tr, 2))
    ds = data[Role.D_IN_TRAIN]
    plain = train_cross_entropy(model, ds.features, ds.labels, cfg.finetune_epochs, cfg.lr_finetune, cfg.batch_in,
                                cfg.momentum, stage_rng(cfg.seed, FINETUNE_IN_STREAM))
    # the outlier rows share the forward pass, so only summation order differs
    for a, b in zip(tuned.params(), plain.params()):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_finetune_step_accounting_and_frozen_a_tr(data, pretrained, monkeypatch):
    cfg = small_cfg(finetune_epochs=3, batch_in=96)
    calls = []
    real_step = training.sgd_momentum_step
    monkeypatch.setattr(training, "sgd_momentum_step", lambda *a, **k: calls.append(1) or real_step(*a, **k))
    monkeypatch.setattr(training, "estimate_a_tr", lambda *a: pytest.fail("fine-tuning recomputed a_tr"))
    history = []
    model, a_tr = pretrained
    finetune_oecc(model, data[Role.D_IN_TRAIN], data[Role.D_OUT_OE], cfg, oecc_config(cfg, a_tr, 2), history)
    assert len(calls) == 3 * math.ceil(400 / 96) == 3 * steps_per_epoch(400, 96)
    assert [h["epoch"] for h in history] == [0, 1, 2]
    for h in history:
        assert h["total"] == pytest.approx(h["ce"] + h["conf"] + h["tv"])


def test_finetune_rejects_empty_outliers(data, pretrained):
    empty = Dataset(np.zeros((0, 8)), None, Role.D_OUT_OE)
    with pytest.raises(ValueError):
        finetune_oecc(pretrained[0], data[Role.D_IN_TRAIN], empty, small_cfg(), OeccConfig(0.1, 0.1, 0.9, 2))


def test_oecc_config_scaling():
    cfg = TrainConfig(lambda1=0.03, lambda2=0.09)
    ocfg = oecc_config(cfg, 0.95, 2)
    assert (ocfg.lambda1, ocfg.lambda2) == (0.03 * 256, 0.09 * 256)
    kl = oecc_config(replace(cfg, loss_mode="oe"), 0.95, 2)
    assert (kl.lambda1, kl.lambda2, kl.mode) == (0.03, 0.09, "oe")


def test_config_parsing_and_validation():
    cfg = TrainConfig.from_mapping({"hidden": "16, 8", "lambda1_grid": "0.1 0.2", "finetune_epochs": "5"})
    assert cfg.hidden == (16, 8) and cfg.lambda1_grid == (0.1, 0.2) and cfg.finetune_epochs == 5
    assert DEFAULT_LAMBDA_GRID == (0.03, 0.06, 0.09, 0.12)
    assert TrainConfig().lambda1_grid == TrainConfig().lambda2_grid == DEFAULT_LAMBDA_GRID
    with pytest.raises(ValueError):
        TrainConfig.from_mapping({"nope": 1})
    for bad in (dict(batch_in=0), dict(lr_finetune=0.0), dict(pretrain_epochs=-1)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def _tune(data, pretrained, **kw):
    cfg = small_cfg(**kw)
    model, a_tr = pretrained
    return tune_lambdas(lambda: (model.copy(), a_tr), data, cfg)


def test_tune_single_cell(data, pretrained):
    l1, l2, report = _tune(data, pretrained, lambda1_grid=(0.09,), lambda2_grid=(0.03,))
    assert (l1, l2) == (0.09, 0.03) and len(report.cells) == 1


def test_tune_selects_best_cell_by_oracle(data, pretrained):
    grid = (0.0, 0.06)
    l1, l2, report = _tune(data, pretrained, lambda1_grid=grid, lambda2_grid=grid)
    assert len(report.cells) == 4
    model, a_tr = pretrained
    cfg = small_cfg()
    keys = []
    for cell in report.cells:
        cell_cfg = replace(cfg, seed=cell["seed"])
        tuned = finetune_oecc(model, data[Role.D_IN_TRAIN], data[Role.D_OUT_OE], cell_cfg,
                              oecc_config(cfg, a_tr, 2, cell["lambda1"], cell["lambda2"]))
        fpr = fpr_oracle(msp(tuned, data[Role.D_IN_VAL].features), msp(tuned, data[Role.D_OUT_VAL].features))
        assert fpr == cell["fpr95"]
        keys.append((fpr, -cell["auroc"], cell["lambda2"], cell["lambda1"]))
    # selection follows the documented key: FPR95, then AUROC, then smaller lambdas
    expected = min(zip(keys, [(c["lambda1"], c["lambda2"]) for c in report.cells]))[1]
    assert (l1, l2) == report.selected == expected


def test_tune_argument_errors(data, pretrained):
    with pytest.raises(ValueError):
        _tune(data, pretrained, lambda1_grid=())
    missing = {k: v for k, v in data.items() if k != Role.D_OUT_VAL}
    with pytest.raises(ValueError):
        tune_lambdas(lambda: pretrained, missing, small_cfg())
    overlap = dict(data)
    overlap[Role.D_OUT_TEST] = data[Role.D_OUT_VAL].with_role(Role.D_OUT_TEST)
    with pytest.raises(ValueError):
        tune_lambdas(lambda: pretrained, overlap, small_cfg())
