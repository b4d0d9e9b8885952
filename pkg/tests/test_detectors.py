import json
import logging
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oecc.core_nn import MlpModel, forward, init_mlp
from oecc.data_synth import Role
from oecc.detectors import (
    GaussianStats,
    GramSignature,
    MahalanobisDetector,
    StateError,
    compute_normalizers,
    fit_gram,
    fit_mahalanobis,
    gram_deviation,
    gram_entries,
    gram_score,
    input_preprocess,
    layer_features,
    load_feature_csv,
    mahalanobis_score,
    msp_score,
    save_feature_csv,
)
from oecc.detectors.gram import (
    assign_classes,
    compute_normalizers_features,
    entry_deviation,
    fit_gram_features,
    layer_deviations,
    total_deviation_features,
    validation_partition,
)
from oecc.detectors.mahalanobis import LayerGaussian, fit_logistic, layer_score, score_input_gradient, tied_gaussian
from oecc.evaluation import evaluate_gram
from oecc.io_utils import dumps_json
from oecc.metrics import auroc

from oracles import central_diff


def tanh_model(seed=0, dims=(3, 6, 5, 2)):
    model = init_mlp(list(dims), seed=seed, activation="tanh")
    for b in model.biases:
        b[:] = np.random.default_rng(seed + 100).normal(size=b.shape) * 0.3
    return model


# ---------------------------------------------------------------- MSP

def test_msp_limits():
    model = MlpModel([2, 3], [np.zeros((2, 3))], [np.zeros(3)])
    np.testing.assert_allclose(msp_score(model, np.ones((4, 2))), 1 / 3, rtol=1e-15)
    model.biases[0][:] = [800.0, 0.0, 0.0]
    assert msp_score(model, np.ones((1, 2)))[0] == 1.0


def test_msp_matches_high_precision_softmax():
    getcontext().prec = 40
    model = init_mlp([3, 4, 3], seed=2)
    x = np.random.default_rng(0).normal(size=(5, 3))
    z = forward(model, x).logits
    expected = []
    for row in z:
        e = [Decimal(float(v)).exp() for v in row]
        expected.append(float(max(e) / sum(e)))
    np.testing.assert_allclose(msp_score(model, x), expected, rtol=1e-14)
    assert np.all(msp_score(model, x) >= 1 / 3)


# ---------------------------------------------------------------- Mahalanobis

def test_pooled_covariance_by_hand():
    feats = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [0.0, 4.0]])
    g = tied_gaussian(feats, [0, 0, 1, 1], 2)
    np.testing.assert_array_equal(g.means, [[1.0, 0.0], [0.0, 3.0]])
    # centred rows (+-1, 0) and (0, +-1): pooled covariance 0.5 I, ridge 1e-6 * trace / d
    np.testing.assert_allclose(g.covariance, (0.5 + 5e-7) * np.eye(2), rtol=1e-15)
    np.testing.assert_allclose(g.precision @ g.covariance, np.eye(2), atol=1e-12)


def test_identical_points_give_floor_ridge():
    feats = np.array([[1.0, 2.0]] * 3 + [[3.0, 4.0]] * 3)
    g = tied_gaussian(feats, [0, 0, 0, 1, 1, 1], 2)
    np.testing.assert_array_equal(g.means, [[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(g.covariance, 1e-12 * np.eye(2))


def test_class_needs_two_samples():
    with pytest.raises(ValueError):
        tied_gaussian(np.zeros((3, 2)), [0, 0, 1], 2)


def test_recovered_means_within_bound():
    rng = np.random.default_rng(0)
    true = np.array([[0.0, 0.0], [3.0, -1.0]])
    n = 5000
    y = rng.integers(0, 2, n)
    feats = true[y] + rng.normal(size=(n, 2))
    g = tied_gaussian(feats, y, 2)
    for c in range(2):
        assert np.all(np.abs(g.means[c] - true[c]) <= 3 / np.sqrt(np.sum(y == c)))
    np.testing.assert_allclose(g.precision @ g.covariance, np.eye(2), atol=1e-6)


def test_hand_scores():
    g = LayerGaussian.from_moments(np.array([[-1.0], [1.0]]), np.array([[1.0]]))
    assert layer_score(g, np.array([[0.0]]))[0] == -1.0
    assert layer_score(g, np.array([[1.0]]))[0] == 0.0
    swapped = LayerGaussian.from_moments(g.means[::-1], g.covariance)
    f = np.random.default_rng(1).normal(size=(20, 1))
    np.testing.assert_array_equal(layer_score(g, f), layer_score(swapped, f))


@pytest.mark.parametrize("seed", range(20))
def test_affine_invariance(seed):
    rng = np.random.default_rng(seed)
    d, k = 4, 3
    means = rng.normal(size=(k, d))
    a = rng.normal(size=(d, d))
    cov = a @ a.T + 0.5 * np.eye(d)
    f = rng.normal(size=(30, d)) * 2
    m = rng.normal(size=(d, d)) + 2 * np.eye(d)
    shift = rng.normal(size=d)
    base = layer_score(LayerGaussian.from_moments(means, cov), f)
    moved = layer_score(LayerGaussian.from_moments(means @ m.T + shift, m @ cov @ m.T), f @ m.T + shift)
    np.testing.assert_allclose(moved, base, rtol=1e-8, atol=1e-8)


def test_score_shape_checks():
    stats = GaussianStats([LayerGaussian.from_moments(np.zeros((2, 3)), np.eye(3))])
    with pytest.raises(ValueError):
        mahalanobis_score(stats, [np.zeros((4, 2))])
    with pytest.raises(ValueError):
        mahalanobis_score(stats, [np.zeros((4, 3))] * 2)


def _fitted_tanh():
    model = tanh_model()
    rng = np.random.default_rng(5)
    x = rng.normal(size=(200, 3))
    y = np.argmax(forward(model, x).logits, axis=1)
    return model, fit_mahalanobis(model, x, y), rng


def test_preprocess_zero_epsilon_is_identity():
    model, stats, rng = _fitted_tanh()
    x = rng.normal(size=(5, 3))
    np.testing.assert_array_equal(input_preprocess(model, stats, x, 0.0), x)
    with pytest.raises(ValueError):
        input_preprocess(model, stats, x, -1.0)


def test_preprocess_sign_matches_finite_differences():
    model, stats, rng = _fitted_tanh()
    for layer in range(len(stats.layers)):
        x = rng.normal(size=(6, 3))
        grad = score_input_gradient(model, stats, x, layer)
        for i in range(len(x)):
            row = x[i : i + 1].copy()
            fd = central_diff(lambda: float(layer_score(stats.layers[layer], forward(model, row).post[layer])[0]), row)[0]
            strong = np.abs(fd) > 1e-6
            np.testing.assert_array_equal(np.sign(grad[i][strong]), np.sign(fd[strong]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_preprocess_raises_score(seed):
    model, stats, _ = _fitted_tanh()
    x = np.random.default_rng(seed).normal(size=(1, 3)) * 1.5
    last = len(stats.layers) - 1
    before = layer_score(stats.layers[last], forward(model, x).post[last])
    after = layer_score(stats.layers[last], forward(model, input_preprocess(model, stats, x, 1e-3)).post[last])
    assert after[0] >= before[0]


def test_ensemble_separable_layer():
    rng = np.random.default_rng(0)
    s_in = np.column_stack([rng.normal(size=50), rng.uniform(1, 2, 50)])
    s_out = np.column_stack([rng.normal(size=60), rng.uniform(-2, -1, 60)])
    ens = fit_logistic(s_in, s_out)
    assert auroc(ens.score(s_in), ens.score(s_out)) == 1.0


def test_ensemble_symmetric_layers_get_equal_weights():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(40, 2))
    b = rng.normal(size=(40, 2))
    # every row appears with its columns swapped, in both sets
    s_in = np.vstack([a, a[:, ::-1]])
    s_out = np.vstack([b, b[:, ::-1]])
    ens = fit_logistic(s_in, s_out)
    assert abs(ens.weights[0] - ens.weights[1]) < 1e-3


def test_ensemble_single_layer_is_monotone():
    rng = np.random.default_rng(2)
    s_in, s_out = rng.normal(1, 1, (80, 1)), rng.normal(0, 1, (70, 1))
    ens = fit_logistic(s_in, s_out)
    assert auroc(ens.score(s_in), ens.score(s_out)) == auroc(s_in[:, 0], s_out[:, 0])


def test_ensemble_degenerate_warns(caplog):
    with caplog.at_level(logging.WARNING):
        ens = fit_logistic(np.ones((5, 3)), np.ones((4, 3)))
    assert "degenerate" in caplog.text
    np.testing.assert_allclose(ens.weights, 1 / 3)


def test_detector_serialization_round_trip():
    model, stats, rng = _fitted_tanh()
    x_in, x_out = rng.normal(size=(40, 3)), rng.normal(3, 1, size=(40, 3))
    det = MahalanobisDetector.fit(model, rng.normal(size=(100, 3)), rng.integers(0, 2, 100), x_in, x_out, (0.0, 0.001))
    back = MahalanobisDetector.from_dict(json.loads(dumps_json(det.to_dict())))
    np.testing.assert_array_equal(back.score(model, x_in), det.score(model, x_in))


# ---------------------------------------------------------------- Gram

def test_gram_entries_by_hand():
    for p in (1, 2, 3, 4):
        np.testing.assert_allclose(gram_entries(np.array([[1.0, 2.0]]), p), [[1.0, 2.0, 4.0]], rtol=1e-15)
    np.testing.assert_allclose(gram_entries(np.array([[-1.0, 2.0]]), 3), [[1.0, -2.0, 4.0]], rtol=1e-15)


def test_identical_activations_collapse_bounds():
    feats = [np.tile([[0.5, -1.0, 2.0]], (4, 1))]
    sig = fit_gram_features(feats, np.zeros(4, int), 1, orders=(1, 2))
    for o in range(2):
        np.testing.assert_array_equal(sig.mins[0][0][o], sig.maxs[0][0][o])


def test_entry_deviation_by_hand():
    # denominators carry a 1e-12 guard
    assert entry_deviation(np.array(4.0), 1.0, 2.0) == pytest.approx(1.0, abs=1e-11)
    assert entry_deviation(np.array(1.5), 1.0, 2.0) == 0.0
    assert entry_deviation(np.array(0.5), 1.0, 2.0) == pytest.approx(0.5, abs=1e-11)
    dist = np.linspace(0, 5, 50)
    devs = entry_deviation(2.0 + dist, 1.0, 2.0)
    assert np.all(np.diff(devs) >= 0)


def _random_signature(seed=0, n=40):
    rng = np.random.default_rng(seed)
    feats = [rng.normal(size=(n, 3)), rng.normal(size=(n, 2))]
    classes = np.argmax(feats[-1], axis=1)
    return fit_gram_features(feats, classes, 2), feats, classes


def test_fitting_samples_have_zero_deviation():
    sig, feats, classes = _random_signature()
    assert np.all(layer_deviations(sig, feats, classes) == 0.0)


def test_out_of_bounds_entry_is_positive():
    sig, feats, classes = _random_signature(1)
    probe = [f[:1].copy() for f in feats]
    c = classes[0]
    # push unit 0 of layer 0 past the class maximum of its square
    probe[0][0, 0] = np.sqrt(sig.maxs[c][0][0][0]) * 1.5 + 1.0
    assert layer_deviations(sig, probe, [c])[0, 0] > 0


def test_unfitted_signature_raises():
    sig, feats, classes = _random_signature()
    with pytest.raises(StateError):
        total_deviation_features(sig, feats)


def test_normalizers_on_training_data_are_floored():
    sig, feats, classes = _random_signature()
    sig = compute_normalizers_features(sig, feats, classes)
    np.testing.assert_array_equal(sig.normalizers, [1e-12, 1e-12])


def test_normalizer_is_mean_deviation():
    one = fit_gram_features([np.array([[1.0], [np.sqrt(2.0)]])], np.zeros(2, int), 1, orders=(1,))
    # the single entry a^2 has bounds [1, 2]; a=2 gives 4 -> deviation 1, a=sqrt(6) gives 6 -> 2
    s1 = compute_normalizers_features(one, [np.array([[2.0]])], [0])
    s2 = compute_normalizers_features(one, [np.array([[2.0], [np.sqrt(6.0)]])], [0, 0])
    assert s1.normalizers[0] == pytest.approx(1.0)
    assert s2.normalizers[0] == pytest.approx(1.5)
    with pytest.raises(ValueError):
        compute_normalizers_features(one, [np.zeros((0, 1))])


def test_unusable_class_falls_back():
    feats = [np.random.default_rng(0).normal(size=(10, 3))]
    sig = fit_gram_features(feats, np.zeros(10, int), 2)
    assert sig.usable.tolist() == [True, False]
    np.testing.assert_array_equal(assign_classes(sig, np.array([[0.0, 5.0], [1.0, 0.0]])), [0, 0])


def test_model_level_gram_pipeline():
    model = tanh_model(3)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(100, 3))
    sig = fit_gram(model, x)
    with pytest.raises(StateError):
        gram_deviation(sig, model, x)
    sig = compute_normalizers(sig, model, rng.normal(size=(20, 3)))
    dev, total = gram_deviation(sig, model, x)
    assert np.all(total == 0.0)
    far = gram_score(sig, model, rng.normal(size=(20, 3)) * 10)
    assert np.all(np.isfinite(far)) and np.all(far <= 0)
    back = GramSignature.from_dict(json.loads(dumps_json(sig.to_dict())))
    np.testing.assert_array_equal(gram_score(back, model, x[:5]), gram_score(sig, model, x[:5]))


def test_default_partition_matches_explicit_indices():
    from oecc.data_synth import Dataset

    model = tanh_model(4)
    rng = np.random.default_rng(1)
    train = Dataset(rng.normal(size=(120, 3)), rng.integers(0, 2, 120), Role.D_IN_TRAIN)
    test_in = Dataset(rng.normal(size=(100, 3)), rng.integers(0, 2, 100), Role.D_IN_TEST)
    test_out = Dataset(rng.normal(2, 1, size=(50, 3)), None, Role.D_OUT_TEST)
    metrics, sig = evaluate_gram(model, train, test_in, test_out, seed=9)
    val_idx, rest_idx = validation_partition(100, 0.1, 9)
    assert len(val_idx) == 10 and len(set(val_idx) | set(rest_idx)) == 100
    manual = compute_normalizers(fit_gram(model, train.features), model, test_in.features[val_idx])
    np.testing.assert_array_equal(manual.normalizers, sig.normalizers)


def test_feature_csv_round_trip(tmp_path):
    model = tanh_model()
    x = np.random.default_rng(0).normal(size=(7, 3))
    feats = layer_features(model, x)
    save_feature_csv(tmp_path / "f.csv", feats, labels=[0, 1, 0, 1, 1, 0, 0])
    back, labels = load_feature_csv(tmp_path / "f.csv")
    assert [f.shape for f in back] == [f.shape for f in feats]
    for a, b in zip(back, feats):
        np.testing.assert_array_equal(a, b)
    assert labels.tolist() == [0, 1, 0, 1, 1, 0, 0]
    (tmp_path / "bad.csv").write_text("X1,label\n1.0,0\n")
    with pytest.raises(ValueError):
        load_feature_csv(tmp_path / "bad.csv")
