import numpy as np
import pytest

from axbench import oracle as om
from axbench import synthdata as sd
from axbench.core import (ContinuousParent, ContractError, DiscreteParent,
                          Observation, ParentSpace)
from axbench.synthdata import LabeledDataset, Provenance

FEATURE_SHAPE = (28, 28, 3)


def test_featurize_all_zero_image():
    feats = om.featurize(Observation(np.zeros(FEATURE_SHAPE, dtype=np.float32)))
    assert feats.shape == (om.feature_length(*FEATURE_SHAPE),)
    assert np.all(feats == 0.0)


def test_featurize_pure_red():
    img = np.zeros(FEATURE_SHAPE, dtype=np.float32)
    img[:, :, 0] = 1.0
    feats = om.featurize(Observation(img))
    hwc = 28 * 28 * 3
    assert np.allclose(feats[hwc:hwc + 3], [1.0, 0.0, 0.0])
    harmonics = feats[-2 * om.HUE_HARMONICS:]
    # hue angle 0: cos(k*0) = 1, sin(k*0) = 0 for every harmonic
    assert np.allclose(harmonics[0::2], 1.0)
    assert np.allclose(harmonics[1::2], 0.0)


def test_featurize_length_formula():
    # documented closed form: H*W*C + C + C*ceil(H/4)*ceil(W/4) + 2*harmonics
    assert om.feature_length(28, 28, 3) == 2352 + 3 + 3 * 49 + 2 * om.HUE_HARMONICS
    assert om.feature_length(64, 64, 3) == 64 * 64 * 3 + 3 + 3 * 256 + 2 * om.HUE_HARMONICS
    obs = Observation(np.zeros((28, 28, 3), dtype=np.float32))
    assert om.featurize(obs).shape[0] == om.feature_length(28, 28, 3)


def test_featurize_single_matches_batch(ds_small):
    batch = om.featurize_batch(ds_small.pixels[:4])
    for i in range(4):
        single = om.featurize(ds_small.observation(i))
        assert np.array_equal(single, batch[i])


def _square_dataset(n_per_class):
    """Linearly separable toy set: red squares vs green squares."""
    space = ParentSpace((DiscreteParent("colour", 2),))
    pixels = np.zeros((2 * n_per_class, 8, 8, 3), dtype=np.float32)
    values = np.zeros((2 * n_per_class, 1))
    rng = np.random.default_rng(5)
    for i in range(2 * n_per_class):
        label = i % 2
        values[i, 0] = label
        level = 0.5 + 0.5 * rng.random()
        pixels[i, 2:6, 2:6, label] = level
    return LabeledDataset(space, pixels, values, None, Provenance("external", 0))


def test_classifier_separable_toy_reaches_100():
    ds = _square_dataset(40)
    clf = om.train_classifier(ds, 0, epochs=20, learning_rate=1.0, l2=0.0, seed=1)
    quality = om.oracle_quality(clf, ds)
    assert quality.value == 100.0


def test_classifier_heldout_accuracy(digit_oracle, ds_test_unconf):
    quality = om.oracle_quality(digit_oracle, ds_test_unconf)
    assert quality.value >= 92.0


def test_classifier_seed_determinism(ds_small):
    a = om.train_classifier(ds_small, 0, epochs=2, seed=3)
    b = om.train_classifier(ds_small, 0, epochs=2, seed=3)
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.bias.tobytes() == b.bias.tobytes()


def test_classifier_loss_decreases(digit_oracle):
    losses = digit_oracle.provenance["epoch_losses"]
    assert losses[-1] < losses[0]


def test_classifier_rejects_single_class():
    ds = _square_dataset(10)
    only_red = ds.subset([i for i in range(len(ds)) if ds.values[i, 0] == 0])
    with pytest.raises(om.OracleError):
        om.train_classifier(only_red, 0, epochs=1)


def test_classifier_rejects_continuous_parent(ds_small):
    with pytest.raises(ContractError):
        om.train_classifier(ds_small, 1, epochs=1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_classifier_nonfinite_loss_raises():
    ds = _square_dataset(10)
    with pytest.raises(om.OracleError, match="non-finite"):
        om.train_classifier(ds, 0, epochs=4, learning_rate=1e200, l2=0.0, seed=0)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(17)
    for _ in range(10):
        feats = rng.normal(size=(20, 8))
        labels = rng.integers(0, 3, 20)
        weights = rng.normal(size=(3, 8)) * 0.3
        bias = rng.normal(size=3) * 0.1
        l2 = 0.01
        _, grad_w, grad_b = om.ce_loss_and_grad(weights, bias, feats, labels, l2)
        eps = 1e-6
        for idx in [(0, 0), (1, 3), (2, 7)]:
            up = weights.copy(); up[idx] += eps
            dn = weights.copy(); dn[idx] -= eps
            lu, _, _ = om.ce_loss_and_grad(up, bias, feats, labels, l2)
            ld, _, _ = om.ce_loss_and_grad(dn, bias, feats, labels, l2)
            numeric = (lu - ld) / (2 * eps)
            assert abs(grad_w[idx] - numeric) / max(abs(numeric), 1e-8) < 1e-4
        for j in range(3):
            up = bias.copy(); up[j] += eps
            dn = bias.copy(); dn[j] -= eps
            lu, _, _ = om.ce_loss_and_grad(weights, up, feats, labels, l2)
            ld, _, _ = om.ce_loss_and_grad(weights, dn, feats, labels, l2)
            numeric = (lu - ld) / (2 * eps)
            assert abs(grad_b[j] - numeric) / max(abs(numeric), 1e-8) < 1e-4


def test_regressor_exact_linear_recovery(ds_train_unconf):
    # target defined as an exact linear function of the circular-hue features;
    # needs more fit samples than features for the solution to be pinned
    feats = om.featurize_batch(ds_train_unconf.pixels)
    hwc_c_blocks = om.feature_length(28, 28, 3) - 2 * om.HUE_HARMONICS
    target = 0.5 + 0.2 * feats[:, hwc_c_blocks] + 0.15 * feats[:, hwc_c_blocks + 1]
    target = np.clip(target, 0.0, 1.0)
    space = ParentSpace((DiscreteParent("digit", 10), ContinuousParent("hue", 0, 1)))
    values = np.column_stack([ds_train_unconf.values[:, 0], target])
    ds = LabeledDataset(space, ds_train_unconf.pixels, values, None,
                        Provenance("external", 0))
    reg = om.train_regressor(ds, 1, l2=1e-8)
    _, holdout = om.split_indices(len(ds))
    quality = om.oracle_quality(reg, ds.subset(holdout))
    assert quality.value < 1.0


def test_regressor_infinite_l2_predicts_training_mean(ds_small):
    reg = om.train_regressor(ds_small, 1, l2=1e12)
    assert float(np.abs(reg.weights).max()) < 1e-6
    fit_idx, _ = om.split_indices(len(ds_small))
    mean = ds_small.column(1)[fit_idx].mean()
    pred = reg.predict_batch(ds_small.pixels[:10])
    assert np.allclose(pred, mean, atol=1e-3)


def test_regressor_heldout_mae(hue_oracle, ds_test_unconf):
    quality = om.oracle_quality(hue_oracle, ds_test_unconf)
    assert quality.value <= 6.0


def test_regressor_rejects_discrete_parent(ds_small):
    with pytest.raises(ContractError):
        om.train_regressor(ds_small, 0)


def test_ridge_closed_form_matches_gradient_descent():
    rng = np.random.default_rng(8)
    feats = rng.normal(size=(20, 5))
    y = rng.normal(size=20)
    l2 = 0.05
    n, d = feats.shape

    aug = np.concatenate([feats, np.ones((n, 1))], axis=1)
    gram = aug.T @ aug
    penalty = l2 * np.eye(d + 1)
    penalty[d, d] = 0.0
    closed = np.linalg.solve(gram + n * penalty, aug.T @ y)

    w = np.zeros(d + 1)
    lr = 0.01
    for _ in range(200000):
        resid = aug @ w - y
        grad = aug.T @ resid / n + l2 * np.concatenate([w[:d], [0.0]])
        w -= lr * grad
    pred_closed = aug @ closed
    pred_gd = aug @ w
    assert np.mean(np.abs(pred_closed - pred_gd)) < 1e-6


def test_quality_lookup_oracle_is_perfect(ds_small):
    class LookupOracle:
        parent = 0
        kind = "classifier"

        def __init__(self, ds):
            self.table = {ds.pixels[i].tobytes(): int(ds.values[i, 0])
                          for i in range(len(ds))}

        def predict_batch(self, pixels):
            return np.array([self.table[pixels[i].tobytes()]
                             for i in range(pixels.shape[0])])

    oracle = LookupOracle(ds_small)
    assert om.oracle_quality(oracle, ds_small).value == 100.0


def test_quality_constant_regressor_on_uniform_hue(ds_test_unconf):
    class ConstantHalf:
        parent = 1
        kind = "regressor"

        def predict_batch(self, pixels):
            return np.full(pixels.shape[0], 0.5)

    value = om.oracle_quality(ConstantHalf(), ds_test_unconf).value
    assert abs(value - 25.0) <= 1.0  # E|U - 0.5| = 1/4


def test_oracle_save_load_round_trip(tmp_path, digit_oracle, hue_oracle, ds_small):
    for oracle in (digit_oracle, hue_oracle):
        path = tmp_path / f"{oracle.kind}.json"
        om.save_oracle(oracle, path)
        loaded = om.load_oracle(path)
        a = oracle.predict_batch(ds_small.pixels[:20])
        b = loaded.predict_batch(ds_small.pixels[:20])
        assert np.array_equal(a, b)
        assert loaded.kind == oracle.kind and loaded.parent == oracle.parent
