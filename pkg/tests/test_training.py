"""Oversampling, fold splitting, optimizers and the cross-validation loop."""

import dataclasses

import numpy as np
import numpy.testing as npt
import pytest

from ecgnet.ingest import ZeroVarianceError
from ecgnet.network import ModelConfig, SevggLstm
from ecgnet.synthetic import make_synthetic_segments
from ecgnet.training import (
    Adam,
    Dataset,
    Sgd,
    TrainConfig,
    fit_model,
    kfold_split,
    oversample,
    run_cross_validation,
    train_epoch,
)

from gradsuite import TINY_CONFIG


def dataset_with_counts(counts, length=4):
    """One row per sample; values encode the source index for provenance checks."""
    y = np.concatenate([np.full(n, cls, dtype=np.int64) for cls, n in enumerate(counts)])
    x = np.tile(np.arange(len(y), dtype=np.float64)[:, None], (1, length))
    return Dataset(x=x, y=y, codes=tuple(f"C{i}" for i in range(len(counts))))


# --- oversampling ---


def test_oversample_reference_mitbih_counts():
    data = dataset_with_counts([6735, 3005, 1202, 1179, 771], length=1)
    out = oversample(data, seed=0)
    npt.assert_array_equal(out.class_counts(), [6735, 6010, 7212, 7074, 6939])
    assert len(out) == 33970


def test_oversample_balanced_input_unchanged():
    data = dataset_with_counts([50, 50])
    out = oversample(data, seed=1)
    npt.assert_array_equal(out.x, data.x)
    npt.assert_array_equal(out.y, data.y)


def test_oversample_small_ratio_tops_up_to_benchmark():
    # ratio 100/60 < 2: round((ratio - 1) * 60) = 40 duplicates
    out = oversample(dataset_with_counts([100, 60]), seed=2)
    npt.assert_array_equal(out.class_counts(), [100, 100])


def test_oversample_ratio_exactly_two_replicates_whole_class():
    out = oversample(dataset_with_counts([80, 40]), seed=3)
    npt.assert_array_equal(out.class_counts(), [80, 80])


def test_oversample_duplicates_are_exact_copies_of_same_class():
    data = dataset_with_counts([12, 5, 3])
    out = oversample(data, seed=4)
    for row, label, src in zip(out.x, out.y, out.source_indices):
        npt.assert_array_equal(row, data.x[src])
        assert label == data.y[src]


def test_oversample_keeps_benchmark_class_untouched():
    data = dataset_with_counts([9, 2])
    out = oversample(data, seed=5)
    assert out.class_counts()[0] == 9
    npt.assert_array_equal(out.x[out.y == 0], data.x[data.y == 0])


def test_oversample_deterministic():
    data = dataset_with_counts([30, 20, 7])
    a = oversample(data, seed=6)
    b = oversample(data, seed=6)
    npt.assert_array_equal(a.x, b.x)
    npt.assert_array_equal(a.source_indices, b.source_indices)
    c = oversample(data, seed=7)
    assert not np.array_equal(a.source_indices, c.source_indices)


def test_oversample_empty_dataset():
    with pytest.raises(ValueError, match="empty"):
        oversample(Dataset(x=np.zeros((0, 3)), y=np.zeros(0, dtype=int), codes=("a",)), seed=0)


def test_oversample_rule_for_arbitrary_counts():
    rng = np.random.default_rng(8)
    for _ in range(50):
        counts = rng.integers(1, 200, size=int(rng.integers(2, 6)))
        out = oversample(dataset_with_counts(counts, length=1), seed=9)
        n_max = counts.max()
        for cls, n_c in enumerate(counts):
            got = out.class_counts()[cls]
            if n_max >= 2 * n_c:
                assert got == ((2 * n_max + n_c) // (2 * n_c)) * n_c
            else:
                assert got == n_max


# --- k-fold splitting ---


def test_kfold_even_division():
    folds = kfold_split(100, 10, seed=0)
    assert len(folds) == 10
    assert all(len(f.test_indices) == 10 for f in folds)


def test_kfold_size_arithmetic_uneven_n():
    folds = kfold_split(12892, 10, seed=1)
    sizes = sorted(len(f.test_indices) for f in folds)
    assert sizes == [1289] * 8 + [1290] * 2
    assert sum(sizes) == 12892


@pytest.mark.parametrize("n", [100, 101, 12892])
def test_kfold_partition_properties(n):
    folds = kfold_split(n, 10, seed=2)
    all_test = np.concatenate([f.test_indices for f in folds])
    assert len(all_test) == n
    npt.assert_array_equal(np.sort(all_test), np.arange(n))
    for f in folds:
        assert not np.intersect1d(f.train_indices, f.test_indices).size
        npt.assert_array_equal(
            np.sort(np.concatenate([f.train_indices, f.test_indices])), np.arange(n)
        )
    sizes = {len(f.test_indices) for f in folds}
    assert max(sizes) - min(sizes) <= 1


def test_kfold_deterministic():
    a = kfold_split(57, 5, seed=3)
    b = kfold_split(57, 5, seed=3)
    for fa, fb in zip(a, b):
        npt.assert_array_equal(fa.test_indices, fb.test_indices)
    c = kfold_split(57, 5, seed=4)
    assert any(
        not np.array_equal(fa.test_indices, fc.test_indices) for fa, fc in zip(a, c)
    )


def test_kfold_rejects_small_n():
    with pytest.raises(ValueError, match="cannot split"):
        kfold_split(5, 10, seed=0)


# --- optimizers ---


def test_sgd_zero_gradient_is_identity():
    params = {"w": np.array([1.0, -2.0])}
    Sgd(0.5).step(params, {"w": np.zeros(2)})
    npt.assert_array_equal(params["w"], [1.0, -2.0])


def test_sgd_hand_update():
    params = {"w": np.array([1.0])}
    Sgd(0.1).step(params, {"w": np.array([2.0])})
    npt.assert_allclose(params["w"], [0.8])


def test_adam_first_step_magnitude_is_learning_rate():
    for grad in (0.5, -3.0, 100.0):
        params = {"w": np.array([1.0])}
        Adam(learning_rate=0.01).step(params, {"w": np.array([grad])})
        delta = params["w"][0] - 1.0
        assert delta == pytest.approx(-np.sign(grad) * 0.01, rel=1e-6)


def test_adam_defaults_follow_standard_recurrences():
    opt = Adam(learning_rate=0.1)
    assert (opt.beta1, opt.beta2, opt.epsilon) == (0.9, 0.999, 1e-8)
    params = {"w": np.array([0.0])}
    g1, g2 = np.array([1.0]), np.array([-2.0])
    opt.step(params, {"w": g1})
    opt.step(params, {"w": g2})
    # replay the textbook recurrences
    m = 0.1 * g1
    v = 0.001 * g1**2
    w = -0.1 * (m / 0.1) / (np.sqrt(v / 0.001) + 1e-8)
    m = 0.9 * m + 0.1 * g2
    v = 0.999 * v + 0.001 * g2**2
    w = w - 0.1 * (m / (1 - 0.9**2)) / (np.sqrt(v / (1 - 0.999**2)) + 1e-8)
    npt.assert_allclose(params["w"], w, rtol=1e-12)


def test_optimizers_reject_non_finite_gradients():
    params = {"w": np.array([1.0])}
    with pytest.raises(FloatingPointError, match="w"):
        Sgd(0.1).step(params, {"w": np.array([np.nan])})
    with pytest.raises(FloatingPointError, match="w"):
        Adam(0.1).step(params, {"w": np.array([np.inf])})


# --- fit loop ---


def small_data(n=40, seed=0):
    return make_synthetic_segments(5, n, 64, noise=0.1, seed=seed)


def test_zero_learning_rate_keeps_parameters_bit_identical():
    x, y = small_data()
    # float64 so reshuffled batch composition cannot perturb the epoch loss
    model = SevggLstm.build(TINY_CONFIG, seed=0).astype(np.float64)
    before = model.copy_params()
    cfg = TrainConfig(epochs=2, batch_size=16, learning_rate=0.0, seed=0, oversample=False)
    history = fit_model(model, x, y, cfg)
    for name in before:
        npt.assert_array_equal(model.params[name], before[name])
    assert abs(history.losses[0] - history.losses[1]) < 1e-9


def test_large_batch_size_gives_single_step_per_epoch():
    x, y = small_data()
    model = SevggLstm.build(TINY_CONFIG, seed=1)

    class CountingSgd(Sgd):
        calls = 0

        def step(self, params, grads):
            CountingSgd.calls += 1
            super().step(params, grads)

    train_epoch(model, x, y, CountingSgd(0.01), batch_size=len(y) + 5, rng=np.random.default_rng(0))
    assert CountingSgd.calls == 1


def test_last_partial_batch_is_kept():
    x, y = small_data(n=10)
    model = SevggLstm.build(TINY_CONFIG, seed=1)

    class CountingSgd(Sgd):
        calls = 0

        def step(self, params, grads):
            CountingSgd.calls += 1
            super().step(params, grads)

    train_epoch(model, x, y, CountingSgd(0.01), batch_size=4, rng=np.random.default_rng(0))
    assert CountingSgd.calls == 3  # 4 + 4 + 2


def test_loss_decreases_on_separable_data():
    x, y = make_synthetic_segments(5, 200, 64, noise=0.1, seed=12345)
    decreasing = 0
    for seed in range(10):
        model = SevggLstm.build(TINY_CONFIG, seed=seed)
        cfg = TrainConfig(
            epochs=5, batch_size=16, learning_rate=3e-3, optimizer="adam", seed=seed, oversample=False
        )
        history = fit_model(model, x, y, cfg, np.random.default_rng(seed))
        if all(b < a for a, b in zip(history.losses, history.losses[1:])):
            decreasing += 1
    assert decreasing >= 9


def test_non_finite_loss_aborts_with_epoch_context():
    x, y = small_data()
    model = SevggLstm.build(TINY_CONFIG, seed=0)
    model.params["conv1.w"][:] = np.nan
    cfg = TrainConfig(epochs=1, batch_size=16, learning_rate=1e-3, seed=0, oversample=False)
    with pytest.raises(FloatingPointError, match="epoch 0"):
        fit_model(model, x, y, cfg)


def test_history_has_one_entry_per_epoch():
    x, y = small_data()
    model = SevggLstm.build(TINY_CONFIG, seed=2)
    cfg = TrainConfig(epochs=3, batch_size=16, learning_rate=1e-3, seed=0, oversample=False)
    history = fit_model(model, x, y, cfg)
    assert len(history.losses) == 3
    assert len(history.accuracies) == 3
    assert all(0.0 <= a <= 1.0 for a in history.accuracies)


# --- cross-validation ---


def cv_setup(n=40, counts=None):
    if counts is None:
        x, y = small_data(n)
        data = Dataset(x=x, y=y, codes=tuple(f"C{i}" for i in range(5)))
    else:
        data = dataset_with_counts(counts, length=64)
        data = Dataset(x=data.x * 0.01, y=data.y, codes=data.codes)
    cfg = dataclasses.replace(TINY_CONFIG, num_classes=data.k, fc_sizes=(16, 8, data.k))
    train_cfg = TrainConfig(epochs=1, batch_size=16, learning_rate=1e-3, seed=0, k_folds=2)
    return data, cfg, train_cfg


def test_cv_every_sample_tested_exactly_once():
    data, model_cfg, train_cfg = cv_setup()
    result = run_cross_validation(data, model_cfg, train_cfg)
    tested = np.concatenate([f.test_indices for f in result.folds])
    npt.assert_array_equal(np.sort(tested), np.arange(len(data)))
    assert sum(f.confusion.total for f in result.folds) == len(data)


def test_cv_oversampling_never_touches_test_folds():
    data, model_cfg, train_cfg = cv_setup(counts=[20, 6, 3])
    result = run_cross_validation(data, model_cfg, train_cfg)
    for fold in result.folds:
        overlap = set(fold.train_source_indices) & set(fold.test_indices)
        assert not overlap
        # duplicated sources must appear (fold had oversampling to do)
        assert len(fold.train_source_indices) > len(set(fold.train_source_indices))


def test_cv_zero_learning_rate_preserves_initialization():
    data, model_cfg, train_cfg = cv_setup()
    train_cfg = dataclasses.replace(train_cfg, learning_rate=0.0)
    result = run_cross_validation(data, model_cfg, train_cfg)
    for fold in result.folds:
        fresh = SevggLstm.build(model_cfg, seed=train_cfg.seed + 1 + fold.fold_index)
        for name in fresh.params:
            npt.assert_array_equal(fold.model.params[name], fresh.params[name])


def test_cv_is_deterministic():
    data, model_cfg, train_cfg = cv_setup()
    a = run_cross_validation(data, model_cfg, train_cfg)
    b = run_cross_validation(data, model_cfg, train_cfg)
    assert a.overall == b.overall
    for fa, fb in zip(a.folds, b.folds):
        assert fa.history.losses == fb.history.losses
        assert fa.history.accuracies == fb.history.accuracies
        npt.assert_array_equal(fa.confusion.counts, fb.confusion.counts)


def test_cv_overall_is_mean_of_fold_overalls():
    data, model_cfg, train_cfg = cv_setup()
    result = run_cross_validation(data, model_cfg, train_cfg)
    for name in ("acc", "sen", "pre", "f1"):
        expected = np.mean([getattr(f.report.overall, name) for f in result.folds])
        assert result.overall[name] == pytest.approx(expected, rel=1e-12)


def test_cv_normalizes_raw_data_per_training_fold():
    x, y = small_data()
    data = Dataset(x=x * 3.7 + 11.0, y=y, codes=tuple(f"C{i}" for i in range(5)), normalized=False)
    model_cfg = dataclasses.replace(TINY_CONFIG, num_classes=5)
    train_cfg = TrainConfig(epochs=1, batch_size=16, learning_rate=1e-3, seed=0, k_folds=2)
    result = run_cross_validation(data, model_cfg, train_cfg)
    assert len(result.folds) == 2
    # raw data stays untouched
    assert data.x.mean() != pytest.approx(0.0)


def test_cv_raw_constant_data_raises_zero_variance():
    data = Dataset(
        x=np.full((40, 64), 2.5),
        y=np.tile(np.arange(2), 20),
        codes=("a", "b"),
        normalized=False,
    )
    model_cfg = dataclasses.replace(TINY_CONFIG, num_classes=2, fc_sizes=(16, 8, 2))
    train_cfg = TrainConfig(epochs=1, batch_size=16, learning_rate=1e-3, seed=0, k_folds=2)
    with pytest.raises(ZeroVarianceError):
        run_cross_validation(data, model_cfg, train_cfg)


def test_cv_oversample_whole_dataset_scope():
    data, model_cfg, train_cfg = cv_setup(counts=[20, 6, 3])
    train_cfg = dataclasses.replace(train_cfg, oversample_scope="all")
    result = run_cross_validation(data, model_cfg, train_cfg)
    # whole-dataset balancing: 20 + 20 (ratio 6: x3=18... computed by rule) then split
    total = sum(f.confusion.total for f in result.folds)
    balanced = oversample(data, train_cfg.seed + 1 + train_cfg.k_folds)
    assert total == len(balanced)


def test_cv_learns_separable_synthetic_classes():
    config = ModelConfig(
        input_len=128,
        num_classes=5,
        conv_parts=((1, 8), (1, 8), (2, 16), (2, 16), (2, 16)),
        se_reduction=4,
        lstm_hidden=16,
        fc_sizes=(32, 16, 5),
    )
    x, y = make_synthetic_segments(5, 200, 128, noise=0.1, seed=12345)
    data = Dataset(x=x, y=y, codes=tuple(f"C{i}" for i in range(5)))
    train_cfg = TrainConfig(
        epochs=20, batch_size=16, learning_rate=3e-3, seed=0, k_folds=2, oversample=False
    )
    result = run_cross_validation(data, config, train_cfg)
    fold_acc = [np.trace(f.confusion.counts) / f.confusion.total for f in result.folds]
    assert np.mean(fold_acc) > 0.9


def test_cv_rejects_inconsistent_shapes():
    data, model_cfg, train_cfg = cv_setup()
    bad_cfg = dataclasses.replace(model_cfg, input_len=128)
    with pytest.raises(ValueError, match="input_len"):
        run_cross_validation(data, bad_cfg, train_cfg)


def test_train_config_validation():
    with pytest.raises(ValueError, match="k_folds"):
        TrainConfig(k_folds=1)
    with pytest.raises(ValueError, match="optimizer"):
        TrainConfig(optimizer="rmsprop")
    with pytest.raises(ValueError, match="scope"):
        TrainConfig(oversample_scope="everything")
