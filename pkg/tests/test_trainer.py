"""Training loop: schedules, determinism, seed sweeps, ablations, evaluation."""

from __future__ import annotations

import numpy as np
import pytest

from ordproto.data import GenConfig, generate, stratified_batches
from ordproto.encoder import (
    adam_step,
    backward,
    forward,
    init_adam,
    init_params,
    param_list,
)
from ordproto.errors import (
    BadConfigError,
    DegenerateBatchError,
    EmptyInputError,
    OutOfRangeError,
)
from ordproto.losses import cross_entropy_loss
from ordproto.trainer import (
    HISTORY_COLUMNS,
    METRIC_KEYS,
    TrainConfig,
    ablation_config,
    cross_validate,
    evaluate_on,
    lambda_schedule,
    run_seeds,
    train,
)

TINY_GEN = GenConfig(class_counts=(12, 18, 14), input_dim=6, noise_sigma=0.1)
TINY_TRAIN = TrainConfig(
    n_classes=3,
    input_dim=6,
    hidden_dims=(8,),
    feature_dim=4,
    epochs=2,
    batch_size=6,
    seeds=(1, 2),
)


def config_with(**overrides) -> TrainConfig:
    fields = dict(TINY_TRAIN.__dict__)
    fields.update(overrides)
    return TrainConfig(**fields)


@pytest.fixture(scope="module")
def tiny_dataset():
    return generate(TINY_GEN, seed=60)


class TestTrainConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.dims == [16, 64, 64, 32]
        assert cfg.seeds == (1, 2, 3, 4, 5)
        assert cfg.anchor_classes == (1, 3)
        assert (cfg.lambda_start, cfg.lambda_end) == (0.0, 1.0)

    def test_validation(self):
        for kw in (
            {"n_classes": 1},
            {"feature_dim": 0},
            {"hidden_dims": (8, 0)},
            {"epochs": 0},
            {"batch_size": 0},
            {"ema_sigma": 1.0},
            {"lambda_start": 0.8, "lambda_end": 0.4},
            {"lambda_end": 1.5},
            {"blackbox_lambda": 0.0},
            {"seeds": ()},
            {"anchor_classes": (2, 2)},
            {"anchor_classes": (0, 3)},
            {"anchor_classes": (1, 4)},
        ):
            with pytest.raises(BadConfigError):
                TrainConfig(**kw)

    def test_no_hidden_layers_allowed(self):
        cfg = TrainConfig(hidden_dims=())
        assert cfg.dims == [16, 32]


class TestLambdaSchedule:
    def test_linear_ramp(self):
        assert lambda_schedule(0, 10) == 0.0
        assert lambda_schedule(10, 10) == 1.0
        assert lambda_schedule(3, 10) == pytest.approx(0.3, abs=1e-15)

    def test_validation(self):
        with pytest.raises(OutOfRangeError):
            lambda_schedule(1, 0)
        with pytest.raises(OutOfRangeError):
            lambda_schedule(-1, 10)
        with pytest.raises(OutOfRangeError):
            lambda_schedule(11, 10)


class TestTrainLoop:
    def test_deterministic_per_seed(self, tiny_dataset):
        view = tiny_dataset.training_view()
        a = train(TINY_TRAIN, view, seed=1)
        b = train(TINY_TRAIN, view, seed=1)
        for p, q in zip(param_list(a.encoder, a.head), param_list(b.encoder, b.head)):
            assert np.array_equal(p, q)
        assert np.array_equal(a.store.anchor_low, b.store.anchor_low)
        assert np.array_equal(a.store.anchor_high, b.store.anchor_high)
        assert [r.row() for r in a.history.rows] == [r.row() for r in b.history.rows]
        c = train(TINY_TRAIN, view, seed=2)
        assert not np.array_equal(
            a.encoder.layers[0].weight, c.encoder.layers[0].weight
        )

    def test_history_bookkeeping(self, tiny_dataset):
        result = train(TINY_TRAIN, tiny_dataset.training_view(), seed=1)
        rows = result.history.rows
        # counts (12, 18, 14) at batch size 6 give slots (2, 2, 2), so the
        # 18-sample class sets 9 batches per epoch.
        assert len(rows) == 18
        assert [r.iteration for r in rows] == list(range(1, 19))
        assert [r.epoch for r in rows] == [0] * 9 + [1] * 9
        lams = [r.lam for r in rows]
        assert lams[0] == 0.0 and lams[-1] == 1.0
        assert all(b >= a for a, b in zip(lams, lams[1:]))
        for r in rows:
            assert r.lr == pytest.approx(2e-4 * 0.95**r.epoch, rel=1e-12)
            assert r.loss_total == pytest.approx(
                r.loss_ce + r.lam * (r.loss_i2i + r.loss_i2c + r.loss_c2c), rel=1e-9
            )
            assert r.loss_i2i >= 0.0 and r.loss_i2c >= 0.0 and r.loss_c2c >= 0.0

    def test_per_epoch_lambda_ramp(self, tiny_dataset):
        cfg = config_with(lambda_per_epoch=True, epochs=3)
        result = train(cfg, tiny_dataset.training_view(), seed=1)
        by_epoch = {}
        for r in result.history.rows:
            by_epoch.setdefault(r.epoch, set()).add(r.lam)
        assert by_epoch[0] == {0.0}
        assert by_epoch[1] == {0.5}
        assert by_epoch[2] == {1.0}

    def test_ce_only_run_matches_plain_ce_loop(self, tiny_dataset):
        # With all structural terms switched off the loop must reduce to
        # ordinary cross-entropy training; an independently written loop
        # over the same batch plan reproduces it parameter-for-parameter.
        cfg = ablation_config(TINY_TRAIN, "ce-only")
        view = tiny_dataset.training_view()
        result = train(cfg, view, seed=3)

        enc, head = init_params(cfg.dims, cfg.n_classes, seed=3)
        adam = init_adam(
            enc,
            head,
            beta1=cfg.adam_beta1,
            beta2=cfg.adam_beta2,
            base_lr=cfg.base_lr,
            lr_decay=cfg.lr_decay,
            epsilon=cfg.adam_epsilon,
        )
        for epoch in range(cfg.epochs):
            for idx in stratified_batches(view.labels, cfg.batch_size, [3, epoch], 3):
                cache = forward(enc, head, view.x[idx])
                ce = cross_entropy_loss(cache.logits, view.labels[idx])
                grads = backward(enc, head, cache, d_logits=ce.logit_grads)
                adam_step(adam, enc, head, grads, epoch)

        for p, q in zip(param_list(result.encoder, result.head), param_list(enc, head)):
            assert np.array_equal(p, q)
        for r in result.history.rows:
            assert r.loss_total == r.loss_ce
            assert r.loss_i2i == 0.0 and r.loss_i2c == 0.0 and r.loss_c2c == 0.0

    def test_classification_loss_improves(self, tiny_dataset):
        # Judged on the ce-only variant: with the structural ramp active the
        # late-epoch objective deliberately trades cross entropy away.
        cfg = ablation_config(config_with(epochs=8, base_lr=2e-3), "ce-only")
        result = train(cfg, tiny_dataset.training_view(), seed=1)
        rows = result.history.rows
        first = np.mean([r.loss_ce for r in rows[:9]])
        last = np.mean([r.loss_ce for r in rows[-9:]])
        assert last < first

    def test_store_tracks_feature_geometry(self, tiny_dataset):
        result = train(TINY_TRAIN, tiny_dataset.training_view(), seed=1)
        assert result.store.dim == 4
        assert float(np.linalg.norm(result.store.anchor_low)) > 1e-6
        assert float(np.linalg.norm(result.store.anchor_high)) > 1e-6

    def test_input_validation(self, tiny_dataset):
        view = tiny_dataset.training_view()
        with pytest.raises(BadConfigError):
            train(config_with(input_dim=7), view, seed=1)
        missing = tiny_dataset.subset(tiny_dataset.coarse != 2).training_view()
        with pytest.raises(DegenerateBatchError):
            train(TINY_TRAIN, missing, seed=1)

    def test_history_csv(self, tiny_dataset, tmp_path):
        result = train(TINY_TRAIN, tiny_dataset.training_view(), seed=1)
        path = tmp_path / "history.csv"
        result.history.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(HISTORY_COLUMNS)
        assert len(lines) == 1 + len(result.history.rows)
        first = lines[1].split(",")
        assert first[0] == "1" and first[1] == "0"
        assert float(first[4]) == result.history.rows[0].loss_total


class TestEvaluateOn:
    def test_metric_keys_and_ranges(self, tiny_dataset):
        result = train(TINY_TRAIN, tiny_dataset.training_view(), seed=1)
        metrics = evaluate_on(result.encoder, result.store, tiny_dataset)
        for key in METRIC_KEYS:
            assert key in metrics
        for key in ("acc", "auc", "f1", "precision", "recall"):
            assert 0.0 <= metrics[key] <= 1.0
        assert -1.0 <= metrics["spearman_ordinality"] <= 1.0
        assert metrics["n_pos"] + metrics["n_neg"] == 18

    def test_requires_middle_samples(self, tiny_dataset):
        result = train(TINY_TRAIN, tiny_dataset.training_view(), seed=1)
        ends_only = tiny_dataset.subset(~tiny_dataset.middle_mask())
        with pytest.raises(EmptyInputError):
            evaluate_on(result.encoder, result.store, ends_only)


class TestRunSeeds:
    def test_summary_shape(self, tiny_dataset):
        sweep = run_seeds(TINY_TRAIN, tiny_dataset)
        rows = sweep.summary["per_seed"]
        assert [r["seed"] for r in rows] == [1, 2]
        assert len(sweep.results) == 2
        assert sweep.results[0].seed == 1
        for key in METRIC_KEYS:
            vals = [r[key] for r in rows]
            assert sweep.summary["mean"][key] == pytest.approx(np.mean(vals), abs=1e-12)
            assert sweep.summary["std"][key] == pytest.approx(
                np.std(vals, ddof=1), abs=1e-12
            )

    def test_single_seed_reports_zero_std(self, tiny_dataset):
        sweep = run_seeds(config_with(seeds=(4,)), tiny_dataset)
        assert all(v == 0.0 for v in sweep.summary["std"].values())

    def test_duplicate_seeds_collapse_spread(self, tiny_dataset):
        sweep = run_seeds(config_with(seeds=(1, 1)), tiny_dataset)
        rows = sweep.summary["per_seed"]
        for key in METRIC_KEYS:
            assert rows[0][key] == rows[1][key]
            assert sweep.summary["std"][key] == 0.0

    def test_separate_eval_dataset(self, tiny_dataset):
        holdout = generate(TINY_GEN, seed=61)
        sweep = run_seeds(config_with(seeds=(1,)), tiny_dataset, eval_dataset=holdout)
        direct = train(TINY_TRAIN, tiny_dataset.training_view(), seed=1)
        expected = evaluate_on(direct.encoder, direct.store, holdout)
        row = sweep.summary["per_seed"][0]
        for key in METRIC_KEYS:
            assert row[key] == expected[key]


class TestCrossValidate:
    def test_fold_structure(self, tiny_dataset):
        out = cross_validate(config_with(seeds=(1,)), tiny_dataset, k=2)
        assert [r["fold"] for r in out["folds"]] == [1, 2]
        for key in METRIC_KEYS:
            vals = [r[key] for r in out["folds"]]
            assert out["mean"][key] == pytest.approx(np.mean(vals), abs=1e-12)


class TestAblationConfig:
    def test_variant_switches(self):
        base = TrainConfig()
        expected = {
            "ce-only": (False, False, False),
            "ins2ins": (True, False, False),
            "ins2cls": (True, True, False),
            "full": (True, True, True),
        }
        for name, (i2i, i2c, c2c) in expected.items():
            cfg = ablation_config(base, name)
            assert (cfg.use_ins2ins, cfg.use_ins2cls, cfg.use_cls2cls) == (i2i, i2c, c2c)
            assert cfg.epochs == base.epochs

    def test_unknown_variant(self):
        with pytest.raises(BadConfigError):
            ablation_config(TrainConfig(), "everything")
