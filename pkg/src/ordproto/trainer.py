"""Training loop: per-batch loss assembly, Adam updates, EMA anchor updates.

Each iteration forwards a stratified batch, builds the enabled loss terms
on the resulting features, combines them with the scheduled structural
weight, applies one Adam step, and then lets the anchor prototypes track
the batch class means. Runs are deterministic given (config, data, seed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .data import SyntheticOrdinalDataset, TrainingSet, kfold_split, stratified_batches
from .encoder import (
    AdamState,
    EncoderParams,
    HeadParams,
    adam_step,
    backward,
    encode,
    forward,
    init_adam,
    init_params,
    learning_rate,
)
from .errors import (
    BadConfigError,
    DatasetIOError,
    DegenerateBatchError,
    EmptyInputError,
    OrdprotoError,
    OutOfRangeError,
    TrainingError,
)
from .evaluation import binary_metrics, spearman
from .linalg import cosine_similarity
from .losses import (
    FeatureBatch,
    LossBundle,
    cross_entropy_loss,
    cls2cls_loss,
    ins2cls_loss,
    ins2ins_loss,
    local_prototypes,
    total_loss,
)
from .prototypes import GlobalPrototypeStore, ema_update, progression_scores
from .ranking import BlackboxConfig

METRIC_KEYS = ("acc", "auc", "f1", "precision", "recall", "spearman_ordinality")


@dataclass(frozen=True)
class TrainConfig:
    n_classes: int = 3
    input_dim: int = 16
    hidden_dims: tuple[int, ...] = (64, 64)
    feature_dim: int = 32
    epochs: int = 60
    batch_size: int = 8
    base_lr: float = 2e-4
    lr_decay: float = 0.95
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    ema_sigma: float = 0.9
    lambda_start: float = 0.0
    lambda_end: float = 1.0
    lambda_per_epoch: bool = False
    blackbox_lambda: float = 1.0
    use_ins2ins: bool = True
    use_ins2cls: bool = True
    use_cls2cls: bool = True
    detach_class_spread: bool = False
    anchor_classes: tuple[int, int] = (1, 3)
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        object.__setattr__(self, "anchor_classes", tuple(int(c) for c in self.anchor_classes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.n_classes < 2:
            raise BadConfigError("n_classes must be >= 2")
        if self.input_dim < 1 or self.feature_dim < 1 or any(d < 1 for d in self.hidden_dims):
            raise BadConfigError("all layer dims must be >= 1")
        if self.epochs < 1:
            raise BadConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise BadConfigError("batch_size must be >= 1")
        if not 0.0 < self.ema_sigma < 1.0:
            raise BadConfigError("ema_sigma must lie strictly inside (0, 1)")
        if not 0.0 <= self.lambda_start <= self.lambda_end <= 1.0:
            raise BadConfigError("need 0 <= lambda_start <= lambda_end <= 1")
        if self.blackbox_lambda <= 0:
            raise BadConfigError("blackbox_lambda must be positive")
        if not self.seeds:
            raise BadConfigError("seeds must be non-empty")
        lo, hi = self.anchor_classes
        if lo == hi or not (1 <= lo <= self.n_classes and 1 <= hi <= self.n_classes):
            raise BadConfigError(
                f"anchor_classes must be two distinct classes in 1..{self.n_classes}"
            )

    @property
    def dims(self) -> list[int]:
        return [self.input_dim, *self.hidden_dims, self.feature_dim]


def lambda_schedule(iteration: int, total_iters: int) -> float:
    """Linear ramp position iteration / total_iters, validated to [0, 1]."""
    if total_iters < 1:
        raise OutOfRangeError(f"total_iters must be >= 1, got {total_iters}")
    if not 0 <= iteration <= total_iters:
        raise OutOfRangeError(f"iteration {iteration} outside 0..{total_iters}")
    return iteration / total_iters


HISTORY_COLUMNS = (
    "iteration",
    "epoch",
    "lr",
    "lambda",
    "loss_total",
    "loss_ce",
    "loss_i2i",
    "loss_i2c",
    "loss_c2c",
)


@dataclass
class IterationRecord:
    iteration: int
    epoch: int
    lr: float
    lam: float
    loss_total: float
    loss_ce: float
    loss_i2i: float
    loss_i2c: float
    loss_c2c: float

    def row(self) -> list:
        return [
            self.iteration,
            self.epoch,
            repr(self.lr),
            repr(self.lam),
            repr(self.loss_total),
            repr(self.loss_ce),
            repr(self.loss_i2i),
            repr(self.loss_i2c),
            repr(self.loss_c2c),
        ]


@dataclass
class TrainHistory:
    rows: list[IterationRecord] = field(default_factory=list)

    def write_csv(self, path) -> None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(HISTORY_COLUMNS)
                for rec in self.rows:
                    writer.writerow(rec.row())
        except OSError as exc:
            raise DatasetIOError(f"cannot write history: {exc}") from exc


@dataclass
class TrainResult:
    encoder: EncoderParams
    head: HeadParams
    store: GlobalPrototypeStore
    history: TrainHistory
    adam: AdamState
    seed: int


def train(config: TrainConfig, data: TrainingSet, seed: int) -> TrainResult:
    """Run the full loop on a coarse-labeled training set."""
    if data.input_dim != config.input_dim:
        raise BadConfigError(
            f"config input_dim {config.input_dim} != data input_dim {data.input_dim}"
        )
    present = np.unique(data.labels)
    expected = np.arange(1, config.n_classes + 1)
    if present.size != config.n_classes or np.any(present != expected):
        raise DegenerateBatchError(
            f"training data must contain every class 1..{config.n_classes}, found {present}"
        )

    enc, head = init_params(config.dims, config.n_classes, seed)
    adam = init_adam(
        enc,
        head,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        base_lr=config.base_lr,
        lr_decay=config.lr_decay,
        epsilon=config.adam_epsilon,
    )
    store = GlobalPrototypeStore(
        dim=config.feature_dim,
        sigma=config.ema_sigma,
        anchor_classes=config.anchor_classes,
    )
    bb = BlackboxConfig(config.blackbox_lambda)
    history = TrainHistory()

    # The batch plan depends only on class counts, so every epoch has the
    # same number of iterations and the schedule length is known up front.
    per_epoch = len(stratified_batches(data.labels, config.batch_size, [seed, 0], config.n_classes))
    total_iters = config.epochs * per_epoch
    span = config.lambda_end - config.lambda_start
    lo_cls, hi_cls = config.anchor_classes

    iteration = 0
    for epoch in range(config.epochs):
        batches = stratified_batches(
            data.labels, config.batch_size, [seed, epoch], config.n_classes
        )
        lr = learning_rate(adam, epoch)
        for idx in batches:
            iteration += 1
            if config.lambda_per_epoch:
                lam = config.lambda_start + span * lambda_schedule(
                    epoch, max(config.epochs - 1, 1)
                )
            else:
                lam = config.lambda_start + span * lambda_schedule(
                    iteration - 1, max(total_iters - 1, 1)
                )
            try:
                cache = forward(enc, head, data.x[idx])
                batch = FeatureBatch(cache.features, data.labels[idx], config.n_classes)
                protos = local_prototypes(batch)

                zero = LossBundle(0.0)
                i2i = ins2ins_loss(batch, bb) if config.use_ins2ins else zero
                i2c = ins2cls_loss(batch, protos) if config.use_ins2cls else zero
                c2c = (
                    cls2cls_loss(batch, protos, bb, detach_spread=config.detach_class_spread)
                    if config.use_cls2cls
                    else zero
                )
                hyb_grads = np.zeros_like(batch.features)
                for part in (i2i, i2c, c2c):
                    if part.feature_grads is not None:
                        hyb_grads += part.feature_grads
                hyb = LossBundle(i2i.value + i2c.value + c2c.value, feature_grads=hyb_grads)
                ce = cross_entropy_loss(cache.logits, batch.labels)
                combined = total_loss(ce, hyb, lam)

                grads = backward(enc, head, cache, combined.feature_grads, combined.logit_grads)
                adam_step(adam, enc, head, grads, epoch)

                mu_low = protos.per_class[lo_cls - 1]
                mu_high = protos.per_class[hi_cls - 1]
                ema_update(store, mu_low, mu_high)
            except OrdprotoError as exc:
                raise TrainingError(f"iteration {iteration}: {exc}", iteration) from exc

            history.rows.append(
                IterationRecord(
                    iteration,
                    epoch,
                    lr,
                    lam,
                    combined.value,
                    ce.value,
                    i2i.value,
                    i2c.value,
                    c2c.value,
                )
            )
    return TrainResult(enc, head, store, history, adam, seed)


def evaluate_on(
    enc: EncoderParams, store: GlobalPrototypeStore, dataset: SyntheticOrdinalDataset
) -> dict:
    """Middle-class fine-split metrics plus the ordinality diagnostic.

    Binary metrics come from progression scores on the samples that carry
    a fine label; the Spearman diagnostic correlates cos(z, anchor_high)
    with the latent position over the whole dataset.
    """
    mask = dataset.middle_mask()
    if not mask.any():
        raise EmptyInputError("dataset has no middle-class samples to evaluate")
    z_mid = encode(enc, dataset.x[mask])
    scores = progression_scores(z_mid, store)
    metrics = binary_metrics(scores, dataset.fine[mask])
    z_all = encode(enc, dataset.x)
    cos_high = np.array([cosine_similarity(z, store.anchor_high) for z in z_all])
    metrics["spearman_ordinality"] = spearman(cos_high, dataset.latent_t)
    return metrics


def _mean_std(rows: list[dict]) -> tuple[dict, dict]:
    mean, std = {}, {}
    for key in METRIC_KEYS:
        vals = np.array([r[key] for r in rows], dtype=np.float64)
        mean[key] = float(vals.mean())
        std[key] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return mean, std


@dataclass
class SeedSweepResult:
    summary: dict
    results: list[TrainResult]


def run_seeds(
    config: TrainConfig,
    dataset: SyntheticOrdinalDataset,
    eval_dataset: SyntheticOrdinalDataset | None = None,
) -> SeedSweepResult:
    """Train once per configured seed and evaluate each run.

    Evaluation uses ``eval_dataset`` when given, otherwise the training
    dataset's own fine split (those labels are invisible to the trainer).
    """
    eval_ds = eval_dataset if eval_dataset is not None else dataset
    view = dataset.training_view()
    rows, results = [], []
    for seed in config.seeds:
        result = train(config, view, seed)
        metrics = evaluate_on(result.encoder, result.store, eval_ds)
        rows.append({"seed": seed, **metrics})
        results.append(result)
    mean, std = _mean_std(rows)
    summary = {"per_seed": rows, "mean": mean, "std": std}
    return SeedSweepResult(summary, results)


def cross_validate(config: TrainConfig, dataset: SyntheticOrdinalDataset, k: int) -> dict:
    """Stratified k-fold: train on k-1 folds, score the held-out fold.

    Every fold trains with the first configured seed; folds are
    independent, so the per-fold spread plays the role the seed spread
    plays in a single-split run.
    """
    seed = config.seeds[0]
    folds = kfold_split(dataset.coarse, k, seed)
    rows = []
    for f in range(1, k + 1):
        train_ds = dataset.subset(folds != f)
        test_ds = dataset.subset(folds == f)
        result = train(config, train_ds.training_view(), seed)
        metrics = evaluate_on(result.encoder, result.store, test_ds)
        rows.append({"fold": f, **metrics})
    mean, std = _mean_std(rows)
    return {"folds": rows, "mean": mean, "std": std}


def ablation_config(config: TrainConfig, variant: str) -> TrainConfig:
    """Switch loss components by cumulative variant name."""
    variants = {
        "ce-only": (False, False, False),
        "ins2ins": (True, False, False),
        "ins2cls": (True, True, False),
        "full": (True, True, True),
    }
    if variant not in variants:
        raise BadConfigError(f"unknown ablation variant {variant!r}")
    i2i, i2c, c2c = variants[variant]
    return replace(config, use_ins2ins=i2i, use_ins2cls=i2c, use_cls2cls=c2c)
