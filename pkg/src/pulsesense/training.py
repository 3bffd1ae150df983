"""Dataset splitting, the training loop, repeat runs, and k-fold CV.

The loop follows the fixed recipe: ADAM, per-epoch validation, halve the
learning rate after `lr_plateau_patience` epochs without strict validation
improvement, stop after `early_stop_patience` epochs without improvement,
and return the parameters from the best epoch. Both patience counters reset
on improvement and run concurrently; a plateau trigger does not reset the
early-stop counter.

Regression targets are z-scored on the training set by default (the network
starts near zero output, and at the fixed 0.001 learning rate it cannot
traverse a 70-BPM offset in any reasonable number of steps). The fitted
scale/offset are folded into the affine head of the returned parameters, so
predictions come out in label units and no side-car state is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dsp.pipeline import WindowSegment
from .errors import (
    ConfigInvalidValue,
    DivergedLoss,
    EmptyTrainSet,
    TooFewSegments,
)
from .metrics import MetricsReport, classification_metrics, regression_metrics
from .nn import (
    AdamState,
    ModelConfig,
    ModelParams,
    adam_step,
    backward_batch,
    bce_loss,
    forward_batch,
    init_params,
    mse_loss,
)

SPLIT_MODES = ("window_level", "recording_level")

SegmentData = Union[Sequence[WindowSegment], Tuple[np.ndarray, np.ndarray]]


@dataclass
class TrainingConfig:
    learning_rate: float = 0.001
    batch_size: int = 64
    max_epochs: int = 200
    early_stop_patience: int = 10
    lr_plateau_patience: int = 5
    lr_factor: float = 0.5
    val_fraction_of_train: float = 0.2
    seed: int = 0
    split: str = "window_level"
    standardize_targets: bool = True
    segments_path: Optional[str] = None  # CLI wiring, unused by train()

    _ALLOWED = ("learning_rate", "batch_size", "max_epochs",
                "early_stop_patience", "lr_plateau_patience", "lr_factor",
                "val_fraction_of_train", "seed", "split",
                "standardize_targets", "segments")

    def __post_init__(self):
        if self.early_stop_patience < 1 or self.lr_plateau_patience < 1:
            raise ConfigInvalidValue("patiences must be >= 1")
        if not 0.0 < self.val_fraction_of_train < 1.0:
            raise ConfigInvalidValue("val_fraction_of_train must be in (0, 1)")
        if self.split not in SPLIT_MODES:
            raise ConfigInvalidValue(f"split must be one of {SPLIT_MODES}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigInvalidValue("batch_size and max_epochs must be >= 1")
        if self.seed < 0:
            raise ConfigInvalidValue("seed must be non-negative")

    @classmethod
    def from_dict(cls, block: dict) -> "TrainingConfig":
        from .config import reject_unknown
        reject_unknown("training", block, cls._ALLOWED)
        kwargs = {k: block[k] for k in block if k != "segments"}
        cfg = cls(**kwargs)
        cfg.segments_path = block.get("segments")
        return cfg

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "early_stop_patience": self.early_stop_patience,
            "lr_plateau_patience": self.lr_plateau_patience,
            "lr_factor": self.lr_factor,
            "val_fraction_of_train": self.val_fraction_of_train,
            "seed": self.seed,
            "split": self.split,
            "standardize_targets": self.standardize_targets,
        }


@dataclass
class SplitIndices:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass
class TrainHistory:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    learning_rate: List[float] = field(default_factory=list)
    lr_reductions: List[int] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,lr"]
        for e, (tl, vl, lr) in enumerate(
                zip(self.train_loss, self.val_loss, self.learning_rate), start=1):
            lines.append(f"{e},{tl!r},{vl!r},{lr!r}")
        return "\n".join(lines) + "\n"


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def segments_to_arrays(segments: SegmentData) -> Tuple[np.ndarray, np.ndarray]:
    """Normalize either a WindowSegment list or an (X, y) pair to arrays."""
    if isinstance(segments, tuple) and len(segments) == 2:
        x, y = segments
        return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    x = np.stack([seg.values for seg in segments]).astype(np.float64)
    y = np.asarray([seg.label for seg in segments], dtype=np.float64)
    return x, y


def split_segments(segments_or_count, config: TrainingConfig,
                   recording_ids: Optional[Sequence] = None) -> SplitIndices:
    """Seeded shuffle then a 64/16/20 cut.

    In recording_level mode whole recordings are shuffled and the cuts land
    on recording boundaries, so no recording straddles two splits.
    """
    if isinstance(segments_or_count, (int, np.integer)):
        n = int(segments_or_count)
    else:
        n = len(segments_or_count)
    if n < 5:
        raise TooFewSegments(f"need at least 5 segments, got {n}")
    rng = np.random.default_rng(config.seed)
    n_train = _round_half_up(0.64 * n)
    n_val = _round_half_up(0.16 * n)

    if config.split == "window_level":
        perm = rng.permutation(n)
        return SplitIndices(perm[:n_train], perm[n_train:n_train + n_val],
                            perm[n_train + n_val:])

    if recording_ids is None or len(recording_ids) != n:
        raise ConfigInvalidValue(
            "recording_level split needs one recording id per segment")
    rec_ids = list(dict.fromkeys(recording_ids))  # first-appearance order
    order = rng.permutation(len(rec_ids))
    by_rec = {rid: [] for rid in rec_ids}
    for idx, rid in enumerate(recording_ids):
        by_rec[rid].append(idx)
    train, val, test = [], [], []
    for pos in order:
        chunk = by_rec[rec_ids[pos]]
        if len(train) < n_train:
            train.extend(chunk)
        elif len(train) + len(val) < n_train + n_val:
            val.extend(chunk)
        else:
            test.extend(chunk)
    return SplitIndices(np.asarray(train, dtype=np.intp),
                        np.asarray(val, dtype=np.intp),
                        np.asarray(test, dtype=np.intp))


def _batch_losses(params, x, y, head, chunk=64):
    """Mean loss over a dataset, evaluated in chunks at inference settings."""
    total = 0.0
    for lo in range(0, x.shape[0], chunk):
        preds, _ = forward_batch(params, x[lo:lo + chunk], training=False)
        if head == "binary":
            losses, _ = bce_loss(preds, y[lo:lo + chunk])
        else:
            losses, _ = mse_loss(preds, y[lo:lo + chunk])
        total += float(losses.sum())
    return total / x.shape[0]


def _fold_target_scaler(params: ModelParams, offset: float, scale: float) -> ModelParams:
    """Fold prediction = scale * net + offset into the affine head weights."""
    out = params.copy()
    out.head_w *= scale
    out.head_b = out.head_b * scale + offset
    return out


def train(segments: SegmentData, model_config: ModelConfig,
          config: TrainingConfig, *,
          val_segments: Optional[SegmentData] = None,
          val_loss_fn: Optional[Callable[[int, ModelParams], float]] = None,
          ) -> Tuple[ModelParams, TrainHistory]:
    """Train on ``segments``; the test split must already be held out.

    If ``val_segments`` is missing, ``val_fraction_of_train`` of the segments
    is carved off (seeded) for validation. ``val_loss_fn(epoch, params)`` is
    a test hook that replaces the validation-loss computation.
    """
    x_all, y_all = segments_to_arrays(segments)
    if x_all.shape[0] == 0:
        raise EmptyTrainSet("no training segments")

    if val_segments is not None:
        x_train, y_train = x_all, y_all
        x_val, y_val = segments_to_arrays(val_segments)
    else:
        n = x_all.shape[0]
        n_val = max(1, _round_half_up(config.val_fraction_of_train * n))
        if n_val >= n:
            raise EmptyTrainSet("validation carve-out leaves no training data")
        perm = np.random.default_rng([config.seed, 0xC0DE]).permutation(n)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
        x_train, y_train = x_all[train_idx], y_all[train_idx]
        x_val, y_val = x_all[val_idx], y_all[val_idx]

    head = model_config.head
    offset, scale = 0.0, 1.0
    if head == "regression" and config.standardize_targets:
        offset = float(y_train.mean())
        std = float(y_train.std())
        scale = std if std > 1e-9 else 1.0
    yt = (y_train - offset) / scale
    yv = (y_val - offset) / scale if y_val.size else y_val
    loss_unit = scale * scale if head == "regression" else 1.0

    params = init_params(model_config, config.seed)
    state = AdamState.init(params, config.learning_rate)
    history = TrainHistory()

    best_val = math.inf
    best_params = params.copy()
    best_epoch = 0
    plateau_counter = 0
    stop_counter = 0
    n_train = x_train.shape[0]

    for epoch in range(1, config.max_epochs + 1):
        order = np.random.default_rng([config.seed, 1, epoch]).permutation(n_train)
        loss_sum = 0.0
        for b_idx, lo in enumerate(range(0, n_train, config.batch_size)):
            sel = order[lo:lo + config.batch_size]
            xb, yb = x_train[sel], yt[sel]
            preds, cache = forward_batch(params, xb, training=True,
                                         rng_seed=[config.seed, 2, epoch, b_idx])
            if head == "binary":
                losses, grads = bce_loss(preds, yb)
            else:
                losses, grads = mse_loss(preds, yb)
            loss_sum += float(losses.sum())
            dpred = grads / sel.size
            grad_params = backward_batch(params, cache, dpred)
            params, state = adam_step(state, params, grad_params)
        train_loss = loss_sum / n_train * loss_unit

        if val_loss_fn is not None:
            val_loss = float(val_loss_fn(epoch, params))
        elif x_val.shape[0]:
            val_loss = _batch_losses(params, x_val, yv, head) * loss_unit
        else:
            val_loss = train_loss

        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.learning_rate.append(state.learning_rate)
        history.stopped_epoch = epoch

        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            history.best_epoch = best_epoch
            raise DivergedLoss(f"non-finite loss at epoch {epoch}", history)

        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            best_epoch = epoch
            plateau_counter = 0
            stop_counter = 0
        else:
            plateau_counter += 1
            stop_counter += 1
            if plateau_counter >= config.lr_plateau_patience:
                state = state.with_learning_rate(state.learning_rate * config.lr_factor)
                history.lr_reductions.append(epoch)
                plateau_counter = 0
            if stop_counter >= config.early_stop_patience:
                break

    history.best_epoch = best_epoch
    if head == "regression" and (offset != 0.0 or scale != 1.0):
        best_params = _fold_target_scaler(best_params, offset, scale)
    return best_params, history


def predict(params: ModelParams, segments: SegmentData, chunk: int = 64) -> np.ndarray:
    """Inference over a segment set; predictions come out in label units."""
    x, _ = segments_to_arrays(segments)
    preds = np.empty(x.shape[0])
    for lo in range(0, x.shape[0], chunk):
        preds[lo:lo + chunk], _ = forward_batch(params, x[lo:lo + chunk],
                                                training=False)
    return preds


def evaluate(params: ModelParams, segments: SegmentData, *,
             threshold: float = 1.5,
             decision_threshold: float = 0.5) -> MetricsReport:
    """Predict then score with the metric set matching the head type."""
    x, y = segments_to_arrays(segments)
    preds = predict(params, (x, y))
    if params.config.head == "binary":
        return classification_metrics(preds, y, decision_threshold)
    return regression_metrics(y, preds, threshold)


@dataclass
class AggregateReport:
    """Element-wise mean and sample std of every metric across runs/folds."""

    runs: List[MetricsReport]
    means: dict
    stds: dict

    def to_json_dict(self) -> dict:
        return {
            "n_runs": len(self.runs),
            "means": self.means,
            "stds": self.stds,
            "runs": [r.to_json_dict() for r in self.runs],
        }


def aggregate_reports(reports: Sequence[MetricsReport]) -> AggregateReport:
    means, stds = {}, {}
    for name in MetricsReport.NUMERIC_FIELDS:
        vals = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        if not vals:
            continue
        arr = np.asarray(vals, dtype=np.float64)
        means[name] = float(arr.mean())
        stds[name] = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return AggregateReport(list(reports), means, stds)


def repeat_runs(segments: SegmentData, model_config: ModelConfig,
                config: TrainingConfig, n: int = 3, *,
                threshold: float = 1.5,
                recording_ids: Optional[Sequence] = None) -> AggregateReport:
    """n independent seeded runs (seed, seed+1, ...) with fresh shuffles."""
    x, y = segments_to_arrays(segments)
    reports = []
    for run in range(n):
        cfg = replace(config, seed=config.seed + run)
        idx = split_segments(x.shape[0], cfg, recording_ids)
        params, _ = train((x[idx.train], y[idx.train]), model_config, cfg,
                          val_segments=(x[idx.val], y[idx.val]))
        reports.append(evaluate(params, (x[idx.test], y[idx.test]),
                                threshold=threshold))
    return aggregate_reports(reports)


def kfold_cv(segments: SegmentData, model_config: ModelConfig,
             config: TrainingConfig, k: int = 10, *,
             threshold: float = 1.5) -> Tuple[List[MetricsReport], AggregateReport]:
    """Seeded shuffle, k contiguous folds, each fold once as the test set."""
    x, y = segments_to_arrays(segments)
    n = x.shape[0]
    if n < k:
        raise TooFewSegments(f"{n} segments cannot form {k} folds")
    perm = np.random.default_rng(config.seed).permutation(n)
    base, extra = divmod(n, k)
    reports = []
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        test_idx = perm[start:start + size]
        rest = np.concatenate([perm[:start], perm[start + size:]])
        start += size
        params, _ = train((x[rest], y[rest]), model_config, config)
        reports.append(evaluate(params, (x[test_idx], y[test_idx]),
                                threshold=threshold))
    return reports, aggregate_reports(reports)
