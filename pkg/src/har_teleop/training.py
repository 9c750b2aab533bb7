"""Mini-batch training, evaluation, and the window-size ablation."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .actions import ACTION_NAMES, NUM_ACTIONS
from .datasets import VideoRecord, WindowedDataset, split_by_video, window_dataset
from .gcn import (
    ModelParams,
    NumericalError,
    backward_batch,
    batched_adjacency,
    cross_entropy_batch,
    forward_batch,
    init_params,
    window_adjacency,
)
from .optim import AdamWState, PlateauScheduler, adamw_step

log = logging.getLogger(__name__)

DEFAULT_ABLATION_SIZES = (1, 2, 5, 10, 20, 40, 60, 80, 150)


@dataclass(frozen=True)
class TrainConfig:
    window_size: int = 40
    hidden_dim: int = 128
    dropout_rate: float = 0.3
    leaky_slope: float = 0.01
    learning_rate: float = 1e-3
    weight_decay: float = 1e-2
    batch_size: int = 32
    max_epochs: int = 100
    scheduler_factor: float = 0.5
    scheduler_patience: int = 10
    early_stop_patience: int = 30
    stop_at_val_accuracy: Optional[float] = None
    split_ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ValueError("batch_size must be >= 1 and max_epochs >= 0")
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")


@dataclass(frozen=True)
class Metrics:
    """Accuracy summary of one dataset pass."""

    accuracy: float
    per_class: tuple[float, float, float, float]
    loss: float
    epoch: int = -1
    lr: float = float("nan")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    valid: Metrics
    lr: float
    seconds: float


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochStats]
    best_epoch: int
    best_valid_accuracy: float
    stopped_reason: str


class _AdjacencyCache:
    """Block-diagonal adjacencies per batch size, one base per window size."""

    def __init__(self, window_size: int, dtype) -> None:
        self._base = window_adjacency(window_size, dtype=dtype)
        self._cache: dict[int, object] = {}

    def get(self, batch_size: int):
        if batch_size not in self._cache:
            self._cache[batch_size] = batched_adjacency(self._base, batch_size)
        return self._cache[batch_size]


def evaluate(
    params: ModelParams,
    dataset: WindowedDataset,
    batch_size: int = 256,
    epoch: int = -1,
    lr: float = float("nan"),
) -> Metrics:
    """Inference-mode accuracy (overall and per class) plus mean loss."""
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot evaluate an empty dataset")
    adj = _AdjacencyCache(dataset.window_size, params.dtype)
    correct = np.zeros(NUM_ACTIONS, dtype=np.int64)
    totals = np.zeros(NUM_ACTIONS, dtype=np.int64)
    loss_sum = 0.0
    for lo in range(0, n, batch_size):
        idx = range(lo, min(lo + batch_size, n))
        feats = dataset.stacked_features(idx)
        labels = dataset.labels[lo:lo + len(idx)]
        probs, trace = forward_batch(feats, adj.get(len(idx)), len(idx), params)
        loss_sum += cross_entropy_batch(trace.logits, labels) * len(idx)
        preds = probs.argmax(axis=1)
        for c in range(NUM_ACTIONS):
            mask = labels == c
            totals[c] += int(mask.sum())
            correct[c] += int((preds[mask] == c).sum())
    per_class = tuple(
        float(correct[c] / totals[c]) if totals[c] else float("nan")
        for c in range(NUM_ACTIONS)
    )
    return Metrics(
        accuracy=float(correct.sum() / n),
        per_class=per_class,
        loss=loss_sum / n,
        epoch=epoch,
        lr=lr,
    )


def train(
    train_set: WindowedDataset,
    valid_set: WindowedDataset,
    config: TrainConfig,
    progress: Optional[Callable[[EpochStats], None]] = None,
) -> TrainResult:
    """Mini-batch AdamW training with plateau scheduling and early stopping.

    Keeps the parameters of the best validation epoch and returns those.
    Sequential and deterministic: identical config and data reproduce the
    identical history. A non-finite loss aborts with the best checkpoint.
    """
    if len(train_set) == 0 or len(valid_set) == 0:
        raise ValueError("train and valid splits must be non-empty")
    if not (train_set.window_size == valid_set.window_size == config.window_size):
        raise ValueError("window sizes of splits and config disagree")

    params = init_params(
        hidden_dim=config.hidden_dim,
        dropout_rate=config.dropout_rate,
        leaky_slope=config.leaky_slope,
        seed=config.seed,
    )
    state = AdamWState(lr=config.learning_rate, weight_decay=config.weight_decay)
    sched = PlateauScheduler(
        factor=config.scheduler_factor, patience=config.scheduler_patience
    )
    rng = np.random.default_rng([config.seed, 1])
    adj = _AdjacencyCache(config.window_size, params.dtype)

    best_params = params.copy()
    best_acc, best_epoch = -1.0, -1
    history: list[EpochStats] = []
    stagnant = 0
    reason = "max_epochs"

    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_set))
        loss_sum = 0.0
        try:
            for lo in range(0, len(order), config.batch_size):
                idx = order[lo:lo + config.batch_size]
                feats = train_set.stacked_features(idx)
                labels = train_set.labels[idx]
                _, trace = forward_batch(
                    feats, adj.get(len(idx)), len(idx), params, mode="training", rng=rng
                )
                loss_sum += cross_entropy_batch(trace.logits, labels) * len(idx)
                grads = backward_batch(trace, labels)
                adamw_step(params, grads, state)
        except NumericalError as exc:
            log.error("epoch %d diverged (%s); keeping best epoch %d",
                      epoch, exc, best_epoch)
            reason = "diverged"
            break

        train_loss = loss_sum / len(train_set)
        valid = evaluate(params, valid_set, epoch=epoch, lr=state.lr)
        sched.step(state, valid.accuracy)
        stats = EpochStats(
            epoch=epoch,
            train_loss=train_loss,
            valid=valid,
            lr=state.lr,
            seconds=time.perf_counter() - t0,
        )
        history.append(stats)
        if progress is not None:
            progress(stats)

        if valid.accuracy > best_acc:
            best_acc, best_epoch = valid.accuracy, epoch
            best_params = params.copy()
            stagnant = 0
        else:
            stagnant += 1
            if stagnant >= config.early_stop_patience:
                reason = "early_stop"
                break
        if (config.stop_at_val_accuracy is not None
                and valid.accuracy >= config.stop_at_val_accuracy):
            reason = "target_accuracy"
            break

    return TrainResult(
        params=best_params,
        history=history,
        best_epoch=best_epoch,
        best_valid_accuracy=best_acc if best_epoch >= 0 else float("nan"),
        stopped_reason=reason if history else "no_epochs",
    )


# ---------------------------------------------------------------------------
# ablation


@dataclass(frozen=True)
class AblationRow:
    window_size: int
    num_samples: int
    train: Optional[Metrics] = None
    valid: Optional[Metrics] = None
    test: Optional[Metrics] = None
    error: Optional[str] = None


def ablate(
    videos: Sequence[VideoRecord],
    window_sizes: Sequence[int] = DEFAULT_ABLATION_SIZES,
    config: TrainConfig = TrainConfig(),
    progress: Optional[Callable[[EpochStats], None]] = None,
) -> list[AblationRow]:
    """Train once per window size on one fixed video split.

    The split is drawn once so every row sees the same videos; a failing
    row records its error and the remaining rows still run.
    """
    train_videos, valid_videos, test_videos = split_by_video(
        videos, config.split_ratios, seed=config.seed
    )
    rows = []
    for size in window_sizes:
        sized = replace(config, window_size=size)
        try:
            tr = window_dataset(train_videos, size)
            va = window_dataset(valid_videos, size)
            te = window_dataset(test_videos, size)
            num_samples = len(tr) + len(va) + len(te)
            result = train(tr, va, sized, progress=progress)
            rows.append(
                AblationRow(
                    window_size=size,
                    num_samples=num_samples,
                    train=evaluate(result.params, tr),
                    valid=evaluate(result.params, va),
                    test=evaluate(result.params, te),
                )
            )
        except (ValueError, NumericalError) as exc:
            log.error("ablation row N_w=%d failed: %s", size, exc)
            rows.append(AblationRow(window_size=size, num_samples=0, error=str(exc)))
    return rows


def write_ablation_csv(rows: Sequence[AblationRow], path: str | Path) -> None:
    """Machine-readable report: one row per window size."""
    header = ["window_size", "num_samples", "train_accuracy", "valid_accuracy",
              "test_accuracy"]
    header += [f"test_{name}" for name in ACTION_NAMES]
    header += ["error"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            if row.error is not None:
                writer.writerow([row.window_size, row.num_samples] + [""] * 7
                                + [row.error])
                continue
            record = [row.window_size, row.num_samples,
                      f"{row.train.accuracy:.4f}", f"{row.valid.accuracy:.4f}",
                      f"{row.test.accuracy:.4f}"]
            record += [f"{acc:.4f}" for acc in row.test.per_class]
            record += [""]
            writer.writerow(record)
