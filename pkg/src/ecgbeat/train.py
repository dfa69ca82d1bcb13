"""Training loop with early stopping and reduce-on-plateau callbacks."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import ndkernel as nk
from .data import Dataset, batches
from .errors import DataError, NumericError
from .model import Model

log = logging.getLogger(__name__)

EVAL_BATCH = 512


@dataclass
class EarlyStopConfig:
    metric: str = "val_acc"
    patience: int = 5
    min_delta: float = 0.0
    mode: str = "max"

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("early-stop patience must be >= 1")
        if self.mode not in ("max", "min"):
            raise ValueError("mode must be 'max' or 'min'")


@dataclass
class PlateauConfig:
    metric: str = "val_acc"
    patience: int = 3
    factor: float = 0.1
    mode: str = "max"
    min_lr: float = 1e-6
    min_delta: float = 0.0

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("plateau patience must be >= 1")
        if not 0 < self.factor < 1:
            raise ValueError("plateau factor must lie in (0, 1)")
        if self.mode not in ("max", "min"):
            raise ValueError("mode must be 'max' or 'min'")


@dataclass
class TrainConfig:
    batch_size: int = 128
    learning_rate: float = 1e-3
    max_epochs: int = 100
    seed: int = 0
    early_stop: EarlyStopConfig = field(default_factory=EarlyStopConfig)
    plateau: PlateauConfig = field(default_factory=PlateauConfig)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")

    @property
    def optimizer(self) -> nk.OptimizerConfig:
        return nk.OptimizerConfig(self.learning_rate, self.beta1, self.beta2, self.epsilon)

    def to_dict(self) -> dict:
        return asdict(self)


def _improved(metric: float, best: float, min_delta: float, mode: str) -> bool:
    if mode == "max":
        return metric > best + min_delta
    return metric < best - min_delta


class EarlyStopState:
    """Counts epochs without strict improvement; remembers the best weights."""

    def __init__(self, cfg: EarlyStopConfig):
        self.cfg = cfg
        self.best_metric = -math.inf if cfg.mode == "max" else math.inf
        self.best_epoch = 0
        self.epochs_since_improve = 0
        self.best_state: dict | None = None
        self._epoch = 0

    def update(self, metric: float, snapshot=None) -> bool:
        """Feed one epoch's metric; returns True when training should stop.

        ``snapshot`` is called (no arguments) on improvement and its result kept
        as the best weights.
        """
        self._epoch += 1
        if _improved(metric, self.best_metric, self.cfg.min_delta, self.cfg.mode):
            self.best_metric = metric
            self.best_epoch = self._epoch
            self.epochs_since_improve = 0
            if snapshot is not None:
                self.best_state = snapshot()
        else:
            self.epochs_since_improve += 1
        return self.epochs_since_improve >= self.cfg.patience


class PlateauState:
    def __init__(self, cfg: PlateauConfig, lr: float):
        self.cfg = cfg
        self.best_metric = -math.inf if cfg.mode == "max" else math.inf
        self.stagnant_count = 0
        self.current_lr = max(lr, cfg.min_lr)

    def update(self, metric: float) -> float:
        """Feed one epoch's metric; returns the learning rate for the next epoch."""
        if _improved(metric, self.best_metric, self.cfg.min_delta, self.cfg.mode):
            self.best_metric = metric
            self.stagnant_count = 0
        else:
            self.stagnant_count += 1
            if self.stagnant_count >= self.cfg.patience:
                self.current_lr = max(self.current_lr * self.cfg.factor, self.cfg.min_lr)
                self.stagnant_count = 0
        return self.current_lr


def early_stop_update(state: EarlyStopState, epoch_metric: float) -> str:
    return "stop" if state.update(epoch_metric) else "continue"


def plateau_lr_update(state: PlateauState, epoch_metric: float) -> float:
    return state.update(epoch_metric)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float
    wall_seconds: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def wall_seconds(self) -> float:
        return sum(e.wall_seconds for e in self.epochs)

    def column(self, name: str) -> list[float]:
        return [getattr(e, name) for e in self.epochs]

    def to_jsonl(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for rec in self.epochs:
                fh.write(json.dumps(asdict(rec)) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "TrainHistory":
        with Path(path).open(encoding="utf-8") as fh:
            recs = [EpochRecord(**json.loads(line)) for line in fh if line.strip()]
        best = max(range(len(recs)), key=lambda i: (recs[i].val_acc, -i), default=-1) + 1
        return cls(recs, best_epoch=best)


def _score(model: Model, x: np.ndarray, y: np.ndarray, layers=None) -> tuple[float, float]:
    """Mean loss and accuracy; ``layers`` evaluates only a graph tail on cached inputs."""
    losses, correct = 0.0, 0
    for start in range(0, len(y), EVAL_BATCH):
        xb, yb = x[start:start + EVAL_BATCH], y[start:start + EVAL_BATCH]
        if layers is None:
            logits = model.forward(xb)
        else:
            logits, _ = model._run(xb, layers, keep=False)
        _, loss, _ = nk.softmax_cross_entropy(logits, yb)
        losses += float(loss.astype(np.float64).sum())
        correct += int((logits.argmax(axis=1) == yb).sum())
    return losses / len(y), correct / len(y)


def train(model: Model, train_set: Dataset, val_set: Dataset, config: TrainConfig | None = None,
          trainable: list[str] | None = None, history_path=None) -> tuple[Model, TrainHistory]:
    """Fit ``model`` in place and return it with the best-validation weights restored.

    ``trainable`` limits optimizer updates to the named tensors; all others
    stay bit-identical. When exactly the classifier tensors are trainable,
    the frozen feature extractor runs once per dataset instead of once per
    batch.
    """
    config = config or TrainConfig()
    for ds, what in ((train_set, "train"), (val_set, "validation")):
        if len(ds) == 0:
            raise DataError(f"{what} set is empty")
        if ds.y.max() >= model.n_classes:
            raise DataError(f"{what} labels exceed the model's {model.n_classes} classes")
    names = list(model.params) if trainable is None else list(trainable)
    unknown = set(names) - set(model.params)
    if unknown:
        raise ValueError(f"unknown trainable tensors: {sorted(unknown)}")

    head_only = set(names) == set(model.classifier_param_names)
    if head_only:
        layers = model.classifier_layers
        train_x = np.concatenate([model.features(train_set.x[i:i + EVAL_BATCH])
                                  for i in range(0, len(train_set), EVAL_BATCH)])
        val_x = np.concatenate([model.features(val_set.x[i:i + EVAL_BATCH])
                                for i in range(0, len(val_set), EVAL_BATCH)])
    else:
        layers = None
        train_x, val_x = train_set.x, val_set.x
    cached = Dataset(train_x, train_set.y, train_set.label_names)

    opt = config.optimizer
    plateau = PlateauState(config.plateau, config.learning_rate)
    stopper = EarlyStopState(config.early_stop)
    history = TrainHistory()
    snapshot = lambda: {k: model.params[k].values.copy() for k in names}

    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        lr = plateau.current_lr
        loss_sum, correct = 0.0, 0
        for b, (xb, yb) in enumerate(batches(cached, config.batch_size, [config.seed, epoch]), 1):
            model.zero_grad()
            loss, logits = model.loss_and_grad(xb, yb, layers=layers, return_logits=True)
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
            for k in names:
                nk.adam_step(model.params[k], opt, lr=lr)
            loss_sum += loss * len(yb)
            correct += int((logits.argmax(axis=1) == yb).sum())
        val_loss, val_acc = _score(model, val_x, val_set.y, layers)
        metrics = {"val_acc": val_acc, "val_loss": val_loss}
        rec = EpochRecord(epoch, loss_sum / len(cached), correct / len(cached), val_loss, val_acc,
                          lr, time.perf_counter() - t0)
        history.epochs.append(rec)
        plateau.update(metrics[config.plateau.metric])
        stop = stopper.update(metrics[config.early_stop.metric], snapshot)
        log.info("epoch %d: loss %.4f acc %.4f val_loss %.4f val_acc %.4f lr %.2e",
                 epoch, rec.train_loss, rec.train_acc, val_loss, val_acc, lr)
        if stop:
            history.stopped_early = True
            break

    if stopper.best_state is not None:
        model.load_state(stopper.best_state)
    history.best_epoch = stopper.best_epoch
    model.zero_grad()
    if history_path is not None:
        history.to_jsonl(history_path)
    return model, history
