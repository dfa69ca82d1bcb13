"""Arrhythmia-to-diagnostic model transfer: swap the 5-class head for a 2-class one and refit."""

from __future__ import annotations

from dataclasses import dataclass

from .checkpoint import load_checkpoint
from .data import Dataset
from .errors import CheckpointError, ShapeError
from .model import PTB_LABELS, Model, replace_head
from .train import TrainConfig, TrainHistory, train


@dataclass
class TransferConfig(TrainConfig):
    # False fine-tunes every tensor
    freeze_features: bool = True
    base_classes: int = 5
    target_classes: int = 2


def transfer_fit(base_checkpoint, train_set: Dataset, val_set: Dataset,
                 config: TransferConfig | None = None, history_path=None) -> tuple[Model, TrainHistory]:
    """Fit a diagnostic classifier on top of a trained arrhythmia model.

    ``base_checkpoint`` is a checkpoint path or a :class:`Model`. With
    ``freeze_features`` only the dense classifier tensors are updated and the
    convolutional feature extractor comes out bit-identical.
    """
    config = config or TransferConfig()
    base = base_checkpoint if isinstance(base_checkpoint, Model) else load_checkpoint(base_checkpoint)
    if base.n_classes != config.base_classes:
        raise CheckpointError(
            f"base model has {base.n_classes} classes, expected {config.base_classes}"
        )
    if train_set.input_length != base.input_length:
        raise ShapeError(
            f"beats have {train_set.input_length} samples, base model expects {base.input_length}"
        )
    labels = train_set.label_names if len(train_set.label_names) == config.target_classes else None
    model = replace_head(base, config.target_classes, seed=config.seed,
                         label_names=labels or (PTB_LABELS if config.target_classes == 2 else None))
    trainable = model.classifier_param_names if config.freeze_features else None
    return train(model, train_set, val_set, config, trainable=trainable, history_path=history_path)
