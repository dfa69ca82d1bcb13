"""Heartbeat arrhythmia classification with compact residual 1-D CNNs."""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset, load_beats_csv, stratified_split
from .errors import CheckpointError, DataError, EcgError, NumericError, ShapeError
from .evaluation import bench_throughput, evaluate, replay_stream
from .model import Model, build_modified, build_original, replace_head
from .train import TrainConfig, train
from .transfer import TransferConfig, transfer_fit

__version__ = "0.1.0"

__all__ = [
    "CheckpointError", "DataError", "Dataset", "EcgError", "Model", "NumericError", "ShapeError",
    "TrainConfig", "TransferConfig", "bench_throughput", "build_modified", "build_original", "evaluate",
    "load_beats_csv", "load_checkpoint", "replace_head", "replay_stream", "save_checkpoint",
    "stratified_split", "train", "transfer_fit",
]
