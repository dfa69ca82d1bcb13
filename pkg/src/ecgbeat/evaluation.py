"""Classification metrics, throughput benchmarking and fixed-rate stream replay."""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import ndkernel as nk
from .data import Dataset
from .errors import DataError
from .model import Model


def worker_count(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("ECG_THREADS", "1"))
    return max(1, threads)


def predict_logits(model: Model, x: np.ndarray, batch_size: int = 128,
                   threads: int | None = None) -> np.ndarray:
    """Logits for every beat. Batch boundaries are fixed, so results do not
    depend on the worker count."""
    starts = range(0, len(x), batch_size)
    run = lambda s: model.forward(x[s:s + batch_size])
    workers = worker_count(threads)
    if workers == 1 or len(starts) == 1:
        parts = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, starts))
    return np.concatenate(parts)


def predict(model: Model, x: np.ndarray, batch_size: int = 128, threads: int | None = None) -> np.ndarray:
    # argmax resolves exact ties to the lowest class index
    return predict_logits(model, x, batch_size, threads).argmax(axis=1)


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    label_names: tuple[str, ...] = ()

    @classmethod
    def from_pairs(cls, labels, preds, n_classes: int, label_names=()) -> "ConfusionMatrix":
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (np.asarray(labels), np.asarray(preds)), 1)
        return cls(counts, tuple(label_names))

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return int(np.trace(self.counts)) / self.total


@dataclass
class ClassMetrics:
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    accuracy: float

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix) -> "ClassMetrics":
        c = cm.counts
        tp = np.diag(c)
        predicted = c.sum(axis=0)
        actual = c.sum(axis=1)
        precision, recall, f1 = [], [], []
        for i in range(len(c)):
            p = tp[i] / predicted[i] if predicted[i] else 0.0
            r = tp[i] / actual[i] if actual[i] else 0.0
            precision.append(float(p))
            recall.append(float(r))
            f1.append(float(2 * p * r / (p + r)) if p + r > 0 else 0.0)
        return cls(precision, recall, f1, [int(s) for s in actual], cm.accuracy)

    def table(self, label_names=()) -> str:
        names = list(label_names) or [str(i) for i in range(len(self.support))]
        width = max(len("class"), *(len(n) for n in names))
        lines = [f"{'class':<{width}}  precision  recall  f1-score  support"]
        for n, p, r, f, s in zip(names, self.precision, self.recall, self.f1, self.support):
            lines.append(f"{n:<{width}}  {p:9.2f}  {r:6.2f}  {f:8.2f}  {s:7d}")
        lines.append(f"accuracy {self.accuracy:.4f}")
        return "\n".join(lines)


def evaluate(model: Model, test_set: Dataset, batch_size: int = 128,
             threads: int | None = None) -> tuple[ConfusionMatrix, ClassMetrics]:
    if len(test_set) == 0:
        raise DataError("test set is empty")
    if test_set.y.max() >= model.n_classes:
        raise DataError(f"test labels exceed the model's {model.n_classes} classes")
    preds = predict(model, test_set.x, batch_size, threads)
    cm = ConfusionMatrix.from_pairs(test_set.y, preds, model.n_classes, model.label_names)
    return cm, ClassMetrics.from_confusion(cm)


@dataclass
class ThroughputReport:
    samples_per_second: float
    batch_size: int
    repeats: int
    wall_seconds: float
    samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def bench_throughput(model: Model, test_set: Dataset, batch_size: int = 128, repeats: int = 5,
                     return_predictions: bool = False):
    """Time end-to-end batched inference (forward + softmax + argmax).

    One untimed warm-up pass precedes ``repeats`` timed passes over the
    whole set. Single-threaded so the figure compares architectures, not
    machines.
    """
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    x = test_set.x

    def one_pass():
        preds = []
        for s in range(0, len(x), batch_size):
            logits = model.forward(x[s:s + batch_size])
            nk.softmax(logits)
            # argmax on logits, as evaluate() does, so predictions agree exactly
            preds.append(logits.argmax(axis=1))
        return np.concatenate(preds)

    preds = one_pass()
    wall = 0.0
    for _ in range(repeats):
        t0 = time.perf_counter()
        one_pass()
        wall += time.perf_counter() - t0
    report = ThroughputReport(repeats * len(x) / wall, batch_size, repeats, wall, len(x))
    return (report, preds) if return_predictions else report


@dataclass
class LatencyReport:
    p50_ms: float
    p95_ms: float
    p99_ms: float
    max_ms: float
    achieved_rate: float
    beats: int
    duration_s: float

    def to_dict(self) -> dict:
        return asdict(self)


def replay_stream(model: Model, beats: np.ndarray, rate_per_second: float,
                  clock=time.perf_counter, sleep=time.sleep) -> LatencyReport:
    """Classify beats one at a time as they are released on a fixed schedule.

    Beat ``i`` is released at ``start + i / rate``. Latency is completion
    time minus scheduled release, so when classification falls behind the
    queueing delay shows up in the percentiles. Nothing is dropped.
    """
    if not rate_per_second > 0:
        raise ValueError("rate must be positive")
    beats = np.asarray(beats, dtype=np.float32)
    if len(beats) == 0:
        raise DataError("no beats to replay")
    period = 1.0 / rate_per_second
    latencies = np.empty(len(beats))
    start = clock()
    for i, beat in enumerate(beats):
        release = start + i * period
        wait = release - clock()
        if wait > 0:
            sleep(wait)
        nk.softmax(model.forward(beat[None])).argmax(axis=1)
        latencies[i] = clock() - release
    # the stream spans N whole periods even if the last beat finishes early
    tail = start + len(beats) * period - clock()
    if tail > 0:
        sleep(tail)
    duration = clock() - start
    p50, p95, p99 = np.percentile(latencies, [50, 95, 99])
    ms = 1000.0
    return LatencyReport(p50 * ms, p95 * ms, p99 * ms, latencies.max() * ms,
                         len(beats) / duration, len(beats), duration)


def report_dict(cm: ConfusionMatrix, metrics: ClassMetrics, throughput: ThroughputReport | None = None,
                latency: LatencyReport | None = None) -> dict:
    names = list(cm.label_names) or [str(i) for i in range(len(cm.counts))]
    out = {
        "confusion_matrix": cm.counts.tolist(),
        "label_names": names,
        "per_class": [
            {"class": i, "name": n, "precision": round(p, 4), "recall": round(r, 4),
             "f1": round(f, 4), "support": s}
            for i, (n, p, r, f, s) in enumerate(zip(names, metrics.precision, metrics.recall,
                                                    metrics.f1, metrics.support))
        ],
        "accuracy": round(metrics.accuracy, 4),
        "throughput": throughput.to_dict() if throughput else None,
        "latency": latency.to_dict() if latency else None,
    }
    return out


def write_report(path, *args, **kwargs) -> dict:
    out = report_dict(*args, **kwargs)
    Path(path).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    return out
