"""Beat datasets: CSV ingestion, stratified splitting and batch iteration.

On disk a dataset is a headerless CSV, one beat per row: ``input_length``
sample values in [0, 1] followed by an integer class label.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError
from .model import DEFAULT_INPUT_LENGTH, MITBIH_LABELS, PTB_LABELS

LABEL_MAPS = {"MIT-BIH": MITBIH_LABELS, "PTB": PTB_LABELS}


@dataclass(frozen=True)
class BeatRecord:
    samples: np.ndarray
    label: int


@dataclass
class Dataset:
    """Beats stored column-wise: ``x`` is ``(N, L)`` float32, ``y`` is ``(N,)`` int64."""

    x: np.ndarray
    y: np.ndarray
    label_names: tuple[str, ...] = ()
    source: str = "other"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float32)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.ndim != 2 or self.y.shape != (len(self.x),):
            raise DataError(f"inconsistent dataset arrays: x {self.x.shape}, y {self.y.shape}")
        if not self.label_names and len(self.y):
            self.label_names = tuple(f"class_{i}" for i in range(int(self.y.max()) + 1))
        self.label_names = tuple(self.label_names)

    def __len__(self) -> int:
        return len(self.y)

    def __getitem__(self, i: int) -> BeatRecord:
        return BeatRecord(self.x[i], int(self.y[i]))

    @property
    def input_length(self) -> int:
        return self.x.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.x[index], self.y[index], self.label_names, self.source)


def _parse_row(fields: Sequence[str], lineno: int, expected_length: int):
    if len(fields) != expected_length + 1:
        raise DataError(
            f"row {lineno}: expected {expected_length + 1} fields "
            f"({expected_length} samples + label), got {len(fields)}"
        )
    try:
        samples = [float(v) for v in fields[:-1]]
    except ValueError as exc:
        raise DataError(f"row {lineno}: non-numeric sample ({exc})") from None
    label = _parse_label(fields[-1], lineno)
    return samples, label


def _parse_label(text: str, lineno: int) -> int:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {lineno}: non-numeric label {text!r}") from None
    # public releases store labels as "1.000000000000000000e+00"
    if not math.isfinite(value) or value != int(value) or value < 0:
        raise DataError(f"row {lineno}: label {text!r} is not a non-negative integer")
    return int(value)


def _check_values(x: np.ndarray, y: np.ndarray, strict: bool, n_classes: int | None,
                  row_offset: int = 1) -> np.ndarray:
    bad = ~np.isfinite(x).all(axis=1)
    if bad.any():
        raise DataError(f"row {int(np.argmax(bad)) + row_offset}: non-finite sample")
    outside = ((x < 0) | (x > 1)).any(axis=1)
    if outside.any():
        if strict:
            row = int(np.argmax(outside))
            raise DataError(
                f"row {row + row_offset}: sample outside [0, 1] "
                f"(min {x[row].min():g}, max {x[row].max():g})"
            )
        x = np.clip(x, 0.0, 1.0)
    if n_classes is not None and len(y) and y.max() >= n_classes:
        row = int(np.argmax(y >= n_classes))
        raise DataError(f"row {row + row_offset}: label {y[row]} out of range for {n_classes} classes")
    return x


def load_beats_csv(path, expected_length: int = DEFAULT_INPUT_LENGTH, strict: bool = True,
                   label_names: Sequence[str] | None = None, source: str = "other") -> Dataset:
    """Read a beat CSV, one :class:`BeatRecord` per row in file order.

    With ``strict`` samples outside [0, 1] are an error; otherwise they are
    clamped. Errors name the 1-based row number.
    """
    path = Path(path)
    if label_names is None and source in LABEL_MAPS:
        label_names = LABEL_MAPS[source]
    try:
        raw = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2, encoding="utf-8")
        fast = raw.shape[1] == expected_length + 1
    except ValueError:
        fast = False
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    if fast:
        x, labels = raw[:, :-1], raw[:, -1]
        ok = np.isfinite(labels) & (labels >= 0) & (labels == np.floor(labels))
        if not ok.all():
            row = int(np.argmax(~ok))
            raise DataError(f"row {row + 1}: label {labels[row]!r} is not a non-negative integer")
        y = labels.astype(np.int64)
    else:
        # slow path: pinpoint the offending row
        rows, ys = [], []
        with path.open(newline="", encoding="utf-8") as fh:
            for lineno, fields in enumerate(csv.reader(fh), start=1):
                samples, label = _parse_row(fields, lineno, expected_length)
                rows.append(samples)
                ys.append(label)
        x = np.asarray(rows, dtype=np.float64).reshape(-1, expected_length)
        y = np.asarray(ys, dtype=np.int64)

    if len(y) == 0:
        raise DataError(f"{path}: no beats")
    n_classes = len(label_names) if label_names is not None else None
    x = _check_values(x, y, strict, n_classes)
    return Dataset(x.astype(np.float32), y, tuple(label_names or ()), source)


def save_beats_csv(dataset: Dataset, path) -> None:
    # %.9g round-trips float32 exactly
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        for row, label in zip(dataset.x, dataset.y):
            fh.write(",".join(f"{v:.9g}" for v in row.tolist()))
            fh.write(f",{int(label)}\n")


def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    exact = [n * r for r in ratios]
    counts = [math.floor(e) for e in exact]
    # equal remainders go to the later share, so held-out partitions round up first;
    # rounding keeps nominally equal ratios tied despite float noise
    order = sorted(range(len(ratios)), key=lambda i: (-round(exact[i] - counts[i], 9), -i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def stratified_split(dataset: Dataset, ratios: Sequence[float] = (0.6, 0.2, 0.2),
                     seed: int = 0) -> tuple[Dataset, ...]:
    """Per-class seeded shuffle, then partition by ``ratios`` with largest-remainder rounding.

    Partitions keep the file order of their members.
    """
    ratios = tuple(float(r) for r in ratios)
    if abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise DataError(f"split ratios must be non-negative and sum to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[] for _ in ratios]
    for label in np.unique(dataset.y):
        members = np.flatnonzero(dataset.y == label)
        if len(members) < 3:
            raise DataError(f"class {label} has {len(members)} members; at least 3 are needed")
        members = rng.permutation(members)
        start = 0
        for part, count in zip(parts, _largest_remainder(len(members), ratios)):
            part.append(members[start:start + count])
            start += count
    return tuple(dataset.subset(np.sort(np.concatenate(p))) for p in parts)


def batches(dataset: Dataset, batch_size: int,
            shuffle_seed=None) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(x, y)`` batches covering every record once; the last batch may be short.

    ``shuffle_seed`` is anything ``numpy.random.default_rng`` accepts; None
    keeps file order.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = len(dataset)
    order = np.arange(n) if shuffle_seed is None else np.random.default_rng(shuffle_seed).permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield dataset.x[idx], dataset.y[idx]


def class_distribution(dataset: Dataset) -> dict[int, int]:
    """Counts per label present in the dataset, keyed by class index."""
    return dict(sorted(Counter(dataset.y.tolist()).items()))


def stratified_subset(dataset: Dataset, n: int, seed: int = 0) -> Dataset:
    """Exactly ``n`` records drawn per class in proportion to class sizes."""
    if not 0 < n <= len(dataset):
        raise DataError(f"cannot draw {n} records from {len(dataset)}")
    labels, sizes = np.unique(dataset.y, return_counts=True)
    quotas = _largest_remainder(n, (sizes / sizes.sum()).tolist())
    rng = np.random.default_rng(seed)
    picked = [rng.choice(np.flatnonzero(dataset.y == lab), q, replace=False)
              for lab, q in zip(labels, quotas)]
    return dataset.subset(np.sort(np.concatenate(picked)))


# file names of the public preprocessed single-beat release
RELEASE_FILES = {
    "MIT-BIH": ("mitbih_train.csv", "mitbih_test.csv"),
    "PTB": ("ptbdb_normal.csv", "ptbdb_abnormal.csv"),
}


def load_release(data_dir, source: str, strict: bool = True) -> Dataset:
    """Concatenate both files of one database from the public release into one dataset."""
    parts = [load_beats_csv(Path(data_dir) / name, DEFAULT_INPUT_LENGTH, strict, source=source)
             for name in RELEASE_FILES[source]]
    return Dataset(np.concatenate([p.x for p in parts]), np.concatenate([p.y for p in parts]),
                   parts[0].label_names, source)
