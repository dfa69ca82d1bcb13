"""Binary model checkpoints.

Layout::

    bytes 0-3    b"ECGM"
    uint32 LE    format version (1)
    uint64 LE    header length in bytes
    header       UTF-8 JSON: arch, input_length, n_classes, label_names, tensors
    payload      raw little-endian float32 tensors, in manifest order

Each manifest entry carries ``name``, ``shape``, ``byte_offset`` (relative to
the start of the payload) and ``byte_len``. Only parameter values are
stored; optimizer moments are not.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ShapeError
from .model import Model, _architecture
from .ndkernel import ParamTensor

MAGIC = b"ECGM"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")
_LE_F32 = np.dtype("<f4")


def to_bytes(model: Model) -> bytes:
    manifest = []
    chunks = []
    offset = 0
    for name, p in model.params.items():
        raw = np.ascontiguousarray(p.values, dtype=_LE_F32).tobytes()
        manifest.append({"name": name, "shape": list(p.shape), "byte_offset": offset,
                         "byte_len": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "arch": model.name,
        "input_length": model.input_length,
        "n_classes": model.n_classes,
        "label_names": list(model.label_names),
        "tensors": manifest,
    }
    header_bytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    return _PREFIX.pack(MAGIC, VERSION, len(header_bytes)) + header_bytes + b"".join(chunks)


def from_bytes(blob: bytes) -> Model:
    if len(blob) < _PREFIX.size:
        raise CheckpointError("checkpoint truncated before header")
    magic, version, header_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    start = _PREFIX.size
    if len(blob) < start + header_len:
        raise CheckpointError("checkpoint truncated inside header")
    try:
        header = json.loads(blob[start:start + header_len].decode("utf-8"))
        spec = _architecture(header["arch"], header["input_length"], header["n_classes"],
                             header["label_names"])
        manifest = header["tensors"]
    except (ValueError, KeyError, TypeError, ShapeError) as exc:
        raise CheckpointError(f"malformed checkpoint header: {exc}") from exc

    payload = memoryview(blob)[start + header_len:]
    expected = spec.param_shapes()
    if [t["name"] for t in manifest] != list(expected):
        raise CheckpointError("tensor manifest does not match the architecture")
    params = {}
    end_prev = 0
    for entry in manifest:
        name, shape = entry["name"], tuple(entry["shape"])
        off, n = entry["byte_offset"], entry["byte_len"]
        if shape != expected[name] or n != 4 * int(np.prod(shape)):
            raise CheckpointError(f"{name}: manifest shape/length inconsistent")
        if off < end_prev:
            raise CheckpointError(f"{name}: overlapping tensor offsets")
        if off + n > len(payload):
            raise CheckpointError(f"checkpoint truncated: {name} runs past end of payload")
        values = np.frombuffer(payload[off:off + n], dtype=_LE_F32).astype(np.float32)
        params[name] = ParamTensor(values.reshape(shape))
        end_prev = off + n
    return Model(spec, params)


def save_checkpoint(model: Model, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(to_bytes(model))
    os.replace(tmp, path)


def load_checkpoint(path) -> Model:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return from_bytes(blob)
