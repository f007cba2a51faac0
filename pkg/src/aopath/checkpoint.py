"""Checkpoint files: an ordered list of named float64 tensors.

Layout::

    b"AOPCKPT1"
    uint32 LE  header length
    header     UTF-8 JSON {"config": ..., "config_hash": sha256, "tensors": [{"name", "shape"}, ...]}
    payload    every tensor's values, little-endian float64, in header order

LSTM weights keep the gate block order [input, forget, cell, output].
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionError
from .numerics import Tensor
from .pathway_network import ModelParams, PathwayConfig

MAGIC = b"AOPCKPT1"


def save_checkpoint(params: ModelParams, path) -> None:
    header = {
        "config": params.cfg.to_dict(),
        "config_hash": params.cfg.digest(),
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in params.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for t in params.values():
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise DataError(f"{path}: not a checkpoint")
        (n,) = struct.unpack("<I", fh.read(4))
        return json.loads(fh.read(n).decode("utf-8"))


def load_checkpoint(path) -> ModelParams:
    blob = Path(path).read_bytes()
    if not blob.startswith(MAGIC):
        raise DataError(f"{path}: not a checkpoint")
    pos = len(MAGIC)
    try:
        (n,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        header = json.loads(blob[pos : pos + n].decode("utf-8"))
        cfg = PathwayConfig.from_dict(header["config"])
        entries = [(e["name"], tuple(e["shape"])) for e in header["tensors"]]
    except (struct.error, UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: unreadable checkpoint header: {exc}") from exc
    pos += n
    if cfg.digest() != header["config_hash"]:
        raise DataError(f"{path}: config hash mismatch")
    tensors = {}
    for name, shape in entries:
        count = int(np.prod(shape))
        if pos + 8 * count > len(blob):
            raise DataError(f"{path}: truncated at tensor {name}")
        data = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * count
        tensors[name] = Tensor(data, requires_grad=True, name=name)
    if pos != len(blob):
        raise DataError(f"{path}: {len(blob) - pos} trailing bytes")
    try:
        return ModelParams(cfg, tensors)
    except DimensionError as exc:
        raise DataError(f"{path}: {exc}") from exc
