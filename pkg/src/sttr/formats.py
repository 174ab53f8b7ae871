"""Versioned binary/text containers: packed clips, checkpoints, score tables.

Packed clip file (magic ``STTR1``):
    bytes 0..4   magic "STTR1"
    byte  5      format version (1)
    5 x int32 LE N, C, T, V, M
    N x int32 LE labels
    N*C*T*V*M float32 LE clip data, C-order (N, C, T, V, M)

Checkpoint file (magic ``STTRC``):
    magic "STTRC", uint8 version (1),
    uint32 LE config JSON length + UTF-8 JSON,
    uint32 LE blob count, then per blob:
        uint16 LE name length + UTF-8 name,
        uint8 ndim + ndim x int32 LE extents,
        float32 LE data (C-order)

Score table: one line per sample,
    sample_id<TAB>label<TAB>p_0,p_1,...,p_{K-1}
with probabilities printed at 8 significant digits.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

CLIP_MAGIC = b"STTR1"
CLIP_VERSION = 1
CKPT_MAGIC = b"STTRC"
CKPT_VERSION = 1

class FormatError(ValueError):
    pass

# ---------------------------------------------------------------------------
# packed clips

def write_clips(path, data: np.ndarray, labels) -> None:
    data = np.asarray(data)
    labels = np.asarray(labels, dtype=np.int32)
    if data.ndim != 5:
        raise FormatError(f"clip data must be (N, C, T, V, M), got {data.shape}")
    if labels.shape != (data.shape[0],):
        raise FormatError(f"{data.shape[0]} clips but {labels.shape[0]} labels")
    with open(path, "wb") as fh:
        fh.write(CLIP_MAGIC)
        fh.write(struct.pack("<B", CLIP_VERSION))
        fh.write(struct.pack("<5i", *data.shape))
        fh.write(labels.astype("<i4").tobytes())
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())

def read_clips(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != CLIP_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {CLIP_MAGIC!r}")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != CLIP_VERSION:
            raise FormatError(f"{path}: unsupported clip format version {version}")
        dims = struct.unpack("<5i", fh.read(20))
        n = dims[0]
        labels = np.frombuffer(fh.read(4 * n), dtype="<i4").copy()
        count = int(np.prod(dims))
        raw = fh.read(4 * count)
        if len(raw) != 4 * count:
            raise FormatError(f"{path}: truncated clip data")
        data = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    return data, labels

# ---------------------------------------------------------------------------
# checkpoints

def write_checkpoint(path, config: dict, blobs: dict[str, np.ndarray]) -> None:
    cfg = json.dumps(config, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<B", CKPT_VERSION))
        fh.write(struct.pack("<I", len(cfg)))
        fh.write(cfg)
        fh.write(struct.pack("<I", len(blobs)))
        for name, arr in blobs.items():
            encoded = name.encode()
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}i", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())

def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != CKPT_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {CKPT_MAGIC!r}")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != CKPT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        (cfg_len,) = struct.unpack("<I", fh.read(4))
        config = json.loads(fh.read(cfg_len).decode())
        (count,) = struct.unpack("<I", fh.read(4))
        blobs: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode()
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}i", fh.read(4 * ndim)) if ndim else ()
            size = int(np.prod(shape)) if shape else 1
            blobs[name] = np.frombuffer(fh.read(4 * size), dtype="<f4").reshape(shape).copy()
    return config, blobs

# ---------------------------------------------------------------------------
# score tables

@dataclass
class ScoreTable:
    sample_ids: list[str]
    labels: np.ndarray
    probs: np.ndarray  # (N, K), rows sum to 1

    def accuracy(self) -> float:
        return float((self.probs.argmax(axis=1) == self.labels).mean())

    def predictions(self) -> np.ndarray:
        return self.probs.argmax(axis=1)

def write_scores(path, table: ScoreTable) -> None:
    with open(path, "w") as fh:
        for sid, label, row in zip(table.sample_ids, table.labels, table.probs):
            probs = ",".join(f"{p:.8g}" for p in row)
            fh.write(f"{sid}\t{int(label)}\t{probs}\n")

def read_scores(path) -> ScoreTable:
    ids, labels, probs = [], [], []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{line_no}: expected 3 tab-separated fields")
            ids.append(parts[0])
            labels.append(int(parts[1]))
            probs.append([float(p) for p in parts[2].split(",")])
    return ScoreTable(ids, np.array(labels), np.array(probs))

def fuse_scores(a: ScoreTable, b: ScoreTable) -> ScoreTable:
    """Element-wise sum of per-sample probability vectors, matched by id.

    argmax of the fused vector is the prediction; numpy argmax breaks ties
    toward the lowest class index.
    """
    index_b = {sid: i for i, sid in enumerate(b.sample_ids)}
    missing = [sid for sid in a.sample_ids if sid not in index_b]
    extra = [sid for sid in b.sample_ids if sid not in set(a.sample_ids)]
    if missing or extra:
        raise FormatError(
            f"sample id mismatch: missing from b: {missing}; extra in b: {extra}")
    order = [index_b[sid] for sid in a.sample_ids]
    if not np.array_equal(a.labels, b.labels[order]):
        raise FormatError("labels disagree between score tables")
    return ScoreTable(list(a.sample_ids), a.labels.copy(), a.probs + b.probs[order])
