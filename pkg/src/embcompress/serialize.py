"""Binary on-disk formats.

Model files carry a versioned header (magic, version, model kind, field
count) followed by one section per field: id, feature count, vector length
and a compressed/passthrough flag. Compressed sections store the codebook as
row-major little-endian 32-bit reals plus the mask array at its declared
width (1 byte up to 256 clusters, 2 bytes beyond); passthrough sections store
the full matrix and 64-bit frequency counts. Files round-trip bit-exactly.

Checkpoints wrap a model file and append the trainer's optimizer state
(dense weights, bias, Adagrad accumulators) as 64-bit reals.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .model import Codebook, CompressedModel, Field, FieldedEmbeddingModel, MaskTable, mask_width

MODEL_MAGIC = b"EMBC"
CHECKPOINT_MAGIC = b"EMBT"
FORMAT_VERSION = 1

_KIND_FIELDED = 0
_KIND_COMPRESSED = 1

_HEADER = struct.Struct("<4sIBI")  # magic, version, kind, field count
_FIELD_HEAD = struct.Struct("<IQIB")  # field id, n, l, compressed flag
_COMPRESSED_HEAD = struct.Struct("<IB")  # k, mask width


def _write_f32(fh, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_f32(fh, count: int) -> np.ndarray:
    buf = fh.read(count * 4)
    if len(buf) != count * 4:
        raise ValueError("truncated float payload")
    return np.frombuffer(buf, dtype="<f4").astype(np.float64)


def _write_i64(fh, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<i8").tobytes())


def _read_i64(fh, count: int) -> np.ndarray:
    buf = fh.read(count * 8)
    if len(buf) != count * 8:
        raise ValueError("truncated count payload")
    return np.frombuffer(buf, dtype="<i8").astype(np.int64)


def _write_f64(fh, arr: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_f64(fh, count: int) -> np.ndarray:
    buf = fh.read(count * 8)
    if len(buf) != count * 8:
        raise ValueError("truncated float64 payload")
    return np.frombuffer(buf, dtype="<f8").astype(np.float64)


def write_model(model: FieldedEmbeddingModel | CompressedModel, fh) -> None:
    if isinstance(model, FieldedEmbeddingModel):
        kind = _KIND_FIELDED
        field_ids = model.field_ids()
    else:
        kind = _KIND_COMPRESSED
        field_ids = model.field_ids()
    fh.write(_HEADER.pack(MODEL_MAGIC, FORMAT_VERSION, kind, len(field_ids)))

    for fid in field_ids:
        if isinstance(model, FieldedEmbeddingModel) or fid in model.passthrough_fields:
            f = model.fields[fid] if isinstance(model, FieldedEmbeddingModel) else model.passthrough_fields[fid]
            fh.write(_FIELD_HEAD.pack(fid, f.num_features, f.vector_len, 0))
            _write_f32(fh, f.vectors)
            _write_i64(fh, f.frequencies)
        else:
            codebook, table = model.compressed_fields[fid]
            width = mask_width(codebook.k)
            fh.write(_FIELD_HEAD.pack(fid, table.num_features, codebook.vector_len, 1))
            fh.write(_COMPRESSED_HEAD.pack(codebook.k, width))
            _write_f32(fh, codebook.centroids)
            dtype = "<u1" if width == 1 else "<u2"
            fh.write(np.ascontiguousarray(table.masks, dtype=dtype).tobytes())


def read_model(fh) -> FieldedEmbeddingModel | CompressedModel:
    head = fh.read(_HEADER.size)
    if len(head) != _HEADER.size:
        raise ValueError("truncated model header")
    magic, version, kind, field_count = _HEADER.unpack(head)
    if magic != MODEL_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {version}")
    if kind not in (_KIND_FIELDED, _KIND_COMPRESSED):
        raise ValueError(f"unknown model kind {kind}")

    fields: dict[int, Field] = {}
    compressed: dict[int, tuple[Codebook, MaskTable]] = {}
    for _ in range(field_count):
        fid, n, l, flag = _FIELD_HEAD.unpack(fh.read(_FIELD_HEAD.size))
        if flag == 0:
            vectors = _read_f32(fh, n * l).reshape(n, l)
            freqs = _read_i64(fh, n)
            fields[fid] = Field(fid, vectors, freqs)
        else:
            k, width = _COMPRESSED_HEAD.unpack(fh.read(_COMPRESSED_HEAD.size))
            centroids = _read_f32(fh, k * l).reshape(k, l)
            dtype = np.dtype("<u1") if width == 1 else np.dtype("<u2")
            buf = fh.read(n * width)
            if len(buf) != n * width:
                raise ValueError("truncated mask payload")
            masks = np.frombuffer(buf, dtype=dtype).copy()
            compressed[fid] = (Codebook(fid, centroids), MaskTable(fid, masks))

    if kind == _KIND_FIELDED:
        if compressed:
            raise ValueError("fielded model contains compressed sections")
        return FieldedEmbeddingModel(fields)
    return CompressedModel(compressed, fields)


def save_model(model: FieldedEmbeddingModel | CompressedModel, path: str | Path) -> None:
    with open(path, "wb") as fh:
        write_model(model, fh)


def load_model(path: str | Path) -> FieldedEmbeddingModel | CompressedModel:
    with open(path, "rb") as fh:
        return read_model(fh)


def model_bytes(model: FieldedEmbeddingModel | CompressedModel) -> bytes:
    buf = io.BytesIO()
    write_model(model, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# checkpoints: model section + optimizer state

_CKPT_HEADER = struct.Struct("<4sIQ")  # magic, version, model section length
_ACC_HEAD = struct.Struct("<IQI")  # field id, rows, l


def write_checkpoint(predictor, fh) -> None:
    blob = model_bytes(predictor.embeddings)
    fh.write(_CKPT_HEADER.pack(CHECKPOINT_MAGIC, FORMAT_VERSION, len(blob)))
    fh.write(blob)

    fh.write(struct.pack("<d", predictor.learning_rate))
    fh.write(struct.pack("<dd", predictor.bias, predictor.bias_acc))
    fh.write(struct.pack("<I", predictor.dense_weights.size))
    _write_f64(fh, predictor.dense_weights)
    _write_f64(fh, predictor.dense_acc)

    fh.write(struct.pack("<I", len(predictor.emb_acc)))
    for fid in sorted(predictor.emb_acc):
        acc = predictor.emb_acc[fid]
        fh.write(_ACC_HEAD.pack(fid, acc.shape[0], acc.shape[1]))
        _write_f64(fh, acc)


def read_checkpoint(fh):
    from .trainer import PredictorModel

    head = fh.read(_CKPT_HEADER.size)
    if len(head) != _CKPT_HEADER.size:
        raise ValueError("truncated checkpoint header")
    magic, version, blob_len = _CKPT_HEADER.unpack(head)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    embeddings = read_model(io.BytesIO(fh.read(blob_len)))

    (lr,) = struct.unpack("<d", fh.read(8))
    bias, bias_acc = struct.unpack("<dd", fh.read(16))
    (dense_size,) = struct.unpack("<I", fh.read(4))
    dense = _read_f64(fh, dense_size)
    dense_acc = _read_f64(fh, dense_size)

    (acc_count,) = struct.unpack("<I", fh.read(4))
    emb_acc: dict[int, np.ndarray] = {}
    for _ in range(acc_count):
        fid, rows, l = _ACC_HEAD.unpack(fh.read(_ACC_HEAD.size))
        emb_acc[fid] = _read_f64(fh, rows * l).reshape(rows, l)

    return PredictorModel(
        embeddings=embeddings,
        dense_weights=dense,
        bias=bias,
        dense_acc=dense_acc,
        bias_acc=bias_acc,
        emb_acc=emb_acc,
        learning_rate=lr,
    )


def save_checkpoint(predictor, path: str | Path) -> None:
    with open(path, "wb") as fh:
        write_checkpoint(predictor, fh)


def load_checkpoint(path: str | Path):
    with open(path, "rb") as fh:
        return read_checkpoint(fh)
