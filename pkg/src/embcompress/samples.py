"""Labeled training samples.

A sample carries at most one feature per field plus a binary click label.
Batches are stored columnar: one int32 feature-id column per field, with -1
marking an absent field, which keeps epoch loops and file IO cheap.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

ABSENT = -1

_RECORD_PREFIX = struct.Struct("<I")
_RECORD_HEAD = struct.Struct("<BH")
_PAIR = struct.Struct("<II")


@dataclass
class Sample:
    features: list[tuple[int, int]]  # (field_id, feature_id) pairs
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        fields = [fid for fid, _ in self.features]
        if len(fields) != len(set(fields)):
            raise ValueError("sample has more than one feature for the same field")


@dataclass
class SampleBatch:
    field_ids: list[int]
    features: np.ndarray  # (num_samples, num_fields) int32, ABSENT where missing
    labels: np.ndarray  # (num_samples,) uint8

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.int32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.features.ndim != 2 or self.features.shape[1] != len(self.field_ids):
            raise ValueError("features must be (num_samples, num_fields)")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels length must match sample count")
        if np.any(self.labels > 1):
            raise ValueError("labels must be binary 0/1")
        if np.any(self.features < ABSENT):
            raise ValueError("feature ids must be >= -1")

    def __len__(self) -> int:
        return self.features.shape[0]

    def slice(self, start: int, stop: int) -> "SampleBatch":
        return SampleBatch(self.field_ids, self.features[start:stop], self.labels[start:stop])

    @classmethod
    def from_samples(cls, samples: list[Sample], field_ids: list[int] | None = None) -> "SampleBatch":
        if field_ids is None:
            field_ids = sorted({fid for s in samples for fid, _ in s.features})
        col = {fid: j for j, fid in enumerate(field_ids)}
        features = np.full((len(samples), len(field_ids)), ABSENT, dtype=np.int32)
        labels = np.zeros(len(samples), dtype=np.uint8)
        for i, s in enumerate(samples):
            labels[i] = s.label
            for fid, feat in s.features:
                if fid not in col:
                    raise ValueError(f"sample references unknown field {fid}")
                features[i, col[fid]] = feat
        return cls(field_ids, features, labels)

    def to_samples(self) -> list[Sample]:
        out = []
        for i in range(len(self)):
            pairs = [
                (fid, int(f))
                for fid, f in zip(self.field_ids, self.features[i])
                if f != ABSENT
            ]
            out.append(Sample(pairs, int(self.labels[i])))
        return out


def write_records(batch: SampleBatch, fh) -> None:
    """Length-prefixed binary records, one per sample."""
    J = len(batch.field_ids)
    if J and not np.any(batch.features == ABSENT):
        # all fields present: emit the packed array in one shot
        dtype = np.dtype(
            [("len", "<u4"), ("label", "u1"), ("count", "<u2"), ("pairs", "<u4", (J, 2))]
        )
        arr = np.empty(len(batch), dtype=dtype)
        arr["len"] = _RECORD_HEAD.size + J * _PAIR.size
        arr["label"] = batch.labels
        arr["count"] = J
        arr["pairs"][:, :, 0] = batch.field_ids
        arr["pairs"][:, :, 1] = batch.features
        fh.write(arr.tobytes())
        return
    for i in range(len(batch)):
        pairs = [
            (fid, int(f)) for fid, f in zip(batch.field_ids, batch.features[i]) if f != ABSENT
        ]
        body = _RECORD_HEAD.pack(int(batch.labels[i]), len(pairs))
        body += b"".join(_PAIR.pack(fid, feat) for fid, feat in pairs)
        fh.write(_RECORD_PREFIX.pack(len(body)))
        fh.write(body)


def _read_records_uniform(data: bytes, field_ids: list[int]) -> SampleBatch | None:
    """Vectorized decode when every record carries all fields in order."""
    J = len(field_ids)
    body_len = _RECORD_HEAD.size + J * _PAIR.size
    itemsize = _RECORD_PREFIX.size + body_len
    if len(data) % itemsize != 0:
        return None
    dtype = np.dtype(
        [
            ("len", "<u4"),
            ("label", "u1"),
            ("count", "<u2"),
            ("pairs", "<u4", (J, 2)),
        ]
    )
    if dtype.itemsize != itemsize:
        return None
    arr = np.frombuffer(data, dtype=dtype)
    if not (np.all(arr["len"] == body_len) and np.all(arr["count"] == J)):
        return None
    if not np.array_equal(arr["pairs"][:, :, 0], np.tile(field_ids, (len(arr), 1))):
        return None
    features = arr["pairs"][:, :, 1].astype(np.int32)
    return SampleBatch(list(field_ids), features, arr["label"].astype(np.uint8))


def read_records(fh, field_ids: list[int]) -> SampleBatch:
    """Read records until EOF into a columnar batch over `field_ids`."""
    data = fh.read()
    if data:
        uniform = _read_records_uniform(data, field_ids)
        if uniform is not None:
            return uniform
    fh = io.BytesIO(data)
    col = {fid: j for j, fid in enumerate(field_ids)}
    rows: list[np.ndarray] = []
    labels: list[int] = []
    while True:
        prefix = fh.read(_RECORD_PREFIX.size)
        if not prefix:
            break
        if len(prefix) != _RECORD_PREFIX.size:
            raise ValueError("truncated record prefix")
        (body_len,) = _RECORD_PREFIX.unpack(prefix)
        body = fh.read(body_len)
        if len(body) != body_len:
            raise ValueError("truncated record body")
        label, count = _RECORD_HEAD.unpack_from(body, 0)
        row = np.full(len(field_ids), ABSENT, dtype=np.int32)
        offset = _RECORD_HEAD.size
        for _ in range(count):
            fid, feat = _PAIR.unpack_from(body, offset)
            offset += _PAIR.size
            if fid not in col:
                raise ValueError(f"record references unknown field {fid}")
            row[col[fid]] = feat
        rows.append(row)
        labels.append(label)
    features = (
        np.vstack(rows) if rows else np.empty((0, len(field_ids)), dtype=np.int32)
    )
    return SampleBatch(field_ids, features, np.asarray(labels, dtype=np.uint8))
