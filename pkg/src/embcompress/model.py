"""Embedding model representation: fields, codebooks, masks, memory accounting.

A model is a set of *fields*, each holding one dense embedding matrix with a
uniform vector length plus per-feature occurrence counts. Compression replaces
a field's matrix with a small codebook of representative vectors and a
per-feature mask indexing into it.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

FieldId = int
FeatureId = int

#: byte width of one stored vector component (4-byte reals)
COMPONENT_BYTES = 4

#: largest cluster count a mask can address (2-byte masks)
MAX_CODEBOOK_SIZE = 65536


def mask_width(k: int) -> int:
    """Bytes needed to store one mask value for a codebook of size k."""
    if not 1 <= k <= MAX_CODEBOOK_SIZE:
        raise ValueError(f"codebook size {k} outside supported range [1, {MAX_CODEBOOK_SIZE}]")
    return 1 if k <= 256 else 2


def mask_dtype(k: int):
    return np.uint8 if mask_width(k) == 1 else np.uint16


@dataclass
class Field:
    """One field's embedding matrix (n rows x l components) and feature counts."""

    field_id: FieldId
    vectors: np.ndarray
    frequencies: np.ndarray

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        self.frequencies = np.ascontiguousarray(self.frequencies, dtype=np.int64)
        if self.field_id < 0:
            raise ValueError("field_id must be non-negative")
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise ValueError("vectors must be a 2-D matrix with at least one column")
        if self.frequencies.shape != (self.vectors.shape[0],):
            raise ValueError(
                f"frequencies length {self.frequencies.shape} does not match "
                f"row count {self.vectors.shape[0]}"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError(f"field {self.field_id}: vectors contain NaN/Inf")
        if np.any(self.frequencies < 0):
            raise ValueError(f"field {self.field_id}: negative frequency count")

    @property
    def num_features(self) -> int:
        return self.vectors.shape[0]

    @property
    def vector_len(self) -> int:
        return self.vectors.shape[1]

    def copy(self) -> "Field":
        return Field(self.field_id, self.vectors.copy(), self.frequencies.copy())


@dataclass
class FieldedEmbeddingModel:
    """Collection of fields keyed by field id."""

    fields: dict[FieldId, Field] = dc_field(default_factory=dict)

    def __post_init__(self):
        for fid, f in self.fields.items():
            if fid != f.field_id:
                raise ValueError(f"key {fid} does not match field_id {f.field_id}")

    def field_ids(self) -> list[FieldId]:
        return sorted(self.fields)

    def add_field(self, f: Field) -> None:
        if f.field_id in self.fields:
            raise ValueError(f"duplicate field id {f.field_id}")
        self.fields[f.field_id] = f

    def copy(self) -> "FieldedEmbeddingModel":
        return FieldedEmbeddingModel({fid: f.copy() for fid, f in self.fields.items()})


@dataclass
class Codebook:
    """The k representative vectors kept for one compressed field."""

    field_id: FieldId
    centroids: np.ndarray

    def __post_init__(self):
        self.centroids = np.ascontiguousarray(self.centroids, dtype=np.float64)
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise ValueError("centroids must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError(f"codebook for field {self.field_id} contains NaN/Inf")
        mask_width(self.k)  # range check

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def vector_len(self) -> int:
        return self.centroids.shape[1]


@dataclass
class MaskTable:
    """Per-feature cluster index into a codebook, one entry per feature."""

    field_id: FieldId
    masks: np.ndarray

    def __post_init__(self):
        self.masks = np.ascontiguousarray(self.masks)
        if self.masks.dtype not in (np.uint8, np.uint16):
            if np.any(self.masks < 0):
                raise ValueError("mask values must be non-negative")
            width = mask_width(int(self.masks.max(initial=0)) + 1)
            self.masks = self.masks.astype(np.uint8 if width == 1 else np.uint16)
        if self.masks.ndim != 1:
            raise ValueError("masks must be 1-D")

    @property
    def num_features(self) -> int:
        return self.masks.shape[0]


@dataclass
class CompressedModel:
    """Mix of compressed fields (codebook + mask) and untouched fields."""

    compressed_fields: dict[FieldId, tuple[Codebook, MaskTable]] = dc_field(default_factory=dict)
    passthrough_fields: dict[FieldId, Field] = dc_field(default_factory=dict)

    def __post_init__(self):
        overlap = set(self.compressed_fields) & set(self.passthrough_fields)
        if overlap:
            raise ValueError(f"fields {sorted(overlap)} are both compressed and passthrough")
        for fid, (cb, mt) in self.compressed_fields.items():
            if cb.field_id != fid or mt.field_id != fid:
                raise ValueError(f"codebook/mask field id mismatch under key {fid}")
            if np.any(mt.masks >= cb.k):
                raise ValueError(f"field {fid}: mask value out of codebook range")

    def field_ids(self) -> list[FieldId]:
        return sorted(set(self.compressed_fields) | set(self.passthrough_fields))

    def is_compressed(self, field_id: FieldId) -> bool:
        return field_id in self.compressed_fields

    def vector_len(self, field_id: FieldId) -> int:
        if field_id in self.compressed_fields:
            return self.compressed_fields[field_id][0].vector_len
        return self.passthrough_fields[field_id].vector_len

    def num_features(self, field_id: FieldId) -> int:
        if field_id in self.compressed_fields:
            return self.compressed_fields[field_id][1].num_features
        return self.passthrough_fields[field_id].num_features

    def copy(self) -> "CompressedModel":
        return CompressedModel(
            {
                fid: (Codebook(fid, cb.centroids.copy()), MaskTable(fid, mt.masks.copy()))
                for fid, (cb, mt) in self.compressed_fields.items()
            },
            {fid: f.copy() for fid, f in self.passthrough_fields.items()},
        )


def lookup_uncompressed(field: Field, feature: FeatureId) -> np.ndarray:
    """Return a copy of the embedding vector stored for `feature`."""
    if not 0 <= feature < field.num_features:
        raise IndexError(
            f"feature {feature} out of range for field {field.field_id} "
            f"with {field.num_features} features"
        )
    return field.vectors[feature].copy()


def lookup_compressed(codebook: Codebook, masks: MaskTable, feature: FeatureId) -> np.ndarray:
    """Resolve `feature` through its mask and return the representative vector."""
    if codebook.field_id != masks.field_id:
        raise ValueError(
            f"codebook field {codebook.field_id} does not match mask field {masks.field_id}"
        )
    if not 0 <= feature < masks.num_features:
        raise IndexError(
            f"feature {feature} out of range for field {masks.field_id} "
            f"with {masks.num_features} features"
        )
    cluster = int(masks.masks[feature])
    if cluster >= codebook.k:
        raise ValueError(f"mask value {cluster} exceeds codebook size {codebook.k}")
    return codebook.centroids[cluster].copy()


def memory_footprint(
    model: FieldedEmbeddingModel | CompressedModel,
    bytes_per_component: int = COMPONENT_BYTES,
    bytes_per_mask: int | None = None,
) -> int:
    """Serving-format byte count of a model.

    An uncompressed field costs n*l*bytes_per_component; a compressed field
    costs n*mask_bytes + k*l*bytes_per_component. When `bytes_per_mask` is
    None the mask width is derived from k (1 byte up to 256 clusters,
    2 bytes beyond).
    """
    if bytes_per_component < 1:
        raise ValueError("bytes_per_component must be >= 1")
    if bytes_per_mask is not None and bytes_per_mask < 1:
        raise ValueError("bytes_per_mask must be >= 1")

    total = 0
    if isinstance(model, FieldedEmbeddingModel):
        for f in model.fields.values():
            total += f.num_features * f.vector_len * bytes_per_component
        return total

    for f in model.passthrough_fields.values():
        total += f.num_features * f.vector_len * bytes_per_component
    for cb, mt in model.compressed_fields.values():
        per_mask = bytes_per_mask if bytes_per_mask is not None else mask_width(cb.k)
        total += mt.num_features * per_mask
        total += cb.k * cb.vector_len * bytes_per_component
    return total
