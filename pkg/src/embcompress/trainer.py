"""Embedding-sum click predictor trained with Adagrad.

The predictor concatenates one looked-up embedding vector per field (in
field-id order, zero-filling absent fields), applies a dense weight vector
plus bias, and squashes through a logistic. Initial training updates every
touched embedding row per sample; retraining of a compressed model updates
each touched codebook vector with the *average* of its members' gradients
per optimization step while dense weights and passthrough fields train
normally. Masks never change during retraining.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import metrics
from ._kernels import retrain_epoch_kernel, train_epoch_kernel
from .model import (
    CompressedModel,
    FieldedEmbeddingModel,
    lookup_compressed,
    lookup_uncompressed,
)
from .samples import ABSENT, Sample, SampleBatch

ADAGRAD_EPS = 1e-8
DEFAULT_LEARNING_RATE = 0.001
DEFAULT_BATCH_SIZE = 256
DEFAULT_HOLDOUT_FRACTION = 0.1


@dataclass
class TrainStats:
    samples_seen: int
    log_loss: float
    auc: float | None  # None when the held-out slice is empty or single-class


def adagrad_update(param, grad, accumulator, lr):
    """One Adagrad step, in place: acc += g*g; param -= lr*g/(sqrt(acc)+eps)."""
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    accumulator = np.asarray(accumulator, dtype=np.float64)
    if param.shape != grad.shape or param.shape != accumulator.shape:
        raise ValueError("param, grad and accumulator shapes must match")
    accumulator += grad * grad
    param -= lr * grad / (np.sqrt(accumulator) + ADAGRAD_EPS)
    return param, accumulator


@dataclass
class PredictorModel:
    embeddings: FieldedEmbeddingModel | CompressedModel
    dense_weights: np.ndarray
    bias: float
    dense_acc: np.ndarray
    bias_acc: float
    emb_acc: dict[int, np.ndarray]
    learning_rate: float = DEFAULT_LEARNING_RATE

    def __post_init__(self):
        # zero is permitted so a no-op epoch still computes stats
        if self.learning_rate < 0:
            raise ValueError("learning_rate must not be negative")
        self.dense_weights = np.ascontiguousarray(self.dense_weights, dtype=np.float64)
        self.dense_acc = np.ascontiguousarray(self.dense_acc, dtype=np.float64)
        d = self.concat_dim()
        if self.dense_weights.shape != (d,) or self.dense_acc.shape != (d,):
            raise ValueError(f"dense weights/accumulator must have shape ({d},)")
        for fid in self.field_ids():
            shape = self._param_shape(fid)
            if fid not in self.emb_acc:
                self.emb_acc[fid] = np.zeros(shape)
            elif self.emb_acc[fid].shape != shape:
                raise ValueError(f"misshaped accumulator for field {fid}")

    # -- structure helpers ---------------------------------------------------

    def field_ids(self) -> list[int]:
        return self.embeddings.field_ids()

    def vector_len(self, fid: int) -> int:
        if isinstance(self.embeddings, FieldedEmbeddingModel):
            return self.embeddings.fields[fid].vector_len
        return self.embeddings.vector_len(fid)

    def concat_dim(self) -> int:
        return sum(self.vector_len(fid) for fid in self.field_ids())

    def _param_shape(self, fid: int) -> tuple[int, int]:
        emb = self.embeddings
        if isinstance(emb, CompressedModel) and emb.is_compressed(fid):
            cb = emb.compressed_fields[fid][0]
            return cb.centroids.shape
        f = emb.fields[fid] if isinstance(emb, FieldedEmbeddingModel) else emb.passthrough_fields[fid]
        return f.vectors.shape

    @classmethod
    def fresh(
        cls,
        embeddings: FieldedEmbeddingModel | CompressedModel,
        learning_rate: float = DEFAULT_LEARNING_RATE,
    ) -> "PredictorModel":
        """Zero dense weights and optimizer state for a new predictor."""
        dim = sum(
            embeddings.fields[fid].vector_len
            if isinstance(embeddings, FieldedEmbeddingModel)
            else embeddings.vector_len(fid)
            for fid in embeddings.field_ids()
        )
        return cls(
            embeddings=embeddings,
            dense_weights=np.zeros(dim),
            bias=0.0,
            dense_acc=np.zeros(dim),
            bias_acc=0.0,
            emb_acc={},
            learning_rate=learning_rate,
        )

    def with_compressed(self, compressed: CompressedModel) -> "PredictorModel":
        """Clone dense parameters onto a compressed embedding set.

        Passthrough fields keep a copy of their Adagrad state; codebook
        vectors are new parameters and start with zeroed accumulators.
        """
        if compressed.field_ids() != self.field_ids():
            raise ValueError("compressed model must cover the same field set")
        emb_acc: dict[int, np.ndarray] = {}
        for fid in compressed.field_ids():
            if compressed.is_compressed(fid):
                cb = compressed.compressed_fields[fid][0]
                emb_acc[fid] = np.zeros_like(cb.centroids)
            else:
                emb_acc[fid] = self.emb_acc[fid].copy()
        return PredictorModel(
            embeddings=compressed,
            dense_weights=self.dense_weights.copy(),
            bias=self.bias,
            dense_acc=self.dense_acc.copy(),
            bias_acc=self.bias_acc,
            emb_acc=emb_acc,
            learning_rate=self.learning_rate,
        )


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def forward(model: PredictorModel, sample: Sample) -> float:
    """Click probability for one sample; absent fields contribute zeros."""
    emb = model.embeddings
    by_field = dict(sample.features)
    pos = 0
    logit = model.bias
    for fid in model.field_ids():
        l = model.vector_len(fid)
        feat = by_field.pop(fid, None)
        if feat is not None:
            if isinstance(emb, CompressedModel) and emb.is_compressed(fid):
                cb, mt = emb.compressed_fields[fid]
                vec = lookup_compressed(cb, mt, feat)
            else:
                f = emb.fields[fid] if isinstance(emb, FieldedEmbeddingModel) else emb.passthrough_fields[fid]
                vec = lookup_uncompressed(f, feat)
            logit += float(np.dot(model.dense_weights[pos : pos + l], vec))
        pos += l
    if by_field:
        raise ValueError(f"sample references unknown fields {sorted(by_field)}")
    return _sigmoid(logit)


def predict_batch(model: PredictorModel, batch: SampleBatch) -> np.ndarray:
    """Vectorized probabilities for a whole batch."""
    field_ids = model.field_ids()
    if batch.field_ids != field_ids:
        raise ValueError("batch field columns must match the model's field set")
    emb = model.embeddings
    logits = np.full(len(batch), model.bias, dtype=np.float64)
    pos = 0
    for j, fid in enumerate(field_ids):
        l = model.vector_len(fid)
        feats = batch.features[:, j]
        present = feats != ABSENT
        if np.any(present):
            idx = feats[present].astype(np.int64)
            if isinstance(emb, CompressedModel) and emb.is_compressed(fid):
                cb, mt = emb.compressed_fields[fid]
                if idx.max(initial=-1) >= mt.num_features:
                    raise IndexError(f"feature id out of range in field {fid}")
                rows = cb.centroids[mt.masks[idx].astype(np.int64)]
            else:
                f = emb.fields[fid] if isinstance(emb, FieldedEmbeddingModel) else emb.passthrough_fields[fid]
                if idx.max(initial=-1) >= f.num_features:
                    raise IndexError(f"feature id out of range in field {fid}")
                rows = f.vectors[idx]
            logits[present] += rows @ model.dense_weights[pos : pos + l]
        pos += l
    return 1.0 / (1.0 + np.exp(-logits))


def evaluate(model: PredictorModel, batch: SampleBatch) -> tuple[float | None, float]:
    """(AUC, log loss) of the model on a batch; AUC is None when undefined."""
    probs = predict_batch(model, batch)
    loss = metrics.log_loss(probs, batch.labels)
    try:
        area = metrics.auc(probs, batch.labels)
    except ValueError:
        area = None
    return area, loss


def split_holdout(
    batch: SampleBatch, holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION
) -> tuple[SampleBatch, SampleBatch]:
    """Training prefix and the held-out tail slice of a segment."""
    if not 0 <= holdout_fraction < 1:
        raise ValueError("holdout_fraction must be in [0, 1)")
    h = int(len(batch) * holdout_fraction)
    return batch.slice(0, len(batch) - h), batch.slice(len(batch) - h, len(batch))


# -- flat packing for the compiled kernels ----------------------------------


def _field_layout(model: PredictorModel):
    field_ids = model.field_ids()
    l_arr = np.array([model.vector_len(fid) for fid in field_ids], dtype=np.int64)
    dim_off = np.zeros(len(field_ids) + 1, dtype=np.int64)
    np.cumsum(l_arr, out=dim_off[1:])
    return field_ids, l_arr, dim_off


def train_epoch(
    model: PredictorModel,
    batch: SampleBatch,
    shuffle_seed: int = 0,
    holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION,
) -> TrainStats:
    """One seeded-shuffle pass of per-sample Adagrad over the training slice.

    Updates embedding rows, dense weights and bias; increments each field's
    frequency counter once per feature occurrence. AUC is measured on the
    held-out tail of the segment.
    """
    emb = model.embeddings
    if not isinstance(emb, FieldedEmbeddingModel):
        raise TypeError("train_epoch expects an uncompressed embedding model")
    train, holdout = split_holdout(batch, holdout_fraction)
    if len(train) == 0:
        raise ValueError("no training samples after the holdout split")

    field_ids, l_arr, dim_off = _field_layout(model)
    if batch.field_ids != field_ids:
        raise ValueError("batch field columns must match the model's field set")

    comp_base = np.zeros(len(field_ids) + 1, dtype=np.int64)
    row_base = np.zeros(len(field_ids) + 1, dtype=np.int64)
    for j, fid in enumerate(field_ids):
        f = emb.fields[fid]
        comp_base[j + 1] = comp_base[j] + f.num_features * f.vector_len
        row_base[j + 1] = row_base[j] + f.num_features
        if np.any(train.features[:, j] >= f.num_features):
            raise IndexError(f"feature id out of range in field {fid}")

    emb_flat = np.concatenate([emb.fields[fid].vectors.ravel() for fid in field_ids])
    acc_flat = np.concatenate([model.emb_acc[fid].ravel() for fid in field_ids])
    freq_flat = np.concatenate([emb.fields[fid].frequencies for fid in field_ids])

    order = np.random.default_rng(shuffle_seed).permutation(len(train)).astype(np.int64)
    labels = train.labels.astype(np.float64)
    bias_state = np.array([model.bias, model.bias_acc], dtype=np.float64)

    loss_sum = train_epoch_kernel(
        train.features,
        labels,
        order,
        emb_flat,
        acc_flat,
        freq_flat,
        comp_base,
        row_base,
        l_arr,
        dim_off,
        model.dense_weights,
        model.dense_acc,
        bias_state,
        model.learning_rate,
        ADAGRAD_EPS,
    )
    model.bias = float(bias_state[0])
    model.bias_acc = float(bias_state[1])
    for j, fid in enumerate(field_ids):
        f = emb.fields[fid]
        n, l = f.vectors.shape
        f.vectors[:] = emb_flat[comp_base[j] : comp_base[j + 1]].reshape(n, l)
        model.emb_acc[fid][:] = acc_flat[comp_base[j] : comp_base[j + 1]].reshape(n, l)
        f.frequencies[:] = freq_flat[row_base[j] : row_base[j + 1]]

    auc_value = evaluate(model, holdout)[0] if len(holdout) else None
    return TrainStats(len(train), loss_sum / len(train), auc_value)


def retrain_epoch(
    model: PredictorModel,
    batch: SampleBatch,
    shuffle_seed: int = 0,
    holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> TrainStats:
    """One pass over the training slice with mask-indirected lookups.

    Per optimization step (minibatch), every touched codebook vector receives
    the arithmetic mean of the gradients of its member-feature occurrences;
    passthrough rows, dense weights and bias receive the step's summed
    gradients. Frequencies and masks are left untouched.
    """
    emb = model.embeddings
    if not isinstance(emb, CompressedModel):
        raise TypeError("retrain_epoch expects a compressed embedding model")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    train, holdout = split_holdout(batch, holdout_fraction)
    if len(train) == 0:
        raise ValueError("no training samples after the holdout split")

    field_ids, l_arr, dim_off = _field_layout(model)
    if batch.field_ids != field_ids:
        raise ValueError("batch field columns must match the model's field set")

    J = len(field_ids)
    comp_flag = np.zeros(J, dtype=np.uint8)
    mask_base = np.full(J, -1, dtype=np.int64)
    cent_base = np.full(J, -1, dtype=np.int64)
    clus_base = np.full(J, -1, dtype=np.int64)
    pcomp_base = np.full(J, -1, dtype=np.int64)
    prow_base = np.full(J, -1, dtype=np.int64)

    mask_parts, cent_parts, cacc_parts, emb_parts, acc_parts = [], [], [], [], []
    mask_total = cent_total = clus_total = p_total = prow_total = 0
    for j, fid in enumerate(field_ids):
        n = emb.num_features(fid)
        if np.any(train.features[:, j] >= n):
            raise IndexError(f"feature id out of range in field {fid}")
        if emb.is_compressed(fid):
            cb, mt = emb.compressed_fields[fid]
            comp_flag[j] = 1
            mask_base[j] = mask_total
            cent_base[j] = cent_total
            clus_base[j] = clus_total
            mask_parts.append(mt.masks.astype(np.int64))
            cent_parts.append(cb.centroids.ravel())
            cacc_parts.append(model.emb_acc[fid].ravel())
            mask_total += n
            cent_total += cb.k * cb.vector_len
            clus_total += cb.k
        else:
            f = emb.passthrough_fields[fid]
            pcomp_base[j] = p_total
            prow_base[j] = prow_total
            emb_parts.append(f.vectors.ravel())
            acc_parts.append(model.emb_acc[fid].ravel())
            p_total += n * f.vector_len
            prow_total += n

    def _cat(parts, dtype=np.float64):
        return np.concatenate(parts) if parts else np.empty(0, dtype=dtype)

    masks_flat = _cat(mask_parts, np.int64)
    cent = _cat(cent_parts)
    cacc = _cat(cacc_parts)
    emb_flat = _cat(emb_parts)
    acc_flat = _cat(acc_parts)

    order = np.random.default_rng(shuffle_seed).permutation(len(train)).astype(np.int64)
    labels = train.labels.astype(np.float64)
    bias_state = np.array([model.bias, model.bias_acc], dtype=np.float64)

    max_touch = min(len(train), batch_size) * J + 1
    loss_sum = retrain_epoch_kernel(
        train.features,
        labels,
        order,
        comp_flag,
        masks_flat,
        mask_base,
        cent,
        cacc,
        cent_base,
        clus_base,
        emb_flat,
        acc_flat,
        pcomp_base,
        prow_base,
        l_arr,
        dim_off,
        model.dense_weights,
        model.dense_acc,
        bias_state,
        model.learning_rate,
        ADAGRAD_EPS,
        batch_size,
        np.zeros_like(cent),
        np.zeros(clus_total, dtype=np.int64),
        np.zeros_like(emb_flat),
        np.zeros(prow_total, dtype=np.int64),
        np.zeros(max_touch, dtype=np.int64),
        np.zeros(max_touch, dtype=np.int64),
        np.zeros(max_touch, dtype=np.int64),
        np.zeros(max_touch, dtype=np.int64),
        np.zeros(dim_off[-1], dtype=np.float64),
    )
    model.bias = float(bias_state[0])
    model.bias_acc = float(bias_state[1])
    for j, fid in enumerate(field_ids):
        if comp_flag[j]:
            cb, _ = emb.compressed_fields[fid]
            k, l = cb.centroids.shape
            start = cent_base[j]
            cb.centroids[:] = cent[start : start + k * l].reshape(k, l)
            model.emb_acc[fid][:] = cacc[start : start + k * l].reshape(k, l)
        else:
            f = emb.passthrough_fields[fid]
            n, l = f.vectors.shape
            start = pcomp_base[j]
            f.vectors[:] = emb_flat[start : start + n * l].reshape(n, l)
            model.emb_acc[fid][:] = acc_flat[start : start + n * l].reshape(n, l)

    auc_value = evaluate(model, holdout)[0] if len(holdout) else None
    return TrainStats(len(train), loss_sum / len(train), auc_value)
