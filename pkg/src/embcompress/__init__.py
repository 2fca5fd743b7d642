"""Similarity-aware compression for field-partitioned embedding tables.

Clusters each large field's embedding vectors into a small codebook plus a
per-feature mask, retrains the representative vectors with cluster-averaged
gradients, and provides a synthetic stream plus pipeline to demonstrate that
ranking quality survives an order-of-magnitude memory reduction.
"""

from .clustering import ClusterConfig, ClusteringResult, assign_nearest, kmeans, objective
from .compression import (
    CompressionConfig,
    CompressionReport,
    compress_field,
    compress_model,
    compression_ratio,
    select_eligible_fields,
)
from .datagen import Segment, StreamConfig, StreamGenerator, generate_stream
from .metrics import auc, log_loss
from .model import (
    Codebook,
    CompressedModel,
    Field,
    FieldedEmbeddingModel,
    MaskTable,
    lookup_compressed,
    lookup_uncompressed,
    memory_footprint,
)
from .samples import Sample, SampleBatch
from .serialize import load_checkpoint, load_model, save_checkpoint, save_model
from .trainer import (
    PredictorModel,
    TrainStats,
    adagrad_update,
    evaluate,
    forward,
    retrain_epoch,
    train_epoch,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterConfig",
    "ClusteringResult",
    "Codebook",
    "CompressedModel",
    "CompressionConfig",
    "CompressionReport",
    "Field",
    "FieldedEmbeddingModel",
    "MaskTable",
    "PredictorModel",
    "Sample",
    "SampleBatch",
    "Segment",
    "StreamConfig",
    "StreamGenerator",
    "TrainStats",
    "adagrad_update",
    "assign_nearest",
    "auc",
    "compress_field",
    "compress_model",
    "compression_ratio",
    "evaluate",
    "forward",
    "generate_stream",
    "kmeans",
    "load_checkpoint",
    "load_model",
    "log_loss",
    "lookup_compressed",
    "lookup_uncompressed",
    "memory_footprint",
    "objective",
    "retrain_epoch",
    "save_checkpoint",
    "save_model",
    "select_eligible_fields",
    "train_epoch",
]
