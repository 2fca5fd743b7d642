"""End-to-end per-segment orchestration: train, compress, retrain, evaluate.

Each segment gets one training epoch on the live (uncompressed) model. On
compression segments the current embeddings are clustered into a compressed
model which is retrained on the same segment, and both models are evaluated
on the segment's held-out tail, producing the paired Before/After metric
rows. The live model is never disturbed by the compression arm, so a run
with compression disabled reproduces the Before rows exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .compression import (
    CompressionReport,
    compress_model,
    format_report_records,
    format_report_table,
    parse_report_records,
)
from .config import PipelineConfig
from .datagen import StreamMeta, load_segment, read_manifest
from .model import Field, FieldedEmbeddingModel
from .serialize import save_checkpoint
from .trainer import (
    PredictorModel,
    evaluate,
    retrain_epoch,
    split_holdout,
    train_epoch,
)


def derive_seed(*parts: int) -> int:
    """Stable 63-bit seed from a tuple of integers."""
    state = np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))


def grow_field(field: Field, new_size: int, acc: np.ndarray, init_std: float, seed: int):
    """Append freshly initialized rows (and zeroed accumulator rows) up to new_size."""
    n, l = field.vectors.shape
    if new_size < n:
        raise ValueError(f"field {field.field_id} cannot shrink from {n} to {new_size}")
    if new_size == n:
        return field, acc
    rng = np.random.default_rng(seed)
    extra = rng.normal(0.0, init_std, size=(new_size - n, l))
    field.vectors = np.vstack([field.vectors, extra])
    field.frequencies = np.concatenate([field.frequencies, np.zeros(new_size - n, dtype=np.int64)])
    return field, np.vstack([acc, np.zeros((new_size - n, l))])


def ensure_capacity(predictor: PredictorModel, vocab: dict[int, int], init_std: float, seed: int):
    """Grow every field of an uncompressed predictor to its segment vocabulary."""
    emb = predictor.embeddings
    if not isinstance(emb, FieldedEmbeddingModel):
        raise TypeError("capacity growth applies to the uncompressed model")
    for fid in emb.field_ids():
        field = emb.fields[fid]
        target = vocab[fid]
        if target > field.num_features:
            grow_seed = derive_seed(seed, fid, field.num_features)
            field, acc = grow_field(field, target, predictor.emb_acc[fid], init_std, grow_seed)
            emb.fields[fid] = field
            predictor.emb_acc[fid] = acc


def new_predictor(meta: StreamMeta, config: PipelineConfig) -> PredictorModel:
    fields = {
        fid: Field(fid, np.zeros((0, l)), np.zeros(0, dtype=np.int64))
        for fid, l in meta.vector_lens.items()
    }
    return PredictorModel.fresh(FieldedEmbeddingModel(fields), config.learning_rate)


# ---------------------------------------------------------------------------
# metrics log


@dataclass
class MetricsRow:
    segment_id: int
    phase: str  # train | retrain
    log_loss: float
    auc: float
    wall_ms: float

    def format(self) -> str:
        return (
            f"segment={self.segment_id} phase={self.phase} "
            f"log_loss={self.log_loss:.12g} auc={self.auc:.12g} wall_ms={self.wall_ms:.3f}"
        )


def read_metrics_log(path: str | Path) -> list[MetricsRow]:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        kv = dict(item.split("=", 1) for item in line.split())
        rows.append(
            MetricsRow(
                segment_id=int(kv["segment"]),
                phase=kv["phase"],
                log_loss=float(kv["log_loss"]),
                auc=float(kv["auc"]),
                wall_ms=float(kv["wall_ms"]),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# pipeline run


@dataclass
class PipelineResult:
    metrics_path: Path
    rows: list[MetricsRow]
    reports: dict[int, CompressionReport]  # per compression segment
    baseline_checkpoint: Path
    compressed_checkpoint: Path | None


def run_pipeline(config: PipelineConfig, progress=None) -> PipelineResult:
    data_dir = Path(config.data)
    out_dir = Path(config.out)
    meta = read_manifest(data_dir)
    entries = meta.segment_entries[: config.segments]
    if not entries:
        raise FileNotFoundError(f"no segments found under {data_dir}")

    out_dir.mkdir(parents=True, exist_ok=True)
    reports_dir = out_dir / "reports"
    ckpt_dir = out_dir / "checkpoints"
    reports_dir.mkdir(exist_ok=True)
    ckpt_dir.mkdir(exist_ok=True)
    metrics_path = out_dir / "metrics.log"

    comp_cfg = config.compression_config()
    predictor = new_predictor(meta, config)
    field_ids = list(range(meta.num_fields))

    rows: list[MetricsRow] = []
    reports: dict[int, CompressionReport] = {}
    retrained: PredictorModel | None = None

    with open(metrics_path, "w") as log:
        for entry in entries:
            seg = load_segment(data_dir, entry, field_ids)
            ensure_capacity(predictor, seg.vocab_sizes, config.init_std, config.seed)
            if not config.cumulative_frequencies:
                for f in predictor.embeddings.fields.values():
                    f.frequencies[:] = 0

            shuffle_seed = derive_seed(config.seed, seg.segment_id, 1)
            _, holdout = split_holdout(seg.batch, config.holdout_fraction)

            start = time.perf_counter()
            train_epoch(predictor, seg.batch, shuffle_seed, config.holdout_fraction)
            train_ms = (time.perf_counter() - start) * 1e3
            auc_before, ll_before = evaluate(predictor, holdout)
            row = MetricsRow(seg.segment_id, "train", ll_before, _nanfix(auc_before), train_ms)
            rows.append(row)
            log.write(row.format() + "\n")

            compress_due = (
                not config.no_compress and (seg.segment_id % config.compress_every) == 0
            )
            if compress_due:
                compressed, report = compress_model(
                    predictor.embeddings, comp_cfg, threads=config.threads
                )
                reports[seg.segment_id] = report
                stem = reports_dir / f"segment_{seg.segment_id:04d}"
                stem.with_suffix(".txt").write_text(format_report_table(report))
                stem.with_suffix(".kv").write_text(format_report_records(report))

                retrained = predictor.with_compressed(compressed)
                start = time.perf_counter()
                retrain_epoch(
                    retrained,
                    seg.batch,
                    shuffle_seed,
                    config.holdout_fraction,
                    config.batch_size,
                )
                retrain_ms = (time.perf_counter() - start) * 1e3
                auc_after, ll_after = evaluate(retrained, holdout)
                row = MetricsRow(seg.segment_id, "retrain", ll_after, _nanfix(auc_after), retrain_ms)
                rows.append(row)
                log.write(row.format() + "\n")

            if progress is not None:
                progress(f"segment {seg.segment_id}: " + rows[-1].format())

    baseline_path = ckpt_dir / "baseline.ckpt"
    save_checkpoint(predictor, baseline_path)
    compressed_path = None
    if retrained is not None:
        compressed_path = ckpt_dir / "compressed.ckpt"
        save_checkpoint(retrained, compressed_path)

    return PipelineResult(metrics_path, rows, reports, baseline_path, compressed_path)


def _nanfix(value: float | None) -> float:
    return float("nan") if value is None else value


# ---------------------------------------------------------------------------
# report rendering


def load_run_reports(out_dir: str | Path) -> dict[int, CompressionReport]:
    reports_dir = Path(out_dir) / "reports"
    out: dict[int, CompressionReport] = {}
    if reports_dir.is_dir():
        for path in sorted(reports_dir.glob("segment_*.kv")):
            seg_id = int(path.stem.split("_")[1])
            out[seg_id] = parse_report_records(path.read_text())
    return out


def render_run_table(out_dir: str | Path) -> str:
    """Per-segment Before/After comparison for one pipeline run."""
    metrics_path = Path(out_dir) / "metrics.log"
    if not metrics_path.exists():
        raise FileNotFoundError(f"no metrics log under {out_dir}")
    rows = read_metrics_log(metrics_path)
    if not rows:
        raise ValueError(f"metrics log {metrics_path} is empty: no data")
    reports = load_run_reports(out_dir)

    before = {r.segment_id: r for r in rows if r.phase == "train"}
    after = {r.segment_id: r for r in rows if r.phase == "retrain"}

    header = (
        "segment",
        "vectors_before",
        "vectors_after",
        "auc_before",
        "auc_after",
        "logloss_before",
        "logloss_after",
        "ratio",
    )
    table = [list(header)]
    for seg_id in sorted(before):
        b = before[seg_id]
        a = after.get(seg_id)
        rep = reports.get(seg_id)
        table.append(
            [
                str(seg_id),
                str(rep.vectors_before) if rep else "-",
                str(rep.vectors_after) if rep else "-",
                f"{b.auc:.6f}",
                f"{a.auc:.6f}" if a else "-",
                f"{b.log_loss:.6f}",
                f"{a.log_loss:.6f}" if a else "-",
                f"{rep.ratio:.4f}" if rep else "-",
            ]
        )
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in table]
    return "\n".join(lines) + "\n"


def clustering_wall_ms(out_dir: str | Path) -> float:
    """Total clustering wall time across every report of a run."""
    total = 0.0
    for report in load_run_reports(out_dir).values():
        total += sum(e.wall_ms for e in report.entries)
    return total


def render_comparison(out_dirs: list[str | Path]) -> str:
    """Side-by-side ablation summary over several runs."""
    lines = []
    base_wall = None
    for out_dir in out_dirs:
        rows = read_metrics_log(Path(out_dir) / "metrics.log")
        if not rows:
            raise ValueError(f"metrics log under {out_dir} is empty: no data")
        final_before = [r for r in rows if r.phase == "train"][-1]
        afters = [r for r in rows if r.phase == "retrain"]
        final_after = afters[-1] if afters else None
        wall = clustering_wall_ms(out_dir)
        if base_wall is None:
            base_wall = wall
        ratio = wall / base_wall if base_wall > 0 else float("nan")
        lines.append(
            f"run={out_dir} final_auc_before={final_before.auc:.6f} "
            + (
                f"final_auc_after={final_after.auc:.6f} "
                if final_after
                else "final_auc_after=- "
            )
            + f"clustering_wall_ms={wall:.1f} wall_ratio={ratio:.3f}"
        )
    return "\n".join(lines) + "\n"
