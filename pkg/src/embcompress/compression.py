"""Per-field compression driver.

A field qualifies for compression when it has at least
`eligibility_multiplier * k` features. The fast path clusters only the
`fast_multiplier * k` most frequent features and snaps the remaining tail to
the nearest centroid; otherwise every vector goes through k-means. Fields are
processed independently with per-field derived seeds, so results do not
depend on scheduling order or worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .clustering import ClusterConfig, assign_nearest, kmeans
from .model import (
    COMPONENT_BYTES,
    Codebook,
    CompressedModel,
    Field,
    FieldedEmbeddingModel,
    MaskTable,
    mask_dtype,
    mask_width,
)


@dataclass
class CompressionConfig:
    k: int = 100
    eligibility_multiplier: int = 100
    fast_multiplier: int = 100
    fast_enabled: bool = True
    cluster_config: ClusterConfig = dc_field(default_factory=lambda: ClusterConfig(k=100))

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.eligibility_multiplier < 1:
            raise ValueError("eligibility_multiplier must be >= 1")
        if self.fast_multiplier < 1:
            raise ValueError("fast_multiplier must be >= 1")

    @property
    def eligibility_threshold(self) -> int:
        return self.eligibility_multiplier * self.k

    @property
    def fast_cutoff(self) -> int:
        return self.fast_multiplier * self.k


@dataclass
class FieldReport:
    """Per-field compression outcome; k_after is None for passthrough fields."""

    field_id: int
    n_before: int
    vector_len: int
    k_after: int | None
    clustered_count: int
    objective: float
    wall_ms: float

    @property
    def compressed(self) -> bool:
        return self.k_after is not None

    @property
    def vectors_after(self) -> int:
        return self.k_after if self.k_after is not None else self.n_before

    def bytes_before(self, bytes_per_component: int = COMPONENT_BYTES) -> int:
        return self.n_before * self.vector_len * bytes_per_component

    def bytes_after(
        self, bytes_per_component: int = COMPONENT_BYTES, bytes_per_mask: int | None = None
    ) -> int:
        if self.k_after is None:
            return self.bytes_before(bytes_per_component)
        per_mask = bytes_per_mask if bytes_per_mask is not None else mask_width(self.k_after)
        return self.n_before * per_mask + self.k_after * self.vector_len * bytes_per_component


@dataclass
class CompressionReport:
    entries: list[FieldReport]
    vectors_before: int
    vectors_after: int
    bytes_before: int
    bytes_after: int
    ratio: float


def build_report(
    entries: list[FieldReport],
    bytes_per_component: int = COMPONENT_BYTES,
    bytes_per_mask: int | None = None,
) -> CompressionReport:
    """Assemble totals from per-field entries.

    `bytes_per_mask=None` derives the mask width from each field's k; pass an
    explicit width to reproduce fixed-width accounting.
    """
    entries = sorted(entries, key=lambda e: e.field_id)
    vectors_before = sum(e.n_before for e in entries)
    vectors_after = sum(e.vectors_after for e in entries)
    bytes_before = sum(e.bytes_before(bytes_per_component) for e in entries)
    bytes_after = sum(e.bytes_after(bytes_per_component, bytes_per_mask) for e in entries)
    if bytes_after <= 0:
        raise ValueError("total compressed size must be positive")
    return CompressionReport(
        entries=entries,
        vectors_before=vectors_before,
        vectors_after=vectors_after,
        bytes_before=bytes_before,
        bytes_after=bytes_after,
        ratio=bytes_before / bytes_after,
    )


def compression_ratio(report: CompressionReport) -> float:
    if report.bytes_after <= 0:
        raise ValueError("compressed size must be positive")
    return report.bytes_before / report.bytes_after


def select_eligible_fields(model: FieldedEmbeddingModel, config: CompressionConfig) -> set[int]:
    """Field ids with at least eligibility_multiplier*k features."""
    threshold = config.eligibility_threshold
    return {fid for fid, f in model.fields.items() if f.num_features >= threshold}


def head_feature_order(frequencies: np.ndarray) -> np.ndarray:
    """Feature indices by descending frequency, ties toward the smaller index."""
    return np.argsort(-np.asarray(frequencies), kind="stable")


def compress_field(field: Field, config: CompressionConfig) -> tuple[Codebook, MaskTable, FieldReport]:
    """Build the codebook and mask table for one eligible field.

    The clustering seed is derived as cluster_config.seed XOR field_id so
    per-field jobs stay independent.
    """
    n = field.num_features
    if n < config.eligibility_threshold:
        raise ValueError(
            f"field {field.field_id} with {n} features is below the "
            f"eligibility threshold {config.eligibility_threshold}"
        )
    cluster_cfg = replace(
        config.cluster_config, k=config.k, seed=config.cluster_config.seed ^ field.field_id
    )

    start = time.perf_counter()
    if config.fast_enabled and config.fast_cutoff < n:
        cutoff = config.fast_cutoff
        order = head_feature_order(field.frequencies)
        head = order[:cutoff]
        tail = order[cutoff:]
        result = kmeans(field.vectors[head], field.frequencies[head], cluster_cfg)
        masks = np.empty(n, dtype=mask_dtype(config.k))
        masks[head] = result.assignments
        masks[tail] = assign_nearest(field.vectors[tail], result.centroids)
        clustered = cutoff
    else:
        result = kmeans(field.vectors, field.frequencies, cluster_cfg)
        masks = result.assignments.astype(mask_dtype(config.k))
        clustered = n
    wall_ms = (time.perf_counter() - start) * 1e3

    codebook = Codebook(field.field_id, result.centroids)
    table = MaskTable(field.field_id, masks)
    report = FieldReport(
        field_id=field.field_id,
        n_before=n,
        vector_len=field.vector_len,
        k_after=config.k,
        clustered_count=clustered,
        objective=result.objective,
        wall_ms=wall_ms,
    )
    return codebook, table, report


def compress_model(
    model: FieldedEmbeddingModel, config: CompressionConfig, threads: int = 1
) -> tuple[CompressedModel, CompressionReport]:
    """Compress every eligible field; copy the rest verbatim.

    Per-field jobs may run on a worker pool; entries are assembled in
    field-id order and per-field seeds make the output independent of
    scheduling.
    """
    eligible = select_eligible_fields(model, config)
    field_ids = model.field_ids()

    compressed: dict[int, tuple[Codebook, MaskTable]] = {}
    passthrough: dict[int, Field] = {}
    entries: list[FieldReport] = []

    jobs = [fid for fid in field_ids if fid in eligible]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(
                zip(jobs, pool.map(lambda fid: compress_field(model.fields[fid], config), jobs))
            )
    else:
        results = {fid: compress_field(model.fields[fid], config) for fid in jobs}

    for fid in field_ids:
        f = model.fields[fid]
        if fid in eligible:
            codebook, table, entry = results[fid]
            compressed[fid] = (codebook, table)
            entries.append(entry)
        else:
            passthrough[fid] = f.copy()
            entries.append(
                FieldReport(
                    field_id=fid,
                    n_before=f.num_features,
                    vector_len=f.vector_len,
                    k_after=None,
                    clustered_count=0,
                    objective=0.0,
                    wall_ms=0.0,
                )
            )

    report = build_report(entries)
    return CompressedModel(compressed, passthrough), report


# ---------------------------------------------------------------------------
# report serialization: aligned text table and key=value records


_COLUMNS = ("field_id", "n_before", "k_after", "clustered_count", "objective", "wall_ms")


def _entry_values(e: FieldReport) -> list[str]:
    return [
        str(e.field_id),
        str(e.n_before),
        str(e.k_after) if e.k_after is not None else "passthrough",
        str(e.clustered_count),
        f"{e.objective:.6f}",
        f"{e.wall_ms:.3f}",
    ]


def format_report_table(report: CompressionReport) -> str:
    """Aligned, human-readable per-field table plus a totals block."""
    rows = [list(_COLUMNS)] + [_entry_values(e) for e in report.entries]
    widths = [max(len(r[i]) for r in rows) for i in range(len(_COLUMNS))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows]
    lines.append("")
    lines.append(
        f"totals: vectors_before={report.vectors_before} vectors_after={report.vectors_after} "
        f"bytes_before={report.bytes_before} bytes_after={report.bytes_after} "
        f"ratio={report.ratio:.6f}"
    )
    return "\n".join(lines) + "\n"


def format_report_records(report: CompressionReport) -> str:
    """One `field` record per line plus a trailing `totals` record."""
    lines = []
    for e in report.entries:
        vals = _entry_values(e)
        lines.append("field " + " ".join(f"{k}={v}" for k, v in zip(_COLUMNS, vals)))
    lines.append(
        "totals "
        f"vectors_before={report.vectors_before} vectors_after={report.vectors_after} "
        f"bytes_before={report.bytes_before} bytes_after={report.bytes_after} "
        f"ratio={report.ratio:.12g}"
    )
    return "\n".join(lines) + "\n"


def parse_report_records(text: str) -> CompressionReport:
    """Inverse of format_report_records (wall times and objective lose the
    precision dropped by formatting)."""
    entries: list[FieldReport] = []
    totals: dict[str, str] = {}
    try:
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            kind, _, rest = line.partition(" ")
            kv = dict(item.split("=", 1) for item in rest.split())
            if kind == "field":
                entries.append(
                    FieldReport(
                        field_id=int(kv["field_id"]),
                        n_before=int(kv["n_before"]),
                        vector_len=0,
                        k_after=None if kv["k_after"] == "passthrough" else int(kv["k_after"]),
                        clustered_count=int(kv["clustered_count"]),
                        objective=float(kv["objective"]),
                        wall_ms=float(kv["wall_ms"]),
                    )
                )
            elif kind == "totals":
                totals = kv
            else:
                raise ValueError(f"unrecognized report record {kind!r}")
        if not totals:
            raise ValueError("report is missing the totals record")
        return CompressionReport(
            entries=entries,
            vectors_before=int(totals["vectors_before"]),
            vectors_after=int(totals["vectors_after"]),
            bytes_before=int(totals["bytes_before"]),
            bytes_after=int(totals["bytes_after"]),
            ratio=float(totals["ratio"]),
        )
    except KeyError as exc:
        raise ValueError(f"report record is missing key {exc}") from exc
