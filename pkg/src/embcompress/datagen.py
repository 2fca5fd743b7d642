"""Synthetic hourly feature stream.

Reproduces the statistical regime the compressor targets: per-field vocabulary
sizes spread over several orders of magnitude (so only a minority of fields
pass the eligibility threshold), heavy-tailed per-feature frequency via a
bounded Zipf law, a vocabulary that grows before each new segment, mixed
vector lengths, and labels planted by a hidden per-feature logistic model so
that a learnable signal exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Iterator

import numpy as np

from .samples import SampleBatch, read_records, write_records

DEFAULT_VECTOR_LENGTH_MIX = {9: 0.89, 17: 0.11}


@dataclass
class StreamConfig:
    num_fields: int = 8
    field_sizes: tuple[int, ...] | None = None  # initial vocab per field; None = log-spaced ladder
    min_field_size: int = 100
    max_field_size: int = 100_000
    zipf_exponent: float = 1.1
    segments: int = 24
    samples_per_segment: int = 100_000
    new_feature_rate: float = 0.01
    vector_length_mix: dict[int, float] = dc_field(
        default_factory=lambda: dict(DEFAULT_VECTOR_LENGTH_MIX)
    )
    signal_scale: float = 1.0
    label_noise: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.num_fields < 1:
            raise ValueError("num_fields must be >= 1")
        if self.zipf_exponent <= 1.0:
            raise ValueError("zipf_exponent must be > 1")
        if self.segments < 1:
            raise ValueError("segments must be >= 1")
        if self.samples_per_segment < 1:
            raise ValueError("samples_per_segment must be >= 1")
        if self.new_feature_rate < 0:
            raise ValueError("new_feature_rate must be >= 0")
        if self.label_noise < 0:
            raise ValueError("label_noise must be >= 0")
        if self.field_sizes is not None:
            self.field_sizes = tuple(int(s) for s in self.field_sizes)
            if len(self.field_sizes) != self.num_fields:
                raise ValueError("field_sizes length must equal num_fields")
            if any(s < 1 for s in self.field_sizes):
                raise ValueError("field sizes must be >= 1")
        if not self.vector_length_mix:
            raise ValueError("vector_length_mix must be non-empty")
        if any(l < 1 for l in self.vector_length_mix):
            raise ValueError("vector lengths must be >= 1")
        if any(p < 0 for p in self.vector_length_mix.values()):
            raise ValueError("vector length probabilities must be >= 0")
        if abs(sum(self.vector_length_mix.values()) - 1.0) > 1e-9:
            raise ValueError("vector_length_mix probabilities must sum to 1")

    def initial_sizes(self) -> tuple[int, ...]:
        if self.field_sizes is not None:
            return self.field_sizes
        if self.num_fields == 1:
            return (self.max_field_size,)
        ladder = np.geomspace(self.min_field_size, self.max_field_size, self.num_fields)
        return tuple(int(round(s)) for s in ladder)


@dataclass
class Segment:
    segment_id: int
    batch: SampleBatch
    vocab_sizes: dict[int, int]


def zipf_cdf(n: int, exponent: float) -> np.ndarray:
    """Cumulative distribution of a bounded Zipf law over ranks 1..n."""
    weights = np.arange(1, n + 1, dtype=np.float64) ** (-exponent)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    return cdf


def zipf_head_share(n: int, exponent: float, head: int) -> float:
    """Exact probability mass of the `head` most likely ranks."""
    weights = np.arange(1, n + 1, dtype=np.float64) ** (-exponent)
    return float(weights[:head].sum() / weights.sum())


def gini_coefficient(counts: np.ndarray) -> float:
    """Gini index of a non-negative count vector (0 = uniform, 1 = fully skewed)."""
    x = np.sort(np.asarray(counts, dtype=np.float64))
    n = x.size
    total = x.sum()
    if n == 0 or total == 0:
        raise ValueError("gini undefined on empty or all-zero counts")
    ranks = np.arange(1, n + 1, dtype=np.float64)
    return float(2.0 * np.sum(ranks * x) / (n * total) - (n + 1.0) / n)


class StreamGenerator:
    """Stateful generator producing segments in order, deterministic per seed.

    Feature id equals frequency rank within its field (id 0 most frequent);
    newly grown features join at the tail of the rank order.
    """

    def __init__(self, config: StreamConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.field_ids = list(range(config.num_fields))

        lengths = sorted(config.vector_length_mix)
        probs = np.array([config.vector_length_mix[l] for l in lengths], dtype=np.float64)
        probs /= probs.sum()
        self.vector_lens = {
            fid: int(self.rng.choice(lengths, p=probs)) for fid in self.field_ids
        }

        self.vocab_sizes = list(config.initial_sizes())
        self.planted = [
            self.rng.normal(0.0, 1.0, size=n) for n in self.vocab_sizes
        ]
        self._next_segment = 0

    def _grow(self) -> None:
        rate = self.config.new_feature_rate
        if rate <= 0:
            return
        for j in range(len(self.vocab_sizes)):
            extra = int(round(self.vocab_sizes[j] * rate))
            if extra > 0:
                self.planted[j] = np.concatenate(
                    [self.planted[j], self.rng.normal(0.0, 1.0, size=extra)]
                )
                self.vocab_sizes[j] += extra

    def planted_scores(self, batch: SampleBatch) -> np.ndarray:
        """Probabilities from the hidden weights alone (the learnable signal)."""
        logits = np.zeros(len(batch), dtype=np.float64)
        for j, fid in enumerate(batch.field_ids):
            feats = batch.features[:, j]
            present = feats >= 0
            logits[present] += self.planted[fid][feats[present]]
        logits *= self.config.signal_scale
        return 1.0 / (1.0 + np.exp(-logits))

    def next_segment(self) -> Segment:
        if self._next_segment >= self.config.segments:
            raise RuntimeError("stream exhausted: all configured segments generated")
        if self._next_segment > 0:
            self._grow()
        seg_id = self._next_segment
        self._next_segment += 1

        m = self.config.samples_per_segment
        features = np.empty((m, len(self.field_ids)), dtype=np.int32)
        logits = np.zeros(m, dtype=np.float64)
        for j, fid in enumerate(self.field_ids):
            cdf = zipf_cdf(self.vocab_sizes[fid], self.config.zipf_exponent)
            draws = np.searchsorted(cdf, self.rng.random(m), side="right")
            draws = np.minimum(draws, self.vocab_sizes[fid] - 1).astype(np.int32)
            features[:, j] = draws
            logits += self.planted[fid][draws]
        logits *= self.config.signal_scale
        if self.config.label_noise > 0:
            logits = logits + self.config.label_noise * self.rng.normal(0.0, 1.0, size=m)
        probs = 1.0 / (1.0 + np.exp(-logits))
        labels = (self.rng.random(m) < probs).astype(np.uint8)

        batch = SampleBatch(list(self.field_ids), features, labels)
        vocab = {fid: self.vocab_sizes[fid] for fid in self.field_ids}
        return Segment(seg_id, batch, vocab)

    def segments(self) -> Iterator[Segment]:
        for _ in range(self._next_segment, self.config.segments):
            yield self.next_segment()


def generate_stream(config: StreamConfig) -> Iterator[Segment]:
    """Yield the configured number of segments, fully deterministic per seed."""
    yield from StreamGenerator(config).segments()


# ---------------------------------------------------------------------------
# on-disk stream layout: one record file per segment plus a manifest


def segment_filename(segment_id: int) -> str:
    return f"segment_{segment_id:04d}.bin"


@dataclass
class StreamMeta:
    num_fields: int
    vector_lens: dict[int, int]
    segment_entries: list[dict]  # id, file, samples, vocab per field


def save_stream(config: StreamConfig, out_dir: str | Path) -> StreamMeta:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gen = StreamGenerator(config)

    manifest_lines = [
        f"stream seed={config.seed} num_fields={config.num_fields} "
        f"segments={config.segments} zipf_exponent={config.zipf_exponent:g}"
    ]
    for fid in gen.field_ids:
        manifest_lines.append(
            f"field id={fid} vector_len={gen.vector_lens[fid]} "
            f"initial_size={gen.vocab_sizes[fid]}"
        )

    entries = []
    for seg in gen.segments():
        name = segment_filename(seg.segment_id)
        with open(out_dir / name, "wb") as fh:
            write_records(seg.batch, fh)
        vocab_str = ",".join(str(seg.vocab_sizes[fid]) for fid in gen.field_ids)
        manifest_lines.append(
            f"segment id={seg.segment_id} file={name} samples={len(seg.batch)} vocab={vocab_str}"
        )
        entries.append(
            {
                "id": seg.segment_id,
                "file": name,
                "samples": len(seg.batch),
                "vocab": dict(seg.vocab_sizes),
            }
        )

    (out_dir / "manifest.txt").write_text("\n".join(manifest_lines) + "\n")
    return StreamMeta(config.num_fields, dict(gen.vector_lens), entries)


def read_manifest(data_dir: str | Path) -> StreamMeta:
    path = Path(data_dir) / "manifest.txt"
    if not path.exists():
        raise FileNotFoundError(f"no manifest at {path}")
    vector_lens: dict[int, int] = {}
    entries: list[dict] = []
    num_fields = 0
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        kind, _, rest = line.partition(" ")
        kv = dict(item.split("=", 1) for item in rest.split())
        if kind == "stream":
            num_fields = int(kv["num_fields"])
        elif kind == "field":
            vector_lens[int(kv["id"])] = int(kv["vector_len"])
        elif kind == "segment":
            vocab_sizes = [int(v) for v in kv["vocab"].split(",")]
            entries.append(
                {
                    "id": int(kv["id"]),
                    "file": kv["file"],
                    "samples": int(kv["samples"]),
                    "vocab": {fid: n for fid, n in enumerate(vocab_sizes)},
                }
            )
        else:
            raise ValueError(f"unrecognized manifest line kind {kind!r}")
    if len(vector_lens) != num_fields:
        raise ValueError("manifest field lines do not match declared num_fields")
    return StreamMeta(num_fields, vector_lens, entries)


def load_segment(data_dir: str | Path, entry: dict, field_ids: list[int]) -> Segment:
    path = Path(data_dir) / entry["file"]
    with open(path, "rb") as fh:
        batch = read_records(fh, field_ids)
    if len(batch) != entry["samples"]:
        raise ValueError(f"{path}: expected {entry['samples']} samples, found {len(batch)}")
    return Segment(entry["id"], batch, dict(entry["vocab"]))
