"""Command-line front end.

Subcommands wire the training pipeline end to end: `gen` writes a synthetic
segment stream, `pipeline` runs train/compress/retrain per segment, and
`train`, `compress`, `retrain`, `eval` expose the individual stages.
`report` renders logged runs as a comparison table.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration. Every
failure prints a single `error: <kind>: <message>` line on stderr.
"""

from __future__ import annotations

import functools
import sys
import time
from pathlib import Path

import click

from .compression import format_report_records, format_report_table, compress_model
from .config import ConfigError, build_config
from .datagen import load_segment, read_manifest, save_stream
from .model import CompressedModel, FieldedEmbeddingModel
from .pipeline import (
    MetricsRow,
    derive_seed,
    ensure_capacity,
    new_predictor,
    render_comparison,
    render_run_table,
    run_pipeline,
)
from .serialize import load_checkpoint, save_checkpoint
from .trainer import evaluate, retrain_epoch, split_holdout, train_epoch


def cli_errors(fn):
    """Map exceptions to the documented exit codes with one-line messages."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"error: config: {exc}", err=True)
            sys.exit(2)
        except click.ClickException:
            raise
        except Exception as exc:  # noqa: BLE001 - single funnel to exit code 1
            click.echo(f"error: runtime: {exc}", err=True)
            sys.exit(1)

    return wrapper


def config_options(fn):
    """Flags mirroring the config keys; None means "not set on the CLI"."""
    options = [
        click.option("--config", "config_file", type=click.Path(), default=None),
        click.option("--seed", type=int, default=None),
        click.option("--segments", type=int, default=None),
        click.option("--samples-per-segment", type=int, default=None),
        click.option("--num-fields", type=int, default=None),
        click.option("--min-field-size", type=int, default=None),
        click.option("--max-field-size", type=int, default=None),
        click.option("--zipf-exponent", type=float, default=None),
        click.option("--new-feature-rate", type=float, default=None),
        click.option("--signal-scale", type=float, default=None),
        click.option("--label-noise", type=float, default=None),
        click.option("--k", type=int, default=None),
        click.option("--eligibility-multiplier", type=int, default=None),
        click.option("--fast/--no-fast", "fast", default=None),
        click.option("--fast-multiplier", type=int, default=None),
        click.option("--init", type=click.Choice(["random", "kmeanspp", "topk"]), default=None),
        click.option("--max-iters", type=int, default=None),
        click.option("--rel-tolerance", type=float, default=None),
        click.option("--learning-rate", type=float, default=None),
        click.option("--batch-size", type=int, default=None),
        click.option("--holdout-fraction", type=float, default=None),
        click.option("--init-std", type=float, default=None),
        click.option("--cumulative-frequencies/--per-segment-frequencies", "cumulative_frequencies", default=None),
        click.option("--compress-every", type=int, default=None),
        click.option("--no-compress", "no_compress", is_flag=True, default=None),
        click.option("--threads", type=int, default=None),
        click.option("--data", type=click.Path(), default=None),
        click.option("--out", type=click.Path(), default=None),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build(config_file, **overrides):
    return build_config(config_file, **overrides)


@click.group()
def main():
    """Similarity-aware embedding table compression toolkit."""


@main.command()
@config_options
@cli_errors
def gen(config_file, **overrides):
    """Generate a synthetic segment stream into --out."""
    cfg = _build(config_file, **overrides)
    save_stream(cfg.stream_config(), cfg.out)
    click.echo(f"wrote {cfg.segments} segments to {cfg.out}")


@main.command()
@config_options
@cli_errors
def pipeline(config_file, **overrides):
    """Run train -> compress -> retrain per segment over --data."""
    cfg = _build(config_file, **overrides)
    result = run_pipeline(cfg, progress=click.echo)
    click.echo(f"metrics: {result.metrics_path}")


@main.command()
@config_options
@click.option("--from-checkpoint", "from_checkpoint", type=click.Path(), default=None)
@cli_errors
def train(config_file, from_checkpoint, **overrides):
    """Initial training only: one epoch per segment, no compression."""
    cfg = _build(config_file, **overrides)
    data_dir = Path(cfg.data)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = read_manifest(data_dir)
    predictor = load_checkpoint(from_checkpoint) if from_checkpoint else new_predictor(meta, cfg)
    if not isinstance(predictor.embeddings, FieldedEmbeddingModel):
        raise ConfigError("train expects an uncompressed checkpoint")

    with open(out_dir / "metrics.log", "w") as log:
        for entry in meta.segment_entries[: cfg.segments]:
            seg = load_segment(data_dir, entry, list(range(meta.num_fields)))
            ensure_capacity(predictor, seg.vocab_sizes, cfg.init_std, cfg.seed)
            if not cfg.cumulative_frequencies:
                for f in predictor.embeddings.fields.values():
                    f.frequencies[:] = 0
            start = time.perf_counter()
            train_epoch(predictor, seg.batch, derive_seed(cfg.seed, seg.segment_id, 1), cfg.holdout_fraction)
            wall_ms = (time.perf_counter() - start) * 1e3
            _, holdout = split_holdout(seg.batch, cfg.holdout_fraction)
            auc_value, loss = evaluate(predictor, holdout)
            row = MetricsRow(seg.segment_id, "train", loss, auc_value if auc_value is not None else float("nan"), wall_ms)
            log.write(row.format() + "\n")
            click.echo(row.format())

    ckpt = out_dir / "baseline.ckpt"
    save_checkpoint(predictor, ckpt)
    click.echo(f"checkpoint: {ckpt}")


@main.command()
@config_options
@click.option("--checkpoint", type=click.Path(), required=True)
@cli_errors
def compress(config_file, checkpoint, **overrides):
    """Compress the embedding model of a trained checkpoint."""
    cfg = _build(config_file, **overrides)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    predictor = load_checkpoint(checkpoint)
    if not isinstance(predictor.embeddings, FieldedEmbeddingModel):
        raise ConfigError("compress expects an uncompressed checkpoint")
    compressed, report = compress_model(
        predictor.embeddings, cfg.compression_config(), threads=cfg.threads
    )
    retrainer = predictor.with_compressed(compressed)
    save_checkpoint(retrainer, out_dir / "compressed.ckpt")
    (out_dir / "compress_report.txt").write_text(format_report_table(report))
    (out_dir / "compress_report.kv").write_text(format_report_records(report))
    click.echo(format_report_table(report), nl=False)
    click.echo(f"checkpoint: {out_dir / 'compressed.ckpt'}")


@main.command()
@config_options
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--segment", "segment_id", type=int, required=True)
@cli_errors
def retrain(config_file, checkpoint, segment_id, **overrides):
    """Retrain a compressed checkpoint on one segment's data."""
    cfg = _build(config_file, **overrides)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = read_manifest(cfg.data)
    entry = next((e for e in meta.segment_entries if e["id"] == segment_id), None)
    if entry is None:
        raise FileNotFoundError(f"segment {segment_id} not found under {cfg.data}")
    predictor = load_checkpoint(checkpoint)
    if not isinstance(predictor.embeddings, CompressedModel):
        raise ConfigError("retrain expects a compressed checkpoint")
    seg = load_segment(cfg.data, entry, list(range(meta.num_fields)))

    start = time.perf_counter()
    retrain_epoch(
        predictor, seg.batch, derive_seed(cfg.seed, segment_id, 1), cfg.holdout_fraction, cfg.batch_size
    )
    wall_ms = (time.perf_counter() - start) * 1e3
    _, holdout = split_holdout(seg.batch, cfg.holdout_fraction)
    auc_value, loss = evaluate(predictor, holdout)
    row = MetricsRow(segment_id, "retrain", loss, auc_value if auc_value is not None else float("nan"), wall_ms)
    with open(out_dir / "metrics.log", "a") as log:
        log.write(row.format() + "\n")
    click.echo(row.format())
    save_checkpoint(predictor, out_dir / "retrained.ckpt")
    click.echo(f"checkpoint: {out_dir / 'retrained.ckpt'}")


@main.command("eval")
@config_options
@click.option("--checkpoint", type=click.Path(), required=True)
@click.option("--segment", "segment_id", type=int, required=True)
@click.option("--slice", "eval_slice", type=click.Choice(["holdout", "all"]), default="holdout")
@cli_errors
def eval_cmd(config_file, checkpoint, segment_id, eval_slice, **overrides):
    """Evaluate a checkpoint on one segment (held-out tail by default)."""
    cfg = _build(config_file, **overrides)
    meta = read_manifest(cfg.data)
    entry = next((e for e in meta.segment_entries if e["id"] == segment_id), None)
    if entry is None:
        raise FileNotFoundError(f"segment {segment_id} not found under {cfg.data}")
    predictor = load_checkpoint(checkpoint)
    seg = load_segment(cfg.data, entry, list(range(meta.num_fields)))
    batch = seg.batch
    if eval_slice == "holdout":
        _, batch = split_holdout(seg.batch, cfg.holdout_fraction)
    auc_value, loss = evaluate(predictor, batch)
    auc_str = f"{auc_value:.12g}" if auc_value is not None else "nan"
    click.echo(f"segment={segment_id} slice={eval_slice} auc={auc_str} log_loss={loss:.12g}")


@main.command()
@click.argument("run_dirs", nargs=-1, type=click.Path(), required=True)
@cli_errors
def report(run_dirs):
    """Render Before/After tables for one run, or a comparison for several."""
    click.echo(render_run_table(run_dirs[0]), nl=False)
    if len(run_dirs) > 1:
        click.echo("")
        click.echo(render_comparison(list(run_dirs)), nl=False)


if __name__ == "__main__":
    main()
