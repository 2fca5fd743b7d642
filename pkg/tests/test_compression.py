"""Eligibility, fast clustering, codebook/mask construction, ratio accounting."""

import numpy as np
import pytest

from embcompress.clustering import ClusterConfig, assign_nearest, kmeans
from embcompress.compression import (
    CompressionConfig,
    FieldReport,
    build_report,
    compress_field,
    compress_model,
    compression_ratio,
    format_report_records,
    format_report_table,
    parse_report_records,
    select_eligible_fields,
)
from embcompress.model import Field, FieldedEmbeddingModel, lookup_compressed, memory_footprint


def make_field(field_id, n, l=4, seed=0, zipf=1.3):
    rng = np.random.default_rng(seed)
    return Field(field_id, rng.normal(size=(n, l)), rng.zipf(zipf, n))


def small_config(k, seed=0, **kwargs):
    defaults = dict(k=k, cluster_config=ClusterConfig(k=k, seed=seed))
    defaults.update(kwargs)
    return CompressionConfig(**defaults)


class TestEligibility:
    def test_threshold_selects_large_fields(self):
        model = FieldedEmbeddingModel(
            {
                0: make_field(0, 1_000, seed=1),
                1: make_field(1, 10_000, seed=2),
                2: make_field(2, 100_000, l=2, seed=3),
            }
        )
        cfg = small_config(k=100)
        assert select_eligible_fields(model, cfg) == {1, 2}

    def test_oversized_k_selects_nothing(self):
        model = FieldedEmbeddingModel({0: make_field(0, 500, seed=4)})
        assert select_eligible_fields(model, small_config(k=100)) == set()

    def test_boundary_is_inclusive(self):
        # threshold is "at least" eligibility_multiplier * k
        model = FieldedEmbeddingModel({0: make_field(0, 300, seed=5)})
        cfg = small_config(k=3)
        assert cfg.eligibility_threshold == 300
        assert select_eligible_fields(model, cfg) == {0}
        smaller = FieldedEmbeddingModel({0: make_field(0, 299, seed=5)})
        assert select_eligible_fields(smaller, cfg) == set()


class TestCompressField:
    def test_cutoff_equal_to_n_clusters_everything(self):
        f = make_field(0, 400, seed=6)
        cfg = small_config(k=4, fast_multiplier=100, fast_enabled=True)
        assert cfg.fast_cutoff == 400
        _, masks, entry = compress_field(f, cfg)
        assert entry.clustered_count == 400
        assert masks.num_features == 400

    def test_fast_equals_full_when_head_covers_all(self):
        f = make_field(0, 400, seed=7)
        base = dict(k=4, eligibility_multiplier=100, fast_multiplier=100)
        fast_cfg = small_config(seed=3, fast_enabled=True, **base)
        full_cfg = small_config(seed=3, fast_enabled=False, **base)
        cb_fast, mt_fast, _ = compress_field(f, fast_cfg)
        cb_full, mt_full, _ = compress_field(f, full_cfg)
        assert np.array_equal(cb_fast.centroids, cb_full.centroids)
        assert np.array_equal(mt_fast.masks, mt_full.masks)

    def test_head_and_tail_split(self):
        n, k, fast_mult = 5_000, 10, 20
        f = make_field(0, n, seed=8)
        cfg = small_config(k=k, eligibility_multiplier=100, fast_multiplier=fast_mult, seed=5)
        cb, mt, entry = compress_field(f, cfg)
        assert entry.clustered_count == fast_mult * k == 200
        assert mt.num_features == n
        assert int(mt.masks.max()) < k

        # head masks equal the k-means assignments of the head vectors
        order = np.argsort(-f.frequencies, kind="stable")
        head = order[:200]
        cluster_cfg = ClusterConfig(k=k, seed=cfg.cluster_config.seed ^ f.field_id)
        expect = kmeans(f.vectors[head], f.frequencies[head], cluster_cfg)
        assert np.array_equal(mt.masks[head], expect.assignments.astype(mt.masks.dtype))

        # sampled tail masks equal the exhaustive nearest centroid
        tail = order[200:]
        rng = np.random.default_rng(0)
        sample = rng.choice(tail, size=1000, replace=False)
        for feat in sample:
            d2 = np.sum((cb.centroids - f.vectors[feat]) ** 2, axis=1)
            assert mt.masks[feat] == int(np.argmin(d2))

    def test_full_scale_head_tail_split(self):
        # 10^5 features at k=100: exactly 10^4 clustered, 9x10^4 tail-assigned
        n, k = 100_000, 100
        rng = np.random.default_rng(40)
        f = Field(0, rng.normal(size=(n, 5)), rng.zipf(1.2, n))
        cfg = small_config(k=k, seed=11)
        cb, mt, entry = compress_field(f, cfg)
        assert entry.clustered_count == 10_000
        order = np.argsort(-f.frequencies, kind="stable")
        tail = order[10_000:]
        assert tail.size == 90_000
        sample = rng.choice(tail, size=1_000, replace=False)
        for feat in sample:
            d2 = np.sum((cb.centroids - f.vectors[feat]) ** 2, axis=1)
            assert mt.masks[feat] == int(np.argmin(d2))

    def test_tail_assignment_matches_assign_nearest(self):
        f = make_field(0, 3_000, seed=9)
        cfg = small_config(k=6, eligibility_multiplier=100, fast_multiplier=50, seed=2)
        cb, mt, _ = compress_field(f, cfg)
        order = np.argsort(-f.frequencies, kind="stable")
        tail = order[300:]
        assert np.array_equal(
            mt.masks[tail].astype(np.int64), assign_nearest(f.vectors[tail], cb.centroids)
        )

    def test_ineligible_field_rejected(self):
        f = make_field(0, 50, seed=10)
        with pytest.raises(ValueError):
            compress_field(f, small_config(k=100))

    def test_every_feature_gets_exactly_one_mask(self):
        f = make_field(0, 1_000, seed=11)
        cfg = small_config(k=10, fast_multiplier=10, seed=1)
        cb, mt, _ = compress_field(f, cfg)
        assert mt.masks.shape == (1_000,)
        assert int(mt.masks.max()) < cb.k

    def test_lookup_resolves_to_assigned_centroid(self):
        f = make_field(0, 600, seed=12)
        cfg = small_config(k=6, fast_multiplier=50, seed=4)
        cb, mt, _ = compress_field(f, cfg)
        for feat in range(0, 600, 37):
            assert np.array_equal(lookup_compressed(cb, mt, feat), cb.centroids[mt.masks[feat]])


class TestCompressModel:
    def test_noop_when_nothing_eligible(self):
        model = FieldedEmbeddingModel({0: make_field(0, 50, seed=13), 1: make_field(1, 80, seed=14)})
        compressed, report = compress_model(model, small_config(k=100))
        assert not compressed.compressed_fields
        assert set(compressed.passthrough_fields) == {0, 1}
        assert report.ratio == 1.0
        assert np.array_equal(compressed.passthrough_fields[0].vectors, model.fields[0].vectors)

    def test_field_partition_and_totals(self):
        model = FieldedEmbeddingModel(
            {
                0: make_field(0, 2_000, seed=15),
                1: make_field(1, 100, seed=16),
                2: make_field(2, 3_000, seed=17),
            }
        )
        cfg = small_config(k=20, fast_multiplier=10, seed=6)
        compressed, report = compress_model(model, cfg)
        assert set(compressed.compressed_fields) == {0, 2}
        assert set(compressed.passthrough_fields) == {1}
        assert report.vectors_before == 5_100
        assert report.vectors_after == 20 + 100 + 20
        assert report.bytes_before == memory_footprint(model)
        assert report.bytes_after == memory_footprint(compressed)

    def test_threads_do_not_change_results(self):
        model = FieldedEmbeddingModel(
            {fid: make_field(fid, 1_500, seed=20 + fid) for fid in range(4)}
        )
        cfg = small_config(k=10, fast_multiplier=15, seed=8)
        one, rep_one = compress_model(model, cfg, threads=1)
        four, rep_four = compress_model(model, cfg, threads=4)
        for fid in one.compressed_fields:
            assert np.array_equal(
                one.compressed_fields[fid][0].centroids, four.compressed_fields[fid][0].centroids
            )
            assert np.array_equal(
                one.compressed_fields[fid][1].masks, four.compressed_fields[fid][1].masks
            )
        assert rep_one.ratio == rep_four.ratio

    def test_doubling_k_grows_vectors_after(self):
        model = FieldedEmbeddingModel({0: make_field(0, 50_000, l=3, seed=25)})
        cfg_a = small_config(k=100, fast_multiplier=10, seed=9)
        cfg_b = small_config(k=200, fast_multiplier=10, seed=9)
        _, rep_a = compress_model(model, cfg_a)
        _, rep_b = compress_model(model, cfg_b)
        assert rep_b.vectors_after > rep_a.vectors_after
        # independent per-field recomputation of the totals
        for rep, cfg in ((rep_a, cfg_a), (rep_b, cfg_b)):
            expect_after = sum(
                cfg.k if e.n_before >= cfg.eligibility_threshold else e.n_before
                for e in rep.entries
            )
            assert rep.vectors_after == expect_after


class TestRatio:
    def test_production_scale_arithmetic(self):
        # one aggregate entry at reported production counts, 1-byte masks
        entry = FieldReport(
            field_id=0,
            n_before=124_000_000,
            vector_len=9,
            k_after=1_040_000,
            clustered_count=0,
            objective=0.0,
            wall_ms=0.0,
        )
        report = build_report([entry], bytes_per_component=4, bytes_per_mask=1)
        assert report.bytes_before == 4_464_000_000
        assert report.bytes_after == 161_440_000
        assert compression_ratio(report) == pytest.approx(27.65, abs=0.01)

    def test_single_field_hand_arithmetic(self):
        entry = FieldReport(0, 10_000, 9, 100, 10_000, 0.0, 0.0)
        report = build_report([entry])
        assert report.bytes_before == 360_000
        assert report.bytes_after == 13_600
        assert compression_ratio(report) == pytest.approx(26.47, abs=0.005)

    def test_ratio_consistency_recomputable(self):
        rng = np.random.default_rng(30)
        entries = [
            FieldReport(i, int(rng.integers(100, 100_000)), 9, 100, 0, 0.0, 0.0)
            for i in range(10)
        ]
        report = build_report(entries, bytes_per_mask=1)
        recomputed = sum(e.bytes_before() for e in report.entries) / sum(
            e.bytes_after(bytes_per_mask=1) for e in report.entries
        )
        assert report.ratio == pytest.approx(recomputed, rel=1e-12)

    def test_eligible_field_reduction_is_at_least_hundredfold(self):
        # eligibility n >= 100k forces n/k >= 100 for every compressed field
        model = FieldedEmbeddingModel({0: make_field(0, 10_000, seed=31)})
        cfg = small_config(k=100, fast_multiplier=10, seed=3)
        _, report = compress_model(model, cfg)
        entry = report.entries[0]
        assert entry.compressed
        assert entry.n_before / entry.k_after >= 100


class TestReportSerialization:
    def build(self):
        entries = [
            FieldReport(0, 5_000, 9, 50, 500, 123.456789, 12.5),
            FieldReport(1, 80, 17, None, 0, 0.0, 0.0),
        ]
        return build_report(entries)

    def test_records_round_trip(self):
        report = self.build()
        text = format_report_records(report)
        parsed = parse_report_records(text)
        assert parsed.vectors_before == report.vectors_before
        assert parsed.vectors_after == report.vectors_after
        assert parsed.bytes_before == report.bytes_before
        assert parsed.bytes_after == report.bytes_after
        assert parsed.ratio == pytest.approx(report.ratio, rel=1e-9)
        assert [e.field_id for e in parsed.entries] == [0, 1]
        assert parsed.entries[1].k_after is None

    def test_table_has_all_columns(self):
        table = format_report_table(self.build())
        for column in ("field_id", "n_before", "k_after", "clustered_count", "objective", "wall_ms"):
            assert column in table
        assert "passthrough" in table
        assert "ratio=" in table

    def test_malformed_records_rejected(self):
        with pytest.raises(ValueError):
            parse_report_records("field field_id=0\n")  # missing keys
