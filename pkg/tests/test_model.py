"""Lookup paths, footprint arithmetic, and model invariants."""

import numpy as np
import pytest

from embcompress.model import (
    Codebook,
    CompressedModel,
    Field,
    FieldedEmbeddingModel,
    MaskTable,
    lookup_compressed,
    lookup_uncompressed,
    mask_width,
    memory_footprint,
)


def make_field(field_id=0, n=10, l=4, seed=0):
    rng = np.random.default_rng(seed)
    return Field(field_id, rng.normal(size=(n, l)), rng.integers(0, 50, n))


class TestLookupUncompressed:
    def test_direct_row_indexing(self):
        f = Field(0, np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1, 1]))
        assert lookup_uncompressed(f, 1).tolist() == [3.0, 4.0]

    def test_zero_vector_identity(self):
        f = Field(0, np.zeros((1, 3)), np.array([0]))
        assert lookup_uncompressed(f, 0).tolist() == [0.0, 0.0, 0.0]

    def test_matches_row_scan_oracle(self):
        f = make_field(n=10, l=4, seed=1)
        stored_rows = [f.vectors[i].copy() for i in range(10)]  # row-by-row scan
        for i in range(10):
            assert np.array_equal(lookup_uncompressed(f, i), stored_rows[i])

    def test_out_of_range_raises(self):
        f = make_field(n=5)
        with pytest.raises(IndexError):
            lookup_uncompressed(f, 5)
        with pytest.raises(IndexError):
            lookup_uncompressed(f, -1)

    def test_returns_a_copy(self):
        f = make_field()
        v = lookup_uncompressed(f, 0)
        v[0] = 999.0
        assert f.vectors[0, 0] != 999.0


class TestLookupCompressed:
    def test_index_chase(self):
        cb = Codebook(0, np.array([[5.0, 5.0], [7.0, 7.0]]))
        mt = MaskTable(0, np.array([1, 0, 1], dtype=np.uint8))
        assert lookup_compressed(cb, mt, 0).tolist() == [7.0, 7.0]

    def test_constant_map(self):
        cb = Codebook(0, np.array([[2.5, 0.0], [9.0, 9.0]]))
        mt = MaskTable(0, np.zeros(5, dtype=np.uint8))
        for feat in range(5):
            assert lookup_compressed(cb, mt, feat).tolist() == [2.5, 0.0]

    def test_field_id_mismatch_raises(self):
        cb = Codebook(0, np.ones((2, 2)))
        mt = MaskTable(1, np.zeros(3, dtype=np.uint8))
        with pytest.raises(ValueError):
            lookup_compressed(cb, mt, 0)

    def test_out_of_range_raises(self):
        cb = Codebook(0, np.ones((2, 2)))
        mt = MaskTable(0, np.zeros(3, dtype=np.uint8))
        with pytest.raises(IndexError):
            lookup_compressed(cb, mt, 3)

    def test_bit_identical_to_centroid(self):
        rng = np.random.default_rng(2)
        cb = Codebook(0, rng.normal(size=(7, 5)))
        mt = MaskTable(0, rng.integers(0, 7, 40).astype(np.uint8))
        for feat in range(40):
            got = lookup_compressed(cb, mt, feat)
            want = cb.centroids[mt.masks[feat]]
            assert np.array_equal(got, want)  # no copy drift


class TestMemoryFootprint:
    def test_uncompressed_accounting(self):
        # n*l*bytes_per_component; length-9 vectors cost 36 bytes each
        small = FieldedEmbeddingModel({0: Field(0, np.zeros((3, 9)), np.zeros(3, dtype=np.int64))})
        assert memory_footprint(small) == 3 * 36

    def test_production_scale_arithmetic(self):
        # footprint formulas at a row count too large to materialize:
        # 1.24e8 length-9 vectors before, 1.04e6 retained after, 1-byte masks
        n, k, l = 124_000_000, 1_040_000, 9
        assert n * l * 4 == 4_464_000_000
        assert n * 1 + k * l * 4 == 161_440_000

    def test_empty_model_is_zero(self):
        assert memory_footprint(FieldedEmbeddingModel({})) == 0
        assert memory_footprint(CompressedModel({}, {})) == 0

    def test_compressed_field_accounting(self):
        rng = np.random.default_rng(0)
        n, k, l = 1000, 4, 6
        cb = Codebook(0, rng.normal(size=(k, l)))
        mt = MaskTable(0, rng.integers(0, k, n).astype(np.uint8))
        cm = CompressedModel({0: (cb, mt)}, {})
        assert memory_footprint(cm) == n * 1 + k * l * 4
        assert memory_footprint(cm) < n * l * 4  # strictly smaller than uncompressed
        assert memory_footprint(cm, bytes_per_mask=2) == n * 2 + k * l * 4

    def test_passthrough_counted_uncompressed(self):
        f = make_field(field_id=3, n=20, l=4)
        cm = CompressedModel({}, {3: f})
        assert memory_footprint(cm) == 20 * 4 * 4

    def test_reduction_boundary(self):
        # compressed footprint n*1 + k*l*4 beats n*l*4 exactly when
        # k < n*(4l - 1)/(4l)
        rng = np.random.default_rng(1)
        for n, l, k in [(100, 2, 10), (100, 2, 87), (100, 2, 88), (64, 1, 47), (64, 1, 48)]:
            cb = Codebook(0, rng.normal(size=(k, l)))
            mt = MaskTable(0, rng.integers(0, k, n).astype(np.uint8))
            cm = CompressedModel({0: (cb, mt)}, {})
            footprint = memory_footprint(cm)
            assert footprint == n * 1 + k * l * 4
            if k < n * (4 * l - 1) / (4 * l):
                assert footprint < n * l * 4
            else:
                assert footprint >= n * l * 4

    def test_mask_width_rule(self):
        assert mask_width(1) == 1
        assert mask_width(256) == 1
        assert mask_width(257) == 2
        assert mask_width(65536) == 2
        with pytest.raises(ValueError):
            mask_width(65537)

    def test_oversized_codebook_rejected(self):
        with pytest.raises(ValueError):
            Codebook(0, np.zeros((65537, 1)))


class TestValidation:
    def test_frequency_length_mismatch(self):
        with pytest.raises(ValueError):
            Field(0, np.zeros((3, 2)), np.zeros(4, dtype=np.int64))

    def test_nonfinite_vectors_rejected(self):
        bad = np.zeros((2, 2))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            Field(0, bad, np.zeros(2, dtype=np.int64))

    def test_overlapping_field_ids_rejected(self):
        f = make_field(field_id=1)
        cb = Codebook(1, np.ones((2, 4)))
        mt = MaskTable(1, np.zeros(10, dtype=np.uint8))
        with pytest.raises(ValueError):
            CompressedModel({1: (cb, mt)}, {1: f})

    def test_mask_exceeding_codebook_rejected(self):
        cb = Codebook(0, np.ones((2, 3)))
        mt = MaskTable(0, np.array([0, 1, 2], dtype=np.uint8))
        with pytest.raises(ValueError):
            CompressedModel({0: (cb, mt)}, {})
