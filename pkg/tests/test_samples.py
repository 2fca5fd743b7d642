"""Sample containers and the length-prefixed record format."""

import io

import numpy as np
import pytest

from embcompress.samples import ABSENT, Sample, SampleBatch, read_records, write_records


class TestSample:
    def test_label_must_be_binary(self):
        with pytest.raises(ValueError):
            Sample([(0, 1)], 2)

    def test_duplicate_field_rejected(self):
        with pytest.raises(ValueError):
            Sample([(0, 1), (0, 2)], 1)


class TestSampleBatch:
    def test_from_samples_round_trip(self):
        samples = [
            Sample([(0, 3), (2, 1)], 1),
            Sample([(2, 5)], 0),
            Sample([(0, 0), (2, 0)], 1),
        ]
        batch = SampleBatch.from_samples(samples)
        assert batch.field_ids == [0, 2]
        assert len(batch) == 3
        assert batch.features[1, 0] == ABSENT
        back = batch.to_samples()
        assert [s.label for s in back] == [1, 0, 1]
        assert back[1].features == [(2, 5)]

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError):
            SampleBatch.from_samples([Sample([(9, 0)], 1)], field_ids=[0, 1])

    def test_slice_is_a_view_window(self):
        batch = SampleBatch([0], np.arange(10, dtype=np.int32)[:, None], np.zeros(10, dtype=np.uint8))
        part = batch.slice(3, 7)
        assert len(part) == 4
        assert part.features[0, 0] == 3

    def test_labels_validated(self):
        with pytest.raises(ValueError):
            SampleBatch([0], np.zeros((2, 1), dtype=np.int32), np.array([0, 3], dtype=np.uint8))


class TestRecordFormat:
    def test_round_trip_with_absent_fields(self):
        rng = np.random.default_rng(0)
        feats = rng.integers(-1, 30, (100, 4)).astype(np.int32)
        batch = SampleBatch([1, 3, 4, 8], feats, rng.integers(0, 2, 100).astype(np.uint8))
        buf = io.BytesIO()
        write_records(batch, buf)
        buf.seek(0)
        back = read_records(buf, [1, 3, 4, 8])
        assert np.array_equal(back.features, batch.features)
        assert np.array_equal(back.labels, batch.labels)

    def test_round_trip_uniform_batch(self):
        rng = np.random.default_rng(1)
        feats = rng.integers(0, 1000, (500, 6)).astype(np.int32)
        batch = SampleBatch(list(range(6)), feats, rng.integers(0, 2, 500).astype(np.uint8))
        buf = io.BytesIO()
        write_records(batch, buf)
        buf.seek(0)
        back = read_records(buf, list(range(6)))
        assert np.array_equal(back.features, batch.features)
        assert np.array_equal(back.labels, batch.labels)

    def test_empty_file_is_empty_batch(self):
        back = read_records(io.BytesIO(b""), [0, 1])
        assert len(back) == 0

    def test_truncated_record_detected(self):
        batch = SampleBatch([0], np.zeros((2, 1), dtype=np.int32), np.zeros(2, dtype=np.uint8))
        buf = io.BytesIO()
        write_records(batch, buf)
        data = buf.getvalue()
        with pytest.raises(ValueError):
            read_records(io.BytesIO(data[:-3]), [0])

    def test_unknown_field_in_record_rejected(self):
        batch = SampleBatch([5], np.zeros((1, 1), dtype=np.int32), np.zeros(1, dtype=np.uint8))
        buf = io.BytesIO()
        write_records(batch, buf)
        buf.seek(0)
        with pytest.raises(ValueError):
            read_records(buf, [0])
