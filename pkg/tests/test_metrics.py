"""AUC and log loss against brute-force oracles and closed forms."""

import math

import numpy as np
import pytest

from embcompress.metrics import auc, log_loss


def auc_pair_oracle(scores, labels):
    """O(m^2) pair count: wins + half-ties over positive x negative pairs."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


class TestAuc:
    def test_perfect_ranking(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_reversed_ranking(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0

    def test_all_ties_is_half(self):
        assert auc([0.4] * 6, [1, 0, 1, 0, 0, 1]) == 0.5

    def test_degenerate_labels_raise(self):
        with pytest.raises(ValueError):
            auc([0.1, 0.9], [1, 1])
        with pytest.raises(ValueError):
            auc([0.1, 0.9], [0, 0])

    def test_nonbinary_labels_raise(self):
        with pytest.raises(ValueError):
            auc([0.1, 0.9], [0, 2])

    def test_matches_pair_oracle_on_random_instances(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            m = int(rng.integers(2, 201))
            # coarse score grid so ties actually occur
            scores = rng.integers(0, 10, m) / 10.0
            labels = rng.integers(0, 2, m)
            if labels.sum() in (0, m):
                labels[0] = 1 - labels[0]
            assert auc(scores, labels) == pytest.approx(
                auc_pair_oracle(scores, labels), abs=1e-12
            )

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(7)
        scores = rng.random(200)
        labels = rng.integers(0, 2, 200)
        labels[0], labels[1] = 0, 1
        base = auc(scores, labels)
        assert auc(np.exp(3.0 * scores), labels) == pytest.approx(base, abs=1e-12)
        assert auc(2.0 * scores - 5.0, labels) == pytest.approx(base, abs=1e-12)

    def test_label_complement_sums_to_one(self):
        rng = np.random.default_rng(9)
        scores = rng.random(150)
        labels = rng.integers(0, 2, 150)
        labels[0], labels[1] = 0, 1
        assert auc(scores, labels) + auc(scores, 1 - labels) == pytest.approx(1.0, abs=1e-12)


class TestLogLoss:
    def test_random_prediction_on_balanced_labels(self):
        # coin-flip prediction on balanced labels costs ln 2 = 0.693
        labels = np.array([0, 1] * 50)
        assert log_loss([0.5] * 100, labels) == pytest.approx(math.log(2.0), abs=1e-12)
        assert log_loss([0.5] * 100, labels) == pytest.approx(0.693, abs=5e-4)

    def test_perfect_prediction_is_near_zero(self):
        labels = np.array([0, 1, 1, 0])
        assert log_loss(labels.astype(float), labels) <= 1e-11

    def test_hand_computed_example(self):
        # -1/2 (ln 0.8 + ln 0.6) = 0.366985 (0.3670 to 4 significant digits)
        expected = -0.5 * (math.log(0.8) + math.log(0.6))
        assert expected == pytest.approx(0.3670, abs=5e-5)
        assert log_loss([0.8, 0.4], [1, 0]) == pytest.approx(expected, rel=1e-12)

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            m = int(rng.integers(1, 200))
            probs = rng.random(m)
            labels = rng.integers(0, 2, m)
            direct = sum(
                -(y * math.log(p) + (1 - y) * math.log(1 - p)) for p, y in zip(probs, labels)
            ) / m
            assert log_loss(probs, labels) == pytest.approx(direct, rel=1e-12)

    def test_extreme_probabilities_are_clamped(self):
        loss = log_loss([0.0, 1.0], [1, 0])
        assert math.isfinite(loss)
        # both samples clamp to the 1e-12 floor (up to float cancellation)
        assert loss == pytest.approx(-math.log(1e-12), rel=1e-4)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        probs = rng.random(64)
        labels = rng.integers(0, 2, 64)
        perm = rng.permutation(64)
        assert log_loss(probs[perm], labels[perm]) == pytest.approx(
            log_loss(probs, labels), rel=1e-12
        )

    def test_empty_input_raises(self):
        with pytest.raises(ValueError):
            log_loss([], [])
