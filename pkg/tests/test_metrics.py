import numpy as np
import pytest

from fmfusion.errors import MetricError
from fmfusion.metrics import compute_eer, eer_from_scores, roc_points

from oracles import brute_force_eer, random_score_set


# ---------------------------------------------------------------------------
# roc_points


def test_roc_counts_match_manual_recount():
    rng = np.random.default_rng(42)
    scores, labels = random_score_set(rng)
    curve = roc_points(scores, labels)
    real = scores[labels == 0]
    fake = scores[labels == 1]
    for t, far, frr in zip(curve.thresholds, curve.far, curve.frr):
        assert far == np.count_nonzero(real >= t) / real.size
        assert frr == np.count_nonzero(fake < t) / fake.size


def test_roc_endpoints_and_monotonicity():
    rng = np.random.default_rng(1)
    for _ in range(25):
        scores, labels = random_score_set(rng)
        c = roc_points(scores, labels)
        assert c.thresholds[0] == -np.inf and c.far[0] == 1.0 and c.frr[0] == 0.0
        assert c.thresholds[-1] == np.inf and c.far[-1] == 0.0 and c.frr[-1] == 1.0
        assert np.all(np.diff(c.far) <= 0)
        assert np.all(np.diff(c.frr) >= 0)
        assert len(c.thresholds) == len(np.unique(scores)) + 1


def test_roc_single_class_undefined():
    with pytest.raises(MetricError):
        roc_points([0.1, 0.9], [1, 1])


# ---------------------------------------------------------------------------
# compute_eer


def test_eer_separable_is_zero():
    eer, thr = eer_from_scores([0.1, 0.9], [0, 1])
    assert eer == 0.0
    assert 0.1 < thr < 0.9


def test_eer_all_scores_equal_is_half():
    eer, thr = eer_from_scores([0.7, 0.7, 0.7, 0.7], [0, 1, 0, 1])
    assert eer == 0.5
    assert thr == 0.7


def test_eer_three_vs_three_case_exact_third():
    scores = [0.8, 0.6, 0.4, 0.7, 0.3, 0.2]
    labels = [1, 1, 1, 0, 0, 0]
    eer, thr = eer_from_scores(scores, labels)
    assert eer == 1.0 / 3.0  # exact-tie operating point
    assert 0.4 < thr < 0.6


def test_eer_exact_tie_prefers_lowest_threshold():
    # FAR == FRR == 1/2 on a flat stretch; the first (lowest) threshold wins
    scores = [0.1, 0.2, 0.8, 0.9]
    labels = [1, 0, 1, 0]
    curve = roc_points(scores, labels)
    ties = np.nonzero(curve.far == curve.frr)[0]
    eer, thr = compute_eer(curve)
    assert eer == curve.far[ties[0]]
    assert thr == curve.thresholds[ties[0]]


def test_eer_matches_brute_force_on_many_random_sets():
    rng = np.random.default_rng(7)
    for _ in range(300):
        scores, labels = random_score_set(rng)
        got, _ = eer_from_scores(scores, labels)
        want = brute_force_eer(scores, labels)
        assert abs(got - want) < 1e-9


def test_eer_interpolation_brackets():
    rng = np.random.default_rng(9)
    checked = 0
    for _ in range(200):
        scores, labels = random_score_set(rng)
        curve = roc_points(scores, labels)
        if np.any(curve.far == curve.frr):
            continue
        eer, _ = compute_eer(curve)
        d = curve.far - curve.frr
        i = int(np.nonzero(d < 0)[0][0]) - 1
        lo = min(curve.far[i], curve.frr[i], curve.far[i + 1], curve.frr[i + 1])
        hi = max(curve.far[i], curve.frr[i], curve.far[i + 1], curve.frr[i + 1])
        assert lo <= eer <= hi
        checked += 1
    assert checked > 20


def test_eer_invariant_under_strictly_increasing_transform():
    rng = np.random.default_rng(11)
    for _ in range(100):
        scores, labels = random_score_set(rng)
        scores = np.round(scores, 6)  # well-separated values
        base, _ = eer_from_scores(scores, labels)
        affine, _ = eer_from_scores(scores * 2.0 + 1.0, labels)
        expo, _ = eer_from_scores(np.exp(scores), labels)
        assert base == affine
        assert base == expo


def test_eer_invariant_under_label_swap_and_negation():
    rng = np.random.default_rng(13)
    for _ in range(100):
        scores, labels = random_score_set(rng)
        base, _ = eer_from_scores(scores, labels)
        flipped, _ = eer_from_scores(-np.asarray(scores), 1 - np.asarray(labels))
        assert base == flipped


def test_eer_range_for_informative_scores():
    rng = np.random.default_rng(17)
    for _ in range(50):
        n = int(rng.integers(10, 80))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = 1.0 / (1.0 + np.exp(-(3.0 * (labels * 2 - 1) + rng.standard_normal(n))))
        eer, _ = eer_from_scores(scores, labels)
        assert 0.0 <= eer <= 0.5
