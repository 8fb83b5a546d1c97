import numpy as np
import pytest

from fmfusion.rng import Rng


def test_same_seed_same_stream():
    a = Rng(123).uniform(1000)
    b = Rng(123).uniform(1000)
    assert np.array_equal(a, b)


def test_seed_position_reconstruction():
    r = Rng(99)
    r.uniform(37)
    r.normal(11)  # consumes 12 raw words (odd n rounds up to a pair)
    tail = r.uniform(50)
    replay = Rng(99, position=r.position - 50)
    assert np.array_equal(replay.uniform(50), tail)


def test_position_counts_raw_words():
    r = Rng(5)
    r.uniform(10)
    assert r.position == 10
    r.normal(3)
    assert r.position == 14  # two words per Box-Muller pair


def test_uniform_range_and_normal_moments():
    r = Rng(2024)
    u = r.uniform(200_000)
    assert u.min() > 0.0 and u.max() <= 1.0
    z = r.normal(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_permutation_is_a_permutation_and_deterministic():
    p1 = Rng(7).permutation(500)
    p2 = Rng(7).permutation(500)
    assert np.array_equal(p1, p2)
    assert np.array_equal(np.sort(p1), np.arange(500))
    assert not np.array_equal(p1, np.arange(500))


def test_different_seeds_differ():
    assert not np.array_equal(Rng(1).uniform(64), Rng(2).uniform(64))


def test_clone_continues_identically():
    r = Rng(77)
    r.uniform(23)
    c = r.clone()
    assert np.array_equal(r.uniform(10), c.uniform(10))


def test_seed_validation():
    with pytest.raises(ValueError):
        Rng(-1)
    with pytest.raises(ValueError):
        Rng(2 ** 64)
