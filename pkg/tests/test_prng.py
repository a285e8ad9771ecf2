import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixelctrl.prng import (
    Key,
    fold_in,
    fold_in_many,
    index_from_words,
    key_from_seed,
    normal,
    random_bits,
    random_index,
    split,
    uniform,
    words_per_key,
)

# Golden vectors recorded from the first correct build; they freeze the
# bitstream across refactors.
GOLDEN_KEY_0 = Key(0xD2B9123EEDD0915F, 0x4831627E7DCE6036)
GOLDEN_KEY_42 = Key(0xF5069347BE28EB50, 0x3306C120DCB434CC)
GOLDEN_BITS_0 = (
    0x1789D6118975704B,
    0x57D5674490D412BB,
    0xA1997670770BE0D1,
    0xAFAF98D8129F0DBB,
)
GOLDEN_UNIFORM_0 = (
    0.09194696357868337,
    0.34310002731292877,
    0.6312479042599501,
    0.6862731483002983,
)
GOLDEN_NORMAL_0 = (
    -1.4830239295849081,
    -0.5701480166623415,
    -1.6042838671150963,
    -1.3469958196367307,
)
GOLDEN_SPLIT_0 = (
    Key(0x51D04B7680BDF9FA, 0x43C8245429F95C60),
    Key(0x4541609099B34D3F, 0xC77A7A491B96E4B6),
    Key(0xA6A363E1A772C828, 0x3A1FDCAE81F3E202),
)
GOLDEN_FOLD_0_7 = Key(0x68E3DF91C05D6C14, 0x741BFF0A50063A5F)


class TestGoldenVectors:
    def test_key_from_seed(self):
        assert key_from_seed(0) == GOLDEN_KEY_0
        assert key_from_seed(42) == GOLDEN_KEY_42

    def test_uniform_single_draw(self):
        assert float(uniform(key_from_seed(42), 1)[0]) == 0.8685604140926122

    def test_random_bits(self):
        assert tuple(int(x) for x in random_bits(GOLDEN_KEY_0, 4)) == GOLDEN_BITS_0

    def test_uniform_vector(self):
        assert tuple(float(x) for x in uniform(GOLDEN_KEY_0, 4)) == GOLDEN_UNIFORM_0

    def test_normal_vector(self):
        assert tuple(float(x) for x in normal(GOLDEN_KEY_0, 4)) == GOLDEN_NORMAL_0

    def test_split(self):
        assert tuple(split(GOLDEN_KEY_0, 3)) == GOLDEN_SPLIT_0

    def test_fold_in(self):
        assert fold_in(GOLDEN_KEY_0, 7) == GOLDEN_FOLD_0_7

    def test_random_index(self):
        assert random_index(GOLDEN_KEY_0, 1000) == 91


class TestKeyDerivation:
    def test_seed_determinism_and_distinctness(self):
        assert key_from_seed(0) == key_from_seed(0)
        assert key_from_seed(0) != key_from_seed(1)

    def test_split_returns_distinct_keys(self):
        k = key_from_seed(3)
        keys = split(k, 1000)
        assert len(keys) == 1000
        assert len(set(keys)) == 1000
        assert k not in keys

    def test_split_purity(self):
        k = key_from_seed(9)
        assert split(k, 2) == split(k, 2)

    def test_split_prefix_stable(self):
        # split(k, n)[i] must not depend on n.
        k = key_from_seed(4)
        assert split(k, 1000)[:10] == split(k, 10)

    def test_split_rejects_zero(self):
        with pytest.raises(ValueError):
            split(key_from_seed(0), 0)

    def test_fold_in_distinct_over_many_values(self):
        k = key_from_seed(5)
        hi, lo = fold_in_many(k, np.arange(100_000, dtype=np.uint64))
        assert len(set(zip(hi.tolist(), lo.tolist()))) == 100_000

    def test_fold_in_chain_deterministic(self):
        k = key_from_seed(1)
        assert fold_in(fold_in(k, 3), 7) == fold_in(fold_in(k, 3), 7)

    def test_fold_in_many_matches_scalar(self):
        k = key_from_seed(12)
        hi, lo = fold_in_many(k, np.array([0, 5, 77], dtype=np.uint64))
        for i, d in enumerate((0, 5, 77)):
            assert fold_in(k, d) == Key(int(hi[i]), int(lo[i]))

    def test_no_collisions_among_derived_keys(self):
        # 10^6 keys derived via two mechanisms share no collisions.
        k = key_from_seed(6)
        hi1, lo1 = fold_in_many(k, np.arange(500_000, dtype=np.uint64))
        seen = set(zip(hi1.tolist(), lo1.tolist()))
        keys2 = split(k, 500_000)
        seen.update((key.hi, key.lo) for key in keys2)
        assert len(seen) == 1_000_000


class TestDistributions:
    def test_uniform_mean(self):
        vals = uniform(key_from_seed(7), 100_000)
        assert abs(vals.mean() - 0.5) < 0.01

    def test_uniform_range_tiny_interval(self):
        eps = 1e-12
        vals = uniform(key_from_seed(8), 5, 2.0, 2.0 + eps)
        assert np.all(vals >= 2.0) and np.all(vals < 2.0 + eps)

    def test_uniform_rejects_bad_range(self):
        with pytest.raises(ValueError):
            uniform(key_from_seed(0), 3, 1.0, 1.0)

    def test_normal_moments(self):
        vals = normal(key_from_seed(9), 100_000)
        assert abs(vals.mean()) < 0.02
        assert abs(vals.var() - 1.0) < 0.02

    def test_random_index_histogram(self):
        k = key_from_seed(10)
        hi, lo = fold_in_many(k, np.arange(100_000, dtype=np.uint64))
        w, _ = words_per_key(hi, lo, 0)
        idx = index_from_words(w, 4)
        counts = np.bincount(idx, minlength=4)
        assert np.all(np.abs(counts - 25_000) <= 600)

    def test_random_index_single_choice(self):
        assert random_index(key_from_seed(11), 1) == 0

    def test_index_from_words_matches_random_index(self):
        keys = split(key_from_seed(13), 50)
        hi = np.array([k.hi for k in keys], dtype=np.uint64)
        lo = np.array([k.lo for k in keys], dtype=np.uint64)
        w, _ = words_per_key(hi, lo, 0)
        vec = index_from_words(w, 121)
        for i, k in enumerate(keys):
            assert random_index(k, 121) == vec[i]

    def test_split_streams_uncorrelated(self):
        a, b = split(key_from_seed(14), 2)
        xs = uniform(a, 100_000)
        ys = uniform(b, 100_000)
        r = np.corrcoef(xs, ys)[0, 1]
        assert abs(r) < 0.01


@settings(deadline=None, max_examples=50)
@given(seed=st.integers(0, 2**64 - 1), n=st.integers(1, 200))
def test_uniform_pure_and_in_range(seed, n):
    k = key_from_seed(seed)
    a = uniform(k, n, -3.0, 2.0)
    b = uniform(k, n, -3.0, 2.0)
    assert np.array_equal(a, b)
    assert np.all(a >= -3.0) and np.all(a < 2.0)


@settings(deadline=None, max_examples=50)
@given(seed=st.integers(0, 2**64 - 1), data=st.integers(0, 2**64 - 1))
def test_fold_in_changes_key(seed, data):
    k = key_from_seed(seed)
    assert fold_in(k, data) != k
