import random
from array import array

import pytest
from hypothesis import given, strategies as st

from habf.errors import ConfigurationError, InvalidHashIdError
from habf.hashing import HashFamily, double_hash_indices, make_family

CHI2_255_Q999 = 330.51974363400586  # scipy.stats.chi2.ppf(0.999, 255)


def test_same_seed_same_family():
    a, b = make_family(42, 7), make_family(42, 7)
    assert a == b
    for i in range(200):
        key = b"k%d" % i
        assert [a.eval(h, key, 1 << 20) for h in a.ids] == [b.eval(h, key, 1 << 20) for h in b.ids]


def test_different_seed_differs():
    a, b = make_family(42, 7), make_family(43, 7)
    rng = random.Random(0)
    keys = [rng.getrandbits(64).to_bytes(8, "big") for _ in range(1000)]
    assert any(a.eval(1, k, 1024) != b.eval(1, k, 1024) for k in keys)


def test_size_precondition():
    with pytest.raises(ConfigurationError):
        make_family(42, 1)


@pytest.mark.parametrize("hid", [0, 8, -1])
def test_invalid_ids(hid):
    with pytest.raises(InvalidHashIdError):
        make_family(1, 7).eval(hid, b"abc", 16)


def test_range_one_is_zero():
    assert make_family(5, 7).eval(1, "abc", 1) == 0


@given(st.binary(max_size=40), st.integers(1, 7), st.integers(1, 2**40))
def test_determinism_and_range(key, hid, n):
    fam = make_family(7, 7)
    v = fam.eval(hid, key, n)
    assert 0 <= v < n
    assert fam.eval(hid, key, n) == v


@given(st.binary(max_size=40), st.integers(1, 1 << 30), st.integers(1, 12))
def test_double_hash_recurrence(key, n, count):
    fam = make_family(3, 7)
    g = double_hash_indices(fam, key, n, count)
    h1 = fam.eval(1, key, n)
    h2 = fam.eval(2, key, n)
    assert g[0] == h1
    assert len(g) == count
    for a, b in zip(g, g[1:]):
        assert (b - a) % n == h2 % n


def test_double_hash_hand_example():
    fam = make_family(11, 7)
    for i in range(100000):
        key = b"x%d" % i
        if fam.eval(1, key, 8) == 3 and fam.eval(2, key, 8) == 5:
            assert fam.double_hash_indices(key, 8, 3) == [3, 0, 5]
            return
    pytest.fail("no key with h1=3, h2=5")


def test_double_mode_matches_recurrence():
    fam = make_family(11, 7, mode="double")
    seeded = make_family(11, 7)
    for i in range(200):
        key = b"d%d" % i
        g = seeded.double_hash_indices(key, 1000, 7)
        assert [fam.eval(h, key, 1000) for h in fam.ids] == g


def test_chi_square_uniformity():
    fam = make_family(42, 7)
    rng = random.Random(1)
    keys = [rng.getrandbits(64).to_bytes(8, "big") for _ in range(100000)]
    digests = fam.digests(keys)
    for hid in fam.ids:
        counts = [0] * 256
        for v in fam.positions(digests, [hid], 256):
            counts[v] += 1
        expected = len(keys) / 256
        stat = sum((c - expected) ** 2 / expected for c in counts)
        assert stat < CHI2_255_Q999, (hid, stat)


def test_pairwise_distinctness():
    fam = make_family(9, 7)
    rng = random.Random(2)
    keys = [rng.getrandbits(64).to_bytes(8, "big") for _ in range(10000)]
    digests = fam.digests(keys)
    cols = {h: list(fam.positions(digests, [h], 1 << 16)) for h in fam.ids}
    for a in fam.ids:
        for b in fam.ids:
            if a < b:
                same = sum(x == y for x, y in zip(cols[a], cols[b]))
                assert same < 100


def test_batch_matches_scalar():
    fam = make_family(4, 7)
    keys = [b"a", b"bb", "ccc"]
    dg = fam.digests(keys)
    pos = fam.positions(dg, [1, 3, 7], 12345)
    assert list(pos) == [fam.eval(h, k, 12345) for k in keys for h in (1, 3, 7)]


def test_custom_digest():
    import zlib

    fam = HashFamily(1, 7, digest_fn=zlib.crc32)
    assert fam.digest(b"abc") == zlib.crc32(b"abc")
    assert fam.digests([b"abc"]) == array("Q", [zlib.crc32(b"abc")])
    assert fam != make_family(1, 7)
