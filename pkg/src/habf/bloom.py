"""Standard Bloom filter with per-call hash selection and single-bit access."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from ._backend import kernels
from .errors import ArityError, ConfigurationError
from .hashing import HashFamily, Key, make_family


class BloomFilter:
    """An ``m``-bit array probed by ``k`` functions drawn from a shared family.

    ``h0`` is the default function set.  ``insert_with``/``contains_with``
    take an explicit set so a key can be mapped by customized functions.
    """

    def __init__(
        self,
        m: int,
        k: int,
        h0: Sequence[int] | None = None,
        family: HashFamily | None = None,
        family_seed: int = 0,
    ) -> None:
        if not isinstance(k, int) or k < 1:
            raise ConfigurationError(f"k must be >= 1, got {k!r}")
        if not isinstance(m, int) or m < k:
            raise ConfigurationError(f"m must be >= k, got m={m!r}, k={k}")
        h0 = list(range(1, k + 1)) if h0 is None else list(h0)
        if len(h0) != k:
            raise ConfigurationError(f"h0 must list {k} ids, got {len(h0)}")
        if len(set(h0)) != k:
            raise ConfigurationError(f"h0 ids must be distinct, got {h0}")
        if family is None:
            family = make_family(family_seed, max(7, k + 1, max(h0)))
        for hid in h0:
            family.check_id(hid)
        self.m = m
        self.k = k
        self.h0 = tuple(h0)
        self.family = family
        self.bits = bytearray((m + 7) // 8)

    def __repr__(self) -> str:
        return f"BloomFilter(m={self.m}, k={self.k}, h0={list(self.h0)}, ones={self.popcount()})"

    def _phi(self, phi: Sequence[int] | None) -> Sequence[int]:
        if phi is None:
            return self.h0
        if len(phi) != self.k:
            raise ArityError(f"expected {self.k} hash ids, got {len(phi)}")
        return phi

    # -- single keys ---------------------------------------------------

    def positions(self, key: Key, phi: Sequence[int] | None = None) -> list[int]:
        phi = self._phi(phi)
        for hid in phi:
            self.family.check_id(hid)
        dg = self.family.digest(key)
        return [self.family.position(dg, hid, self.m) for hid in phi]

    def insert_with(self, key: Key, phi: Sequence[int] | None = None) -> None:
        bits = self.bits
        for p in self.positions(key, phi):
            bits[p >> 3] |= 1 << (p & 7)

    def contains_with(self, key: Key, phi: Sequence[int] | None = None) -> bool:
        bits = self.bits
        return all((bits[p >> 3] >> (p & 7)) & 1 for p in self.positions(key, phi))

    def insert(self, key: Key) -> None:
        self.insert_with(key, None)

    def __contains__(self, key: Key) -> bool:
        return self.contains_with(key, None)

    def contains_digest(self, dg: int, phi: Sequence[int]) -> bool:
        """Unchecked membership test on a precomputed digest."""
        bits, fam, m = self.bits, self.family, self.m
        for hid in phi:
            p = fam.position(dg, hid, m)
            if not (bits[p >> 3] >> (p & 7)) & 1:
                return False
        return True

    # -- batches -------------------------------------------------------

    def insert_many(self, keys: Iterable[Key]) -> None:
        pos = self.family.positions(self.family.digests(keys), self.h0, self.m)
        kernels.set_bits(self.bits, pos)

    def contains_many(self, keys: Iterable[Key]) -> list[bool]:
        pos = self.family.positions(self.family.digests(keys), self.h0, self.m)
        return [bool(x) for x in kernels.test_rows(self.bits, pos, self.k)]

    # -- bit access ----------------------------------------------------

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.m:
            raise IndexError(f"bit index {i} out of range [0, {self.m})")

    def get_bit(self, i: int) -> int:
        self._check_index(i)
        return (self.bits[i >> 3] >> (i & 7)) & 1

    def set_bit(self, i: int) -> None:
        self._check_index(i)
        self.bits[i >> 3] |= 1 << (i & 7)

    def clear_bit(self, i: int) -> None:
        self._check_index(i)
        self.bits[i >> 3] &= ~(1 << (i & 7)) & 0xFF

    def popcount(self) -> int:
        return kernels.popcount(self.bits)

    def zero_fraction(self) -> float:
        return 1.0 - self.popcount() / self.m


def new_bloom(m: int, k: int, h0: Sequence[int], family: HashFamily | None = None) -> BloomFilter:
    return BloomFilter(m, k, h0, family)


def theoretical_fpr(k: int, b: float) -> float:
    """``(1 - e^{-k/b})^k`` for ``k`` functions at ``b`` bits per key."""
    if k < 1 or b <= 0:
        raise ConfigurationError(f"need k >= 1 and b > 0, got k={k}, b={b}")
    return (-math.expm1(-k / b)) ** k


def optimal_k(b: float) -> int:
    if b <= 0:
        raise ConfigurationError(f"b must be positive, got {b}")
    return max(1, round(math.log(2) * b))
