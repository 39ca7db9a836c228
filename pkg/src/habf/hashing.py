"""The global hash family ``H`` and its two evaluation modes.

Every member of the family is the same strong base hash (XXH3-64 over the
key bytes) post-mixed with a per-id 64-bit seed.  The key bytes are hashed
once per key; ``digest`` exposes that value so callers that evaluate many
ids for one key can reuse it.

Range reduction is multiply-shift, ``(h * n) >> 64``, which is free of the
modulo bias that ``h % n`` has for non power-of-two ``n``.  HashExpressor
cell indices use the same value rotated by 32 bits, so a key's cell for
id ``h`` is not a monotone function of its Bloom bit for ``h``.

In ``"double"`` mode id ``j`` is simulated as ``g_{j-1} = h1 + (j-1)*h2``
(mod range), with ``h1``/``h2`` the seeded members 1 and 2.
"""

from __future__ import annotations

from array import array
from typing import Callable, Iterable, Sequence

from ._backend import kernels
from .errors import ConfigurationError, InvalidHashIdError

MODES = ("seeded", "double")

Key = bytes | str


def as_bytes(key: Key) -> bytes:
    if isinstance(key, bytes):
        return key
    if isinstance(key, str):
        return key.encode("utf-8")
    if isinstance(key, (bytearray, memoryview)):
        return bytes(key)
    raise TypeError(f"keys must be bytes or str, not {type(key).__name__}")


class HashFamily:
    """Ordered family of ``size`` hash functions with ids ``1..size``.

    Immutable after construction.  ``seeds[0]`` is reserved for the
    HashExpressor entry function ``f``, which is not a member of ``H``.

    ``digest_fn`` replaces the XXH3 base hash with any callable mapping key
    bytes to a 64-bit integer (e.g. CityHash64 or MurmurHash from a third
    party package).  Families with a custom digest cannot be serialized.
    """

    __slots__ = ("seed", "size", "mode", "digest_fn", "seeds", "_mode_code")

    def __init__(
        self,
        seed: int,
        size: int,
        mode: str = "seeded",
        digest_fn: Callable[[bytes], int] | None = None,
    ) -> None:
        if not isinstance(size, int) or size < 2:
            raise ConfigurationError(f"family size must be >= 2, got {size!r}")
        if size > 0xFFFF:
            raise ConfigurationError(f"family size {size} exceeds 65535")
        if mode not in MODES:
            raise ConfigurationError(f"unknown family mode {mode!r}")
        self.seed = seed & kernels.MASK64
        self.size = size
        self.mode = mode
        self.digest_fn = digest_fn
        self.seeds = array("Q", [kernels.derive_seed(self.seed, i) for i in range(size + 1)])
        self._mode_code = MODES.index(mode)

    def __repr__(self) -> str:
        return f"HashFamily(seed={self.seed}, size={self.size}, mode={self.mode!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HashFamily):
            return NotImplemented
        return (self.seed, self.size, self.mode, self.digest_fn) == (
            other.seed,
            other.size,
            other.mode,
            other.digest_fn,
        )

    def __hash__(self) -> int:
        return hash((self.seed, self.size, self.mode))

    def with_mode(self, mode: str) -> "HashFamily":
        return HashFamily(self.seed, self.size, mode, self.digest_fn)

    @property
    def ids(self) -> range:
        return range(1, self.size + 1)

    def check_id(self, hid: int) -> None:
        if not isinstance(hid, int) or hid < 1 or hid > self.size:
            raise InvalidHashIdError(f"hash id {hid!r} not in [1, {self.size}]")

    # -- digests -------------------------------------------------------

    def digest(self, key: Key) -> int:
        if self.digest_fn is not None:
            return self.digest_fn(as_bytes(key)) & kernels.MASK64
        return kernels.digest(as_bytes(key))

    def digests(self, keys: Iterable[Key]) -> array:
        keys = list(keys)
        if not all(type(k) is bytes for k in keys):
            keys = [as_bytes(k) for k in keys]
        if self.digest_fn is not None:
            return array("Q", [self.digest_fn(k) & kernels.MASK64 for k in keys])
        return kernels.digest_many(keys)

    # -- evaluation ----------------------------------------------------

    def value(self, hid: int, key: Key) -> int:
        """Raw 64-bit output of seeded member ``hid`` (or ``f`` for 0)."""
        if hid != 0:
            self.check_id(hid)
        return kernels.hash_value(self.digest(key), self.seeds[hid])

    def eval(self, hid: int, key: Key, range_: int) -> int:
        """Index in ``[0, range_)`` of hash function ``hid`` applied to ``key``."""
        self.check_id(hid)
        if range_ < 1:
            raise ConfigurationError(f"range must be >= 1, got {range_}")
        return self.position(self.digest(key), hid, range_)

    def position(self, dg: int, hid: int, n: int) -> int:
        return kernels.locate(dg, hid, n, False, self._mode_code, self.seeds, self.size)

    def cell(self, dg: int, hid: int, n: int) -> int:
        return kernels.locate(dg, hid, n, True, self._mode_code, self.seeds, self.size)

    def positions(self, digests: array, ids: Sequence[int], n: int, cell: bool = False) -> array:
        """Row-major ``len(digests) x len(ids)`` array of indices."""
        return kernels.positions(digests, ids, n, cell, self._mode_code, self.seeds, self.size)

    def double_hash_indices(self, key: Key, range_: int, count: int) -> list[int]:
        """``[(h1 + i*h2) mod range_ for i in range(count)]`` over seeded ids 1, 2."""
        if count < 1:
            raise ConfigurationError(f"count must be >= 1, got {count}")
        if range_ < 1:
            raise ConfigurationError(f"range must be >= 1, got {range_}")
        dg = self.digest(key)
        h1 = kernels.locate(dg, 1, range_, False, 0, self.seeds, self.size)
        h2 = kernels.locate(dg, 2, range_, False, 0, self.seeds, self.size)
        return [(h1 + i * h2) % range_ for i in range(count)]


def make_family(family_seed: int, size: int, mode: str = "seeded") -> HashFamily:
    return HashFamily(family_seed, size, mode)


def double_hash_indices(family: HashFamily, key: Key, range_: int, count: int) -> list[int]:
    return family.double_hash_indices(key, range_, count)


def max_family_size(cell_width: int) -> int:
    """Number of distinct ids a cell of ``cell_width`` bits can store."""
    return (1 << (cell_width - 1)) - 1
