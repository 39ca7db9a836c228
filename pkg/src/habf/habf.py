"""The composite filter: a Bloom filter, a HashExpressor and ``H0``.

A key is reported present when its ``H0`` bits are all set, or when the
HashExpressor yields a customized function set whose bits are all set.
Positive keys whose functions were adjusted during construction are found
by the second round, so the filter has no false negatives.
"""

from __future__ import annotations

import math
import struct
from array import array
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import crc32c

from ._backend import kernels
from .bloom import BloomFilter
from .construction import BuildStats, BuildWorkspace
from .errors import ConfigurationError, FormatError, InputError
from .expressor import HashExpressor
from .hashing import HashFamily, Key, as_bytes, max_family_size

MAGIC = b"HABF"
VERSION = 1
FLAG_FAST = 0x01
_HEADER = struct.Struct("<4sBBBBIQQQ")


@dataclass(frozen=True)
class HabfConfig:
    """Space budget and construction knobs.

    ``delta`` is the share of ``total_bits`` given to the HashExpressor.
    The cell count is rounded down so that the cell array ends on a byte
    boundary; every remaining bit goes to the Bloom filter.
    """

    total_bits: int
    delta: float = 0.25
    k: int = 3
    cell_width: int = 4
    family_size: int | None = None
    family_seed: int = 0
    fast_mode: bool = False
    gamma_all_negatives: bool = False
    max_candidates_per_ck: int = 64
    debug: bool = False

    def __post_init__(self) -> None:
        if self.family_size is None:
            object.__setattr__(self, "family_size", max_family_size(self.cell_width))
        self.validate()

    @classmethod
    def for_keys(cls, n_keys: int, bits_per_key: float, **kw) -> "HabfConfig":
        return cls(total_bits=int(round(n_keys * bits_per_key)), **kw)

    def validate(self) -> None:
        if not 2 <= self.cell_width <= 8:
            raise ConfigurationError(f"cell width must be in [2, 8], got {self.cell_width}")
        if not 0 <= self.delta < 1:
            raise ConfigurationError(f"delta must be in [0, 1), got {self.delta}")
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        cap = max_family_size(self.cell_width)
        if not self.k < self.family_size <= cap:
            raise ConfigurationError(
                f"need k < |H| <= {cap} for {self.cell_width}-bit cells, "
                f"got k={self.k}, |H|={self.family_size}"
            )
        if self.k > 64:
            raise ConfigurationError("k above 64 is not supported")
        if self.max_candidates_per_ck < 1:
            raise ConfigurationError("max_candidates_per_ck must be >= 1")
        if self.delta > 0 and self.omega < 1:
            raise ConfigurationError(
                f"delta={self.delta} of {self.total_bits} bits is too small for one "
                f"{self.cell_width}-bit cell"
            )
        if self.m < self.k:
            raise ConfigurationError(f"only {self.m} Bloom bits left for k={self.k}")

    @property
    def omega(self) -> int:
        raw = math.floor(self.delta * self.total_bits / self.cell_width)
        step = 8 // math.gcd(self.cell_width, 8)
        return raw - raw % step

    @property
    def m(self) -> int:
        return self.total_bits - self.omega * self.cell_width

    @property
    def family_mode(self) -> str:
        return "double" if self.fast_mode else "seeded"

    def family(self) -> HashFamily:
        return HashFamily(self.family_seed, self.family_size, self.family_mode)


class Habf:
    def __init__(
        self,
        bloom: BloomFilter,
        expressor: HashExpressor,
        fast_mode: bool = False,
        stats: BuildStats | None = None,
    ) -> None:
        self.bloom = bloom
        self.expressor = expressor
        self.family = bloom.family
        self.k = bloom.k
        self.h0 = bloom.h0
        self.fast_mode = fast_mode
        self.build_stats = stats if stats is not None else BuildStats(t=expressor.t)

    def __repr__(self) -> str:
        return (
            f"Habf(m={self.bloom.m}, omega={self.expressor.omega}, k={self.k}, "
            f"t={self.expressor.t}, fast={self.fast_mode})"
        )

    @property
    def m(self) -> int:
        return self.bloom.m

    @property
    def omega(self) -> int:
        return self.expressor.omega

    @property
    def total_bits(self) -> int:
        return self.bloom.m + self.expressor.omega * self.expressor.cell_width

    # -- queries -------------------------------------------------------

    def query_digest(self, dg: int) -> bool:
        if self.bloom.contains_digest(dg, self.h0):
            return True
        ids, _ = self.expressor.trace(dg, self.k)
        return ids is not None and self.bloom.contains_digest(dg, ids)

    def query(self, key: Key) -> bool:
        return self.query_digest(self.family.digest(key))

    __contains__ = query

    def query_many(self, keys: Iterable[Key]) -> list[bool]:
        return [bool(x) for x in self.query_flags(self.family.digests(keys))]

    def query_flags(self, digests: array) -> bytearray:
        fam, he = self.family, self.expressor
        return kernels.query_many(
            digests, self.bloom.bits, self.bloom.m, self.h0, he.cells, he.cell_width,
            he.omega, self.k, fam._mode_code, fam.seeds, fam.size,
        )

    def first_round_flags(self, digests: array) -> bytearray:
        pos = self.family.positions(digests, self.h0, self.bloom.m)
        return kernels.test_rows(self.bloom.bits, pos, self.k)

    def expressor_false_hits(self, keys: Iterable[Key]) -> float:
        """Share of ``keys`` whose expressor walk completes (F_h on non-inserted keys)."""
        keys = list(keys)
        if not keys:
            return 0.0
        hits = 0
        for dg in self.family.digests(keys):
            ids, _ = self.expressor.trace(dg, self.k)
            hits += ids is not None
        return hits / len(keys)

    # -- persistence ---------------------------------------------------

    def serialize(self) -> bytes:
        fam = self.family
        if fam.digest_fn is not None:
            raise ConfigurationError("families with a custom digest cannot be serialized")
        he = self.expressor
        out = bytearray(
            _HEADER.pack(
                MAGIC, VERSION, FLAG_FAST if self.fast_mode else 0, self.k, he.cell_width,
                fam.size, fam.seed, self.bloom.m, he.omega,
            )
        )
        out += struct.pack(f"<{self.k}H", *self.h0)
        out += self.bloom.bits
        out += he.cells
        out += struct.pack("<Q", he.t)
        out += struct.pack("<I", crc32c.crc32c(bytes(out)))
        return bytes(out)

    @classmethod
    def deserialize(cls, data: bytes) -> "Habf":
        data = bytes(data)
        if len(data) < 4:
            raise FormatError("truncated magic", 0)
        if data[:4] != MAGIC:
            raise FormatError(f"bad magic {data[:4]!r}", 0)
        if len(data) < _HEADER.size:
            raise FormatError("truncated header", len(data))
        _, version, flags, k, width, size, seed, m, omega = _HEADER.unpack_from(data, 0)
        if version != VERSION:
            raise FormatError(f"unsupported version {version}", 4)
        if flags & ~FLAG_FAST:
            raise FormatError(f"unknown flags {flags:#x}", 5)
        off = _HEADER.size
        nbits = (m + 7) // 8
        ncells = (omega * width + 7) // 8
        need = off + 2 * k + nbits + ncells + 8 + 4
        if len(data) < need:
            raise FormatError(f"truncated payload: need {need} bytes, have {len(data)}", len(data))
        if len(data) > need:
            raise FormatError(f"{len(data) - need} trailing bytes", need)
        crc = struct.unpack_from("<I", data, need - 4)[0]
        if crc != crc32c.crc32c(data[: need - 4]):
            raise FormatError("checksum mismatch", need - 4)
        h0 = struct.unpack_from(f"<{k}H", data, off)
        off += 2 * k
        bits = bytearray(data[off : off + nbits])
        off += nbits
        cells = bytearray(data[off : off + ncells])
        off += ncells
        (t,) = struct.unpack_from("<Q", data, off)
        fast = bool(flags & FLAG_FAST)
        try:
            family = HashFamily(seed, size, "double" if fast else "seeded")
            bloom = BloomFilter(m, k, h0, family)
            he = HashExpressor(omega, width, family)
        except ConfigurationError as exc:
            raise FormatError(f"invalid parameters: {exc}", 0) from exc
        if m % 8 and bits[-1] >> (m % 8):
            raise FormatError("bits set beyond m", _HEADER.size + 2 * k + nbits - 1)
        bloom.bits = bits
        he.cells = cells
        he.t = t
        hmask = (1 << (width - 1)) - 1
        for i in range(omega):
            v = he.raw(i)
            if v and not 1 <= v & hmask <= size:
                raise FormatError(f"cell {i} holds invalid id {v & hmask}", _HEADER.size + 2 * k + nbits + i * width // 8)
        return cls(bloom, he, fast, BuildStats(t=t))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.serialize())

    @classmethod
    def load(cls, path) -> "Habf":
        with open(path, "rb") as fh:
            return cls.deserialize(fh.read())


def _keys(keys) -> list[bytes]:
    keys = list(keys)
    if all(type(k) is bytes for k in keys):
        return keys
    return [as_bytes(k) for k in keys]


def _prepare(positives, negatives, costs):
    positives = _keys(positives)
    if not positives:
        raise InputError("at least one positive key is required")
    neg_keys = []
    neg_costs = []
    if costs is None:
        for item in negatives:
            if isinstance(item, (tuple, list)):
                key, cost = item
            else:
                key, cost = item, 1.0
            neg_keys.append(key)
            neg_costs.append(float(cost))
        neg_keys = _keys(neg_keys)
    else:
        neg_keys = _keys(negatives)
        neg_costs = [float(c) for c in costs]
        if len(neg_costs) != len(neg_keys):
            raise InputError("negatives and costs differ in length")
    for c in neg_costs:
        if not math.isfinite(c) or c < 0:
            raise InputError(f"costs must be finite and >= 0, got {c}")
    overlap = set(positives).intersection(neg_keys)
    if overlap:
        sample = sorted(overlap)[:5]
        raise InputError(f"{len(overlap)} keys are both positive and negative, e.g. {sample}")
    if len(set(neg_keys)) != len(neg_keys):
        raise InputError("duplicate negative keys")
    return positives, neg_keys, neg_costs


def build(
    positives: Sequence[Key],
    negatives: Sequence,
    config: HabfConfig,
    costs: Sequence[float] | None = None,
    *,
    return_workspace: bool = False,
):
    """Construct a filter for ``positives`` tuned against ``negatives``.

    ``negatives`` holds ``(key, cost)`` pairs, or plain keys together with
    a parallel ``costs`` sequence.
    """
    positives, neg_keys, neg_costs = _prepare(positives, negatives, costs)
    family = config.family()
    ws = BuildWorkspace(
        positives, neg_keys, neg_costs,
        family=family, m=config.m, k=config.k, omega=config.omega,
        cell_width=config.cell_width, fast=config.fast_mode,
        gamma_all_negatives=config.gamma_all_negatives,
        max_candidates=config.max_candidates_per_ck, debug=config.debug,
    )
    stats = ws.run()
    habf = Habf(ws.bloom, ws.expressor, config.fast_mode, stats)
    return (habf, ws) if return_workspace else habf


def build_fast(positives: Sequence[Key], negatives: Sequence, config: HabfConfig, costs=None, **kw):
    """Double-hashing build that only ever clears Bloom bits."""
    return build(positives, negatives, replace(config, fast_mode=True), costs, **kw)
