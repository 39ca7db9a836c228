"""Two-phase joint optimization: the runtime state behind ``build``.

Phase I picks, for a collision key, a positive key ``e_s`` that alone owns
one of the collision key's bits and a replacement for the hash function
that maps ``e_s`` there.  Phase II only accepts the replacement if the new
function set can be stored in the HashExpressor.

State kept while building:

* the V index: per bit a single-owner flag and the first owner;
* Gamma: buckets of already optimized negative keys at their ``H0`` bits,
  plus two auxiliary maps so that expressor side effects on them can be
  detected exactly (``stop``: cell where an incomplete expressor walk
  ended; ``watch``: bits of a complete but negative walk);
* the collision queue, cost-descending with re-collided keys at the tail.

Every Bloom bit that is set has an owner and vice versa; clearing a bit
always resets its unit.
"""

from __future__ import annotations

from array import array
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from ._backend import kernels
from .bloom import BloomFilter
from .errors import InvariantViolation
from .expressor import HashExpressor
from .hashing import HashFamily

OPTIMIZED = "optimized"
SKIPPED = "skipped"
FAILED = "failed"

# candidate classes, in preference order
REUSE_BIT, FREE_BIT, EXCHANGE = 0, 1, 2


class VIndex:
    """Per-bit ``<singleflag, keyid>`` units; ``owner`` is -1 for NULL."""

    def __init__(self, m: int) -> None:
        self.single = bytearray(b"\x01") * m
        self.owner = array("q", [-1]) * m

    def insert(self, p: int, key_id: int) -> None:
        if self.single[p]:
            if self.owner[p] < 0:
                self.owner[p] = key_id
            else:
                self.single[p] = 0

    def reset(self, p: int) -> None:
        self.single[p] = 1
        self.owner[p] = -1

    def unit(self, p: int) -> tuple[int, int | None]:
        o = self.owner[p]
        return self.single[p], (None if o < 0 else o)


def build_v_index(
    digests: array, m: int, h0: Sequence[int], family: HashFamily
) -> tuple[VIndex, BloomFilter, array]:
    """Insert every positive digest with ``h0`` into a fresh V index and filter.

    Returns the row-major ``H0`` positions as well, since the optimizer needs them
    to recover which function maps an owner onto a unit.
    """
    bloom = BloomFilter(m, len(h0), h0, family)
    v = VIndex(m)
    pos = family.positions(digests, h0, m)
    kernels.build_v(pos, len(h0), v.single, v.owner, bloom.bits)
    return v, bloom, pos


@dataclass
class BuildStats:
    T: int = 0
    t: int = 0
    processed: int = 0
    skipped_at_pop: int = 0
    with_candidates: int = 0
    optimized: int = 0
    skipped: int = 0
    failed: int = 0
    requeued: int = 0
    p0: float = 1.0
    F_bf: float = 0.0
    F_star_bf: float = 0.0
    initial_popcount: int = 0
    popcount: int = 0
    max_popcount: int = 0
    bits_set: int = 0
    aux_bytes: int = 0
    outcomes: dict = field(default_factory=dict)

    @property
    def pc_prime(self) -> float:
        """Share of processed collision keys for which phase I found a candidate."""
        n = self.processed - self.skipped_at_pop
        return self.with_candidates / n if n else 0.0

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "outcomes"}
        d["pc_prime"] = self.pc_prime
        return d


@dataclass(frozen=True)
class Candidate:
    cls: int
    zcost: float
    u: int
    owner: int
    h_u: int
    h_c: int
    p: int


class BuildWorkspace:
    def __init__(
        self,
        positives: Sequence[bytes],
        negatives: Sequence[bytes],
        costs: Sequence[float],
        *,
        family: HashFamily,
        m: int,
        k: int,
        omega: int,
        cell_width: int,
        h0: Sequence[int] | None = None,
        fast: bool = False,
        gamma_all_negatives: bool = False,
        max_candidates: int = 64,
        debug: bool = False,
    ) -> None:
        self.family = family
        self.m = m
        self.k = k
        self.h0 = tuple(h0) if h0 is not None else tuple(range(1, k + 1))
        self.fast = fast
        self.gamma_all_negatives = gamma_all_negatives
        self.max_candidates = max_candidates
        self.debug = debug
        self.replacements = tuple(h for h in family.ids if h not in self.h0)

        self.positives = list(positives)
        self.negatives = list(negatives)
        self.costs = [float(c) for c in costs]
        self.sdg = family.digests(self.positives)
        self.ndg = family.digests(self.negatives)

        self.v, self.bloom, self.spos = build_v_index(self.sdg, m, self.h0, family)
        self.npos = family.positions(self.ndg, self.h0, m)
        self.expressor = HashExpressor(omega, cell_width, family)
        self.locked = bytearray(len(self.positives))
        self.custom: dict[int, tuple[int, ...]] = {}

        self.gamma: dict[int, set[int]] = {}
        self.gamma_stop: dict[int, set[int]] = {}
        self.gamma_watch: dict[int, set[int]] = {}
        self.gamma_rec: dict[int, tuple[str, object]] = {}
        self.queue: deque[int] = deque()
        self.stats = BuildStats()

    # -- small helpers -------------------------------------------------

    def bit(self, p: int) -> int:
        return (self.bloom.bits[p >> 3] >> (p & 7)) & 1

    def _set(self, p: int) -> None:
        self.bloom.bits[p >> 3] |= 1 << (p & 7)

    def _clear(self, p: int) -> None:
        self.bloom.bits[p >> 3] &= ~(1 << (p & 7)) & 0xFF

    def h0_positions(self, g: int) -> list[int]:
        b = g * self.k
        return list(self.npos[b : b + self.k])

    def positive_under_h0(self, g: int) -> bool:
        bits = self.bloom.bits
        b = g * self.k
        for p in self.npos[b : b + self.k]:
            if not (bits[p >> 3] >> (p & 7)) & 1:
                return False
        return True

    def expressor_hit(self, g: int) -> bool:
        """True when the expressor walk of negative ``g`` completes onto set bits."""
        if not self.expressor.omega:
            return False
        ids, _ = self.expressor.trace(self.ndg[g], self.k)
        return ids is not None and self.bloom.contains_digest(self.ndg[g], ids)

    def is_positive(self, g: int) -> bool:
        return self.positive_under_h0(g) or self.expressor_hit(g)

    # -- Gamma ---------------------------------------------------------

    def gamma_add(self, g: int) -> None:
        if g in self.gamma_rec:
            return
        for p in set(self.h0_positions(g)):
            self.gamma.setdefault(p, set()).add(g)
        self._index_walk(g)

    def _index_walk(self, g: int) -> None:
        if not self.expressor.omega:
            self.gamma_rec[g] = ("none", None)
            return
        dg = self.ndg[g]
        ids, stop = self.expressor.trace(dg, self.k)
        if ids is None:
            self.gamma_stop.setdefault(stop, set()).add(g)
            self.gamma_rec[g] = ("stop", stop)
        else:
            where = {self.family.position(dg, h, self.m) for h in ids}
            for p in where:
                self.gamma_watch.setdefault(p, set()).add(g)
            self.gamma_rec[g] = ("watch", where)

    def _unindex_walk(self, g: int) -> None:
        kind, data = self.gamma_rec.pop(g)
        if kind == "stop":
            self._discard(self.gamma_stop, data, g)
        elif kind == "watch":
            for p in data:
                self._discard(self.gamma_watch, p, g)

    @staticmethod
    def _discard(index: dict, slot: int, g: int) -> None:
        s = index.get(slot)
        if s is not None:
            s.discard(g)
            if not s:
                del index[slot]

    def gamma_remove(self, g: int) -> None:
        for p in set(self.h0_positions(g)):
            self._discard(self.gamma, p, g)
        self._unindex_walk(g)

    def in_gamma(self, g: int) -> bool:
        return g in self.gamma_rec

    # -- phase I -------------------------------------------------------

    def collect_xi(self, g: int) -> list[tuple[int, int, int]]:
        """``(u, owner, h_u)`` for each distinct ``H0`` bit of ``g`` owned once by an unlocked key."""
        v = self.v
        out = []
        k = self.k
        for u in sorted(set(self.h0_positions(g))):
            s = v.owner[u]
            if not v.single[u] or s < 0 or self.locked[s]:
                continue
            row = self.spos[s * k : s * k + k]
            out.append((u, s, self.h0[row.index(u)]))
        return out

    def conflict_detection(self, nu: int) -> set[int]:
        """Keys of bucket ``nu`` that would test positive under ``H0`` if bit ``nu`` were set.

        A key qualifies when every other ``H0`` bit it maps to already has
        an owner, which is the same as that bit being set.
        """
        owner = self.v.owner
        out = set()
        for g in self.gamma.get(nu, ()):
            if all(p == nu or owner[p] >= 0 for p in self.h0_positions(g)):
                out.add(g)
        return out

    def candidates(self, g: int) -> tuple[list[Candidate], bool]:
        """Ranked phase-I candidates and whether any were dropped as unprofitable."""
        fam, m = self.family, self.m
        theta = self.costs[g]
        out = []
        unprofitable = False
        for u, s, h_u in self.collect_xi(g):
            dg = self.sdg[s]
            for h_c in self.replacements:
                p = fam.position(dg, h_c, m)
                if p == u:
                    continue
                if self.bit(p):
                    out.append(Candidate(REUSE_BIT, 0.0, u, s, h_u, h_c, p))
                    continue
                if self.fast:
                    continue
                zeta = [z for z in self.conflict_detection(p) if u not in self.h0_positions(z)]
                if not zeta:
                    out.append(Candidate(FREE_BIT, 0.0, u, s, h_u, h_c, p))
                    continue
                zcost = sum(self.costs[z] for z in zeta)
                if zcost <= theta:
                    out.append(Candidate(EXCHANGE, zcost, u, s, h_u, h_c, p))
                else:
                    unprofitable = True
        out.sort(key=lambda c: (c.cls, c.zcost, c.u, c.h_c))
        return out, unprofitable

    # -- phase II and commit ---------------------------------------------

    def process_collision_key(self, g: int) -> str:
        st = self.stats
        st.processed += 1
        if not self.positive_under_h0(g):
            if self.expressor_hit(g):
                return self._tally(FAILED)
            st.skipped_at_pop += 1
            if not self.fast:
                self.gamma_add(g)
            return self._tally(SKIPPED)

        cands, unprofitable = self.candidates(g)
        if not cands:
            return self._tally(SKIPPED if unprofitable else FAILED)
        st.with_candidates += 1

        planned = []
        for c in cands[: self.max_candidates]:
            phi = tuple(sorted((set(self.h0) - {c.h_u}) | {c.h_c}))
            plan = self.expressor.plan_digest(self.sdg[c.owner], phi)
            if plan is not None:
                planned.append((c, phi, plan))
        planned.sort(key=lambda x: (x[0].cls, x[0].zcost, -x[2].overlap, x[0].u, x[0].h_c))

        for c, phi, plan in planned:
            if self._try_commit(g, c, phi, plan):
                return self._tally(OPTIMIZED)
        return self._tally(FAILED)

    def _tally(self, outcome: str) -> str:
        st = self.stats
        if outcome == OPTIMIZED:
            st.optimized += 1
        elif outcome == SKIPPED:
            st.skipped += 1
        else:
            st.failed += 1
        return outcome

    def _try_commit(self, g: int, c: Candidate, phi: tuple[int, ...], plan) -> bool:
        he = self.expressor
        changes = he.changes(plan)
        newly_set = not self.bit(c.p)
        # apply tentatively so that every check sees the exact post state
        self._clear(c.u)
        if newly_set:
            self._set(c.p)
        for cell, _, new in changes:
            kernels.put_cell(he.cells, he.cell_width, cell, new)

        accept = not self.is_positive(g)
        collateral: set[int] = set()
        if accept and not self.fast:
            suspects = set(self.gamma_watch.get(c.p, ())) if newly_set else set()
            if newly_set:
                suspects |= self.gamma.get(c.p, set())
            for cell, _, _ in changes:
                suspects |= self.gamma_stop.get(cell, set())
            collateral = {z for z in suspects if self.is_positive(z)}
            accept = sum(self.costs[z] for z in collateral) <= self.costs[g]

        for cell, old, _ in changes:
            kernels.put_cell(he.cells, he.cell_width, cell, old)
        if newly_set:
            self._clear(c.p)
        self._set(c.u)
        if not accept:
            return False

        he.commit(plan)
        self._clear(c.u)
        self.v.reset(c.u)
        self._set(c.p)
        self.v.insert(c.p, c.owner)
        self.locked[c.owner] = 1
        self.custom[c.owner] = tuple(plan.ids)
        st = self.stats
        st.popcount += int(newly_set) - 1
        st.bits_set += int(newly_set)
        st.max_popcount = max(st.max_popcount, st.popcount)
        if not self.fast:
            touched = set()
            for cell, _, _ in changes:
                touched |= self.gamma_stop.get(cell, set())
            for z in sorted(collateral):
                self.gamma_remove(z)
                self.queue.append(z)
                self.stats.requeued += 1
            for z in touched - collateral:
                self._unindex_walk(z)
                self._index_walk(z)
            self.gamma_add(g)
        if self.debug:
            self.check_invariants()
        return True

    # -- driver --------------------------------------------------------

    def fill_queue(self) -> None:
        flags = kernels.test_rows(self.bloom.bits, self.npos, self.k)
        hits = [g for g, f in enumerate(flags) if f]
        hits.sort(key=lambda g: (-self.costs[g], self.negatives[g]))
        self.queue = deque(hits)
        self.stats.T = len(hits)
        if self.gamma_all_negatives and not self.fast:
            for g, f in enumerate(flags):
                if not f:
                    self.gamma_add(g)

    def run(self) -> BuildStats:
        st = self.stats
        st.p0 = self.bloom.zero_fraction()
        st.initial_popcount = st.popcount = st.max_popcount = self.bloom.popcount()
        self.fill_queue()
        if self.expressor.omega:
            while self.queue:
                g = self.queue.popleft()
                st.outcomes[g] = self.process_collision_key(g)
        st.t = self.expressor.t
        n = len(self.negatives)
        st.F_bf = st.T / n if n else 0.0
        if n:
            flags = kernels.test_rows(self.bloom.bits, self.npos, self.k)
            st.F_star_bf = sum(flags) / n
        st.aux_bytes = self.aux_bytes()
        return st

    def aux_bytes(self) -> int:
        """Exact byte count of the V units, Gamma membership and queue payloads."""
        v = len(self.v.single) + self.v.owner.itemsize * len(self.v.owner)
        gamma = 8 * sum(len(s) for s in self.gamma.values())
        walks = 8 * (sum(len(s) for s in self.gamma_stop.values()) + sum(len(s) for s in self.gamma_watch.values()))
        return v + gamma + walks + 8 * self.stats.T + len(self.locked)

    # -- debugging -----------------------------------------------------

    def check_invariants(self) -> None:
        bits = self.bloom
        for p in range(self.m):
            if (self.v.owner[p] >= 0) != bool(self.bit(p)):
                raise InvariantViolation(f"bit {p} and its V unit disagree")
        for s, dg in enumerate(self.sdg):
            phi = self.custom.get(s)
            if phi is None:
                if not bits.contains_digest(dg, self.h0):
                    raise InvariantViolation(f"positive key {s} lost under H0")
            else:
                ids, _ = self.expressor.trace(dg, self.k)
                if ids != phi or not bits.contains_digest(dg, phi):
                    raise InvariantViolation(f"positive key {s} lost its customized chain")
        for g in self.gamma_rec:
            if self.is_positive(g):
                raise InvariantViolation(f"optimized key {g} tests positive")
