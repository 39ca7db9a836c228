"""HashExpressor: ``omega`` bit-packed cells storing customized hash chains.

A cell holds ``<endbit, hashindex>`` in ``cell_width`` bits with the endbit
in the top position.  A key's chain starts at the cell picked by the entry
function ``f`` (family id 0) and continues at ``pos(h)`` for every id ``h``
read along the way; the ``k``-th cell must carry endbit 1.

Insertion is split into a pure ``plan_insert`` and a re-validating
``commit`` so that callers can inspect a plan's side effects before
applying it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ._backend import kernels
from .errors import ArityError, ConfigurationError, PlanConflictError
from .hashing import HashFamily, Key, as_bytes, max_family_size


@dataclass(frozen=True)
class InsertionPlan:
    """Marking order for one key.

    ``steps[i]`` is ``(cell_index, hash_id, was_empty)`` for the ``i``-th
    visited cell; the last step's cell receives the endbit.
    """

    key: bytes | None
    digest: int
    steps: tuple[tuple[int, int, bool], ...]
    overlap: int

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(s[1] for s in self.steps)

    @property
    def cells(self) -> tuple[int, ...]:
        return tuple(s[0] for s in self.steps)


class HashExpressor:
    def __init__(self, omega: int, cell_width: int, family: HashFamily) -> None:
        if not isinstance(cell_width, int) or not 2 <= cell_width <= 8:
            raise ConfigurationError(f"cell width must be in [2, 8], got {cell_width!r}")
        if not isinstance(omega, int) or omega < 0:
            raise ConfigurationError(f"omega must be a non-negative integer, got {omega!r}")
        if family.size > max_family_size(cell_width):
            raise ConfigurationError(
                f"family of {family.size} ids does not fit {cell_width}-bit cells "
                f"(max {max_family_size(cell_width)})"
            )
        self.omega = omega
        self.cell_width = cell_width
        self.family = family
        self.cells = bytearray((omega * cell_width + 7) // 8)
        self.t = 0
        self._end = 1 << (cell_width - 1)
        self._hmask = self._end - 1

    def __repr__(self) -> str:
        return f"HashExpressor(omega={self.omega}, cell_width={self.cell_width}, t={self.t})"

    # -- cell access ---------------------------------------------------

    def raw(self, i: int) -> int:
        return kernels.get_cell(self.cells, self.cell_width, i)

    def cell(self, i: int) -> tuple[int, int]:
        """``(endbit, hashindex)`` of cell ``i``."""
        if not 0 <= i < self.omega:
            raise IndexError(f"cell index {i} out of range [0, {self.omega})")
        v = self.raw(i)
        return v >> (self.cell_width - 1), v & self._hmask

    def set_cell(self, i: int, endbit: int, hid: int) -> None:
        if not 0 <= i < self.omega:
            raise IndexError(f"cell index {i} out of range [0, {self.omega})")
        if not 0 <= hid <= self._hmask or endbit not in (0, 1):
            raise ConfigurationError(f"invalid cell content <{endbit}, {hid}>")
        kernels.put_cell(self.cells, self.cell_width, i, (endbit << (self.cell_width - 1)) | hid)

    def occupied(self) -> int:
        return sum(1 for i in range(self.omega) if self.raw(i))

    def entry(self, dg: int) -> int:
        return self.family.cell(dg, 0, self.omega)

    def pos(self, dg: int, hid: int) -> int:
        return self.family.cell(dg, hid, self.omega)

    # -- planning ------------------------------------------------------

    def plan_insert(self, key: Key, phi: Iterable[int]) -> InsertionPlan | None:
        phi = sorted(set(phi))
        for hid in phi:
            self.family.check_id(hid)
        return self.plan_digest(self.family.digest(key), phi, key)

    def plan_digest(self, dg: int, phi: Sequence[int], key: Key | None = None) -> InsertionPlan | None:
        """Best plan for digest ``dg`` and the id set ``phi``, or None.

        Every valid marking order visits the entry cell and then ``pos(x)``
        for each id except the last one.  Fixing the last id ``L`` fixes
        the visited cells, and every non-empty visited cell forces its
        successor, so the forced edges split ``phi`` into chains that may
        be concatenated in any order (free transitions land on empty
        cells).  The overlap depends only on ``L``; among the orders of
        maximal overlap the lexicographically smallest is returned.
        """
        if self.omega == 0:
            return None
        ids = sorted(phi)
        k = len(ids)
        if k == 0 or len(set(ids)) != k:
            raise ArityError(f"phi must hold distinct ids, got {list(phi)}")
        members = set(ids)
        raw = self.raw
        hmask = self._hmask
        entry = self.entry(dg)
        e_val = raw(entry)
        first = None
        if e_val:
            first = e_val & hmask
            if first not in members:
                return None
        where = {x: self.pos(dg, x) for x in ids}
        cont = {x: raw(c) & hmask if raw(c) else 0 for x, c in where.items()}

        best = None
        best_key = None
        for last in ids:
            order = self._arrange(ids, last, entry, first, where, cont)
            if order is None:
                continue
            overlap = (1 if e_val else 0) + sum(1 for x in ids if x != last and cont[x])
            rank = (-overlap, order)
            if best_key is None or rank < best_key:
                best_key = rank
                best = (order, overlap)
        if best is None:
            return None
        order, overlap = best
        cells = [entry] + [where[x] for x in order[:-1]]
        steps = tuple((c, x, raw(c) == 0) for c, x in zip(cells, order))
        return InsertionPlan(None if key is None else as_bytes(key), dg, steps, overlap)

    @staticmethod
    def _arrange(ids, last, entry, first, where, cont):
        visited = [entry] + [where[x] for x in ids if x != last]
        if len(set(visited)) != len(visited):
            return None
        nxt = {}
        has_pred = set()
        for x in ids:
            if x == last or not cont[x]:
                continue
            y = cont[x]
            if y not in where or y == x or y in has_pred:
                return None
            nxt[x] = y
            has_pred.add(y)
        if first is not None and first in has_pred:
            return None
        heads = [x for x in ids if x not in has_pred]
        chains = []
        seen = 0
        for h in heads:
            chain = [h]
            while chain[-1] in nxt:
                chain.append(nxt[chain[-1]])
            seen += len(chain)
            chains.append(chain)
        if seen != len(ids):
            return None  # a forced cycle
        tail = next(c for c in chains if c[-1] == last)
        lead = None
        if first is not None:
            lead = next(c for c in chains if c[0] == first)
            if lead is tail and len(chains) > 1:
                return None
        middle = [c for c in chains if c is not tail and c is not lead]
        middle.sort()
        order = []
        if lead is not None and lead is not tail:
            order.extend(lead)
        for c in middle:
            order.extend(c)
        order.extend(tail)
        return tuple(order)

    # -- mutation ------------------------------------------------------

    def changes(self, plan: InsertionPlan) -> list[tuple[int, int, int]]:
        """``(cell, old_raw, new_raw)`` for every cell ``commit`` would alter."""
        out = []
        last = len(plan.steps) - 1
        for i, (c, hid, was_empty) in enumerate(plan.steps):
            old = self.raw(c)
            new = hid | (self._end if i == last else 0) | (old & self._end)
            if new != old:
                out.append((c, old, new))
        return out

    def commit(self, plan: InsertionPlan) -> None:
        for c, hid, was_empty in plan.steps:
            v = self.raw(c)
            if was_empty:
                if v:
                    raise PlanConflictError(f"cell {c} was filled after planning")
            elif v & self._hmask != hid:
                raise PlanConflictError(f"cell {c} no longer holds id {hid}")
        for c, old, new in self.changes(plan):
            kernels.put_cell(self.cells, self.cell_width, c, new)
        self.t += 1

    # -- lookup --------------------------------------------------------

    def trace(self, dg: int, k: int) -> tuple[tuple[int, ...] | None, int | None]:
        """``(ids, None)`` for a complete walk, ``(None, stop_cell)`` otherwise."""
        if self.omega == 0:
            return None, None
        fam = self.family
        return kernels.trace(dg, k, self.cells, self.cell_width, self.omega, fam._mode_code, fam.seeds, fam.size)

    def query(self, key: Key, k: int) -> list[int] | None:
        ids, _ = self.trace(self.family.digest(key), k)
        return None if ids is None else list(ids)

    def false_hit_rate_bound(self) -> float:
        return self.t / self.omega if self.omega else 0.0
