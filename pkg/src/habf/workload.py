"""Synthetic workloads and key/cost file ingestion."""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import InputError

KEY_PREFIX = b"YCSB"


def gen_keys(n: int, seed, exclude: set[bytes] | None = None) -> list[bytes]:
    """``n`` distinct 12-byte keys: ``YCSB`` plus a big-endian random 64-bit integer."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    rng = random.Random(f"keys/{seed}")
    seen = set(exclude or ())
    out = []
    while len(out) < n:
        key = KEY_PREFIX + rng.getrandbits(64).to_bytes(8, "big")
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


def gen_zipf_costs(n: int, skew: float, seed, shuffle_round: int = 0) -> list[float]:
    """Zipf weights ``r**-skew`` for ranks ``1..n``, permuted by ``(seed, shuffle_round)``."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if not skew >= 0 or math.isinf(skew):
        raise InputError(f"skew must be finite and >= 0, got {skew}")
    costs = [r ** -skew for r in range(1, n + 1)]
    random.Random(f"zipf/{seed}/{shuffle_round}").shuffle(costs)
    return costs


def gen_zipf_rounds(n: int, skew: float, seed, shuffle_rounds: int) -> list[list[float]]:
    return [gen_zipf_costs(n, skew, seed, r) for r in range(shuffle_rounds)]


@dataclass
class Dataset:
    positives: list[bytes]
    negatives: list[tuple[bytes, float]]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key in self.positives:
            if not key:
                raise InputError("empty positive key")
        for key, cost in self.negatives:
            if not key:
                raise InputError("empty negative key")
            if not math.isfinite(cost) or cost < 0:
                raise InputError(f"cost of {key!r} must be finite and >= 0, got {cost}")
        both = set(self.positives).intersection(k for k, _ in self.negatives)
        if both:
            raise InputError(f"keys in both sets: {sorted(both)[:5]}")

    @property
    def negative_keys(self) -> list[bytes]:
        return [k for k, _ in self.negatives]

    @property
    def costs(self) -> list[float]:
        return [c for _, c in self.negatives]

    def with_costs(self, costs: Sequence[float]) -> "Dataset":
        if len(costs) != len(self.negatives):
            raise InputError("cost vector length differs from the negatives")
        return Dataset(self.positives, list(zip(self.negative_keys, costs)), dict(self.provenance))


def generate(n_pos: int, n_neg: int, skew: float, seed, shuffle_round: int = 0) -> Dataset:
    positives = gen_keys(n_pos, f"{seed}/pos")
    negatives = gen_keys(n_neg, f"{seed}/neg", exclude=set(positives))
    costs = gen_zipf_costs(n_neg, skew, seed, shuffle_round)
    prov = {"source": "generated", "seed": seed, "skew": skew, "round": shuffle_round}
    return Dataset(positives, list(zip(negatives, costs)), prov)


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def load_dataset(positives_path, negatives_path) -> Dataset:
    pos_lines = {}
    positives = []
    for lineno, line in enumerate(_read_text(positives_path).splitlines(), 1):
        if not line:
            continue
        key = line.encode("utf-8")
        pos_lines.setdefault(key, lineno)
        positives.append(key)

    negatives = []
    reader = csv.reader(io.StringIO(_read_text(negatives_path)))
    header = next(reader, None)
    if header is None:
        raise InputError(f"{negatives_path}: missing header")
    names = [h.strip().lower() for h in header]
    if "key" not in names:
        raise InputError(f"{negatives_path}: header must name a 'key' column")
    kcol = names.index("key")
    ccol = names.index("cost") if "cost" in names else None
    for row in reader:
        lineno = reader.line_num
        if not row:
            continue
        if len(row) != len(names):
            raise InputError(f"{negatives_path}:{lineno}: expected {len(names)} fields, got {len(row)}")
        key = row[kcol].encode("utf-8")
        cost = 1.0
        if ccol is not None:
            try:
                cost = float(row[ccol])
            except ValueError:
                raise InputError(f"{negatives_path}:{lineno}: bad cost {row[ccol]!r}") from None
            if not math.isfinite(cost) or cost < 0:
                raise InputError(f"{negatives_path}:{lineno}: cost must be finite and >= 0")
        if key in pos_lines:
            raise InputError(
                f"key {row[kcol]!r} appears in {positives_path}:{pos_lines[key]} "
                f"and {negatives_path}:{lineno}"
            )
        negatives.append((key, cost))
    prov = {"source": "loaded", "positives": str(positives_path), "negatives": str(negatives_path)}
    return Dataset(positives, negatives, prov)


def save_dataset(ds: Dataset, positives_path, negatives_path) -> None:
    with open(positives_path, "w", encoding="utf-8", newline="\n") as fh:
        for key in ds.positives:
            fh.write(key.decode("utf-8") + "\n")
    with open(negatives_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["key", "cost"])
        for key, cost in ds.negatives:
            w.writerow([key.decode("utf-8"), repr(cost)])
