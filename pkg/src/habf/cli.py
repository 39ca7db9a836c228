"""Command-line harness: ``habf build|query|bench|sweep|verify-bounds``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import statistics
import sys
import time
import tracemalloc
from dataclasses import asdict, dataclass, fields
from typing import Callable, Sequence

from . import analysis
from .bloom import BloomFilter, optimal_k
from .errors import ConfigurationError, FormatError, InputError, InvariantViolation
from .habf import Habf, HabfConfig, build
from .hashing import make_family
from .workload import Dataset, gen_keys, gen_zipf_costs, generate, load_dataset

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INVARIANT, EXIT_BOUND = 0, 1, 2, 3, 4
# "bloom" is the baseline with the optimal k at equal total bits; "bloom-h0" is
# the plain Bloom filter a zero-delta HABF degenerates to (same k and family)
ALGORITHMS = ("habf", "f-habf", "bloom", "bloom-h0")


@dataclass
class BenchRow:
    algorithm: str
    row: str
    round: int
    total_bits: int
    bits_per_key: float
    k: int
    delta: float
    cell_width: int
    skew: float
    seed: int
    weighted_fpr: float
    fpr: float
    fresh_fpr: float
    construct_ns_per_key: float
    query_ns_per_key: float
    peak_build_bytes: int
    aux_bytes: int
    t_optimized: int
    T_initial: int


FIELDS = [f.name for f in fields(BenchRow)]


def default_seed() -> int:
    raw = os.environ.get("HABF_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"HABF_SEED must be an integer, got {raw!r}") from None


# -- dataset assembly ---------------------------------------------------------


def dataset_from_args(args, shuffle_round: int = 0) -> Dataset:
    if args.positives:
        if not args.negatives:
            raise ConfigurationError("--positives needs --negatives")
        ds = load_dataset(args.positives, args.negatives)
        if args.gen_zipf is not None and ds.negatives:
            ds = ds.with_costs(gen_zipf_costs(len(ds.negatives), args.gen_zipf, args.seed, shuffle_round))
        return ds
    n = args.gen_n
    n_neg = args.gen_neg or n
    skew = args.gen_zipf if args.gen_zipf is not None else 1.0
    return generate(n, n_neg, skew, args.seed, shuffle_round)


def config_from_args(args, n_pos: int, **overrides) -> HabfConfig:
    params = dict(
        k=args.k, delta=args.delta, cell_width=args.cell_width,
        family_seed=args.seed, fast_mode=getattr(args, "fast", False),
    )
    params.update(overrides)
    return HabfConfig.for_keys(n_pos, args.bits_per_key, **params)


# -- bench machinery ------------------------------------------------------------


def _timed(fn: Callable[[], object], reps: int) -> float:
    samples = []
    for _ in range(max(1, reps)):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return statistics.median(samples)


def _peak_bytes(fn: Callable[[], object]) -> int:
    tracemalloc.start()
    try:
        fn()
        return tracemalloc.get_traced_memory()[1]
    finally:
        tracemalloc.stop()


def _bloom_builder(ds: Dataset, total_bits: int, seed: int):
    b = total_bits / len(ds.positives)
    k = optimal_k(b)

    def make():
        bf = BloomFilter(total_bits, k, family=make_family(seed, max(7, k + 1)))
        bf.insert_many(ds.positives)
        return bf

    return make, k


def bench_one(
    algorithm: str, ds: Dataset, *, bits_per_key: float, k: int = 3, delta: float = 0.25,
    cell_width: int = 4, skew: float = 1.0, seed: int = 0, round_: int = 0,
    fresh: Sequence[bytes] = (), timing_reps: int = 3, measure_memory: bool = True,
) -> tuple[BenchRow, object]:
    """Build one filter and measure it; returns the row and the filter."""
    n = len(ds.positives)
    total_bits = int(round(n * bits_per_key))
    T = t = aux = 0
    if algorithm == "bloom":
        make, k_used = _bloom_builder(ds, total_bits, seed)
        delta_used, width_used = 0.0, 0
    elif algorithm == "bloom-h0":
        family = HabfConfig(total_bits, delta=0.0, k=k, cell_width=cell_width, family_seed=seed).family()
        k_used, delta_used, width_used = k, 0.0, 0

        def make():
            bf = BloomFilter(total_bits, k, family=family)
            bf.insert_many(ds.positives)
            return bf
    elif algorithm in ("habf", "f-habf"):
        cfg = HabfConfig(total_bits, delta=delta, k=k, cell_width=cell_width,
                         family_seed=seed, fast_mode=algorithm == "f-habf")
        k_used, delta_used, width_used = k, delta, cell_width

        def make():
            return build(ds.positives, ds.negatives, cfg)
    else:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}")

    filt = make()
    if isinstance(filt, Habf):
        T, t, aux = filt.build_stats.T, filt.build_stats.t, filt.build_stats.aux_bytes
    construct = _timed(make, timing_reps) if timing_reps > 0 else 0.0
    peak = _peak_bytes(make) if measure_memory else 0
    neg_keys = ds.negative_keys
    query = _timed(lambda: analysis._flags(filt, neg_keys), max(1, timing_reps)) if neg_keys else 0.0
    wfpr = analysis.weighted_fpr(filt, ds.negatives) if sum(ds.costs) > 0 else 0.0
    plain = analysis.fpr(filt, neg_keys) if neg_keys else 0.0
    fresh_rate = analysis.fpr(filt, fresh) if fresh else float("nan")
    row = BenchRow(
        algorithm, "data", round_, total_bits, bits_per_key, k_used, delta_used, width_used,
        skew, seed, wfpr, plain, fresh_rate, construct / n,
        query / len(neg_keys) if neg_keys else 0.0, peak, aux, t, T,
    )
    return row, filt


def summary_rows(rows: Sequence[BenchRow]) -> list[BenchRow]:
    out = []
    numeric = ("weighted_fpr", "fpr", "fresh_fpr", "construct_ns_per_key", "query_ns_per_key",
               "peak_build_bytes", "aux_bytes", "t_optimized", "T_initial")
    for alg in dict.fromkeys(r.algorithm for r in rows):
        group = [r for r in rows if r.algorithm == alg]
        base = asdict(group[0])
        for label, fn in (("mean", _mean), ("stddev", _stdev)):
            d = dict(base, row=label, round=-1)
            for name in numeric:
                d[name] = fn([getattr(r, name) for r in group])
            out.append(BenchRow(**d))
    return out


def _finite(xs):
    return [float(x) for x in xs if not math.isnan(x)]


def _mean(xs):
    xs = _finite(xs)
    return statistics.fmean(xs) if xs else math.nan


def _stdev(xs):
    xs = _finite(xs)
    if not xs:
        return math.nan
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def emit(rows: Sequence, fmt: str, out=None) -> None:
    out = out or sys.stdout
    dicts = [r if isinstance(r, dict) else asdict(r) for r in rows]
    missing = None if fmt == "json" else ""
    dicts = [{k: missing if isinstance(v, float) and math.isnan(v) else v for k, v in d.items()} for d in dicts]
    if fmt == "json":
        for d in dicts:
            out.write(json.dumps(d) + "\n")
        return
    if not dicts:
        return
    w = csv.DictWriter(out, fieldnames=list(dicts[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(dicts)


# -- commands -----------------------------------------------------------------------


def cmd_build(args) -> int:
    ds = dataset_from_args(args)
    cfg = config_from_args(args, len(ds.positives))
    t0 = time.perf_counter()
    habf = build(ds.positives, ds.negatives, cfg)
    elapsed = time.perf_counter() - t0
    blob = habf.serialize()
    with open(args.out, "wb") as fh:
        fh.write(blob)
    st = habf.build_stats
    summary = {
        "out": args.out, "bytes": len(blob), "n_pos": len(ds.positives), "n_neg": len(ds.negatives),
        "total_bits": cfg.total_bits, "m": cfg.m, "omega": cfg.omega, "k": cfg.k,
        "delta": cfg.delta, "cell_width": cfg.cell_width, "fast": cfg.fast_mode, "seed": args.seed,
        "T": st.T, "t": st.t, "F_bf": st.F_bf, "F_star_bf": st.F_star_bf,
        "pc_prime": st.pc_prime, "build_seconds": round(elapsed, 6),
    }
    print(json.dumps(summary))
    return EXIT_OK


def cmd_query(args) -> int:
    habf = Habf.load(args.filter)
    keys = args.key if args.key else [line.rstrip("\r\n") for line in sys.stdin]
    keys = [k for k in keys if k != ""] if not args.key else keys
    flags = habf.query_many([k.encode("utf-8") for k in keys])
    out = sys.stdout
    for key, flag in zip(keys, flags):
        out.write(f"{key}\t{int(flag)}\n")
    return EXIT_OK


def _parse_algorithms(text: str) -> list[str]:
    algs = [a.strip() for a in text.split(",") if a.strip()]
    for a in algs:
        if a not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
    return algs


def _fresh(args, ds: Dataset) -> list[bytes]:
    if args.probes <= 0:
        return []
    taken = set(ds.positives) | set(ds.negative_keys)
    return gen_keys(args.probes, f"{args.seed}/fresh", exclude=taken)


def cmd_bench(args) -> int:
    algs = _parse_algorithms(args.algorithms)
    rows = []
    fresh = None
    for r in range(args.repeat):
        ds = dataset_from_args(args, shuffle_round=r)
        if fresh is None:
            fresh = _fresh(args, ds)
        skew = args.gen_zipf if args.gen_zipf is not None else (1.0 if not args.positives else 0.0)
        for alg in algs:
            row, _ = bench_one(
                alg, ds, bits_per_key=args.bits_per_key, k=args.k, delta=args.delta,
                cell_width=args.cell_width, skew=skew, seed=args.seed, round_=r,
                fresh=fresh, timing_reps=args.timing_reps, measure_memory=not args.no_memory,
            )
            rows.append(row)
    emit(rows + summary_rows(rows), args.format)
    return EXIT_OK


SWEEP_DEFAULTS = {
    "delta": [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
    "k": [2, 3, 4, 5, 6],
    "cellwidth": [3, 4, 5],
    "skew": [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
}


def sweep_rows(kind: str, values: Sequence[float], args, algorithms: Sequence[str]) -> list[BenchRow]:
    rows = []
    base_skew = args.gen_zipf if args.gen_zipf is not None else 1.0
    ds = None if kind == "skew" else dataset_from_args(args)
    fresh = _fresh(args, ds if ds is not None else generate(args.gen_n, args.gen_neg or args.gen_n, base_skew, args.seed))
    for v in values:
        params = dict(k=args.k, delta=args.delta, cell_width=args.cell_width)
        skew = base_skew
        data = ds
        if kind == "delta":
            params["delta"] = float(v)
        elif kind == "k":
            params["k"] = int(v)
        elif kind == "cellwidth":
            params["cell_width"] = int(v)
        elif kind == "skew":
            skew = float(v)
            data = generate(args.gen_n, args.gen_neg or args.gen_n, skew, args.seed)
        for alg in algorithms:
            row, _ = bench_one(
                alg, data, bits_per_key=args.bits_per_key, skew=skew, seed=args.seed, fresh=fresh,
                timing_reps=args.timing_reps, measure_memory=False, **params,
            )
            rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    values = SWEEP_DEFAULTS[args.sweep]
    if args.values:
        values = [float(x) for x in args.values.split(",") if x.strip()]
    algs = _parse_algorithms(args.algorithms)
    emit(sweep_rows(args.sweep, values, args, algs), args.format)
    return EXIT_OK


def cmd_verify_bounds(args) -> int:
    rows = analysis.verify_bounds(seed=args.seed, n=args.n)
    emit([r.as_dict() for r in rows], args.format)
    bad = [r for r in rows if not r.passed]
    for r in bad:
        print(
            f"bound violated at k={r.k}, b={r.b}: measured {r.F_star_bf} >= bound {r.bound}",
            file=sys.stderr,
        )
    return EXIT_BOUND if bad else EXIT_OK


# -- parser ---------------------------------------------------------------------------


def _dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--positives", metavar="PATH", help="positive keys, one per line")
    p.add_argument("--negatives", metavar="PATH", help="negative keys as CSV key,cost")
    p.add_argument("--gen-n", type=int, default=10000, metavar="N", help="generated positives (default 10000)")
    p.add_argument("--gen-neg", type=int, default=None, metavar="N", help="generated negatives (default: --gen-n)")
    p.add_argument("--gen-zipf", type=float, default=None, metavar="S", help="Zipf skew of negative costs")
    p.add_argument("--bits-per-key", type=float, default=10.0, metavar="B")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--cell-width", type=int, default=4)
    p.add_argument("--seed", type=int, default=None)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="habf", description="Hash adaptive Bloom filter tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a filter file")
    _dataset_flags(p)
    p.add_argument("--fast", action="store_true", help="double-hashing variant")
    p.add_argument("--out", required=True, metavar="FILTER_PATH")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="query keys against a filter file")
    p.add_argument("--filter", required=True, metavar="PATH")
    p.add_argument("--key", action="append", metavar="K", help="key to query (repeatable); default stdin")
    p.set_defaults(func=cmd_query)

    for name, func, help_ in (("bench", cmd_bench, "compare algorithms"), ("sweep", cmd_sweep, "parameter sweep")):
        p = sub.add_parser(name, help=help_)
        _dataset_flags(p)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--timing-reps", type=int, default=3, metavar="R")
        p.add_argument("--probes", type=int, default=10000, metavar="N", help="fresh negatives for fresh_fpr")
        p.set_defaults(func=func)
        if name == "bench":
            p.add_argument("--algorithms", default="habf,f-habf,bloom")
            p.add_argument("--repeat", type=int, default=10)
            p.add_argument("--no-memory", action="store_true", help="skip the traced-memory build")
        else:
            p.add_argument("--sweep", required=True, choices=tuple(SWEEP_DEFAULTS))
            p.add_argument("--values", help="comma-separated grid (default per sweep)")
            p.add_argument("--algorithms", default="habf")

    p = sub.add_parser("verify-bounds", help="measured F*_bf against its bound")
    p.add_argument("--scale", choices=("desk",), default="desk")
    p.add_argument("--n", type=int, default=20000, help=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_verify_bounds)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = default_seed()
        if hasattr(args, "repeat") and args.repeat < 1:
            raise ConfigurationError("--repeat must be >= 1")
        return args.func(args)
    except (InputError, FormatError, OSError) as exc:
        print(f"habf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvariantViolation as exc:
        print(f"habf: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"habf: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
