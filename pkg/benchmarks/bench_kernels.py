"""Time the pure-Python and compiled kernel backends on the same workload.

Each backend runs in its own interpreter, selected through HABF_PURE_PYTHON,
and reports the median of several repetitions per operation.

    python benchmarks/bench_kernels.py [--n 100000] [--reps 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, statistics, sys, time
from habf import BACKEND, HabfConfig, build, generate
from habf.bloom import BloomFilter

n, reps = int(sys.argv[1]), int(sys.argv[2])
ds = generate(n, n, 1.0, 0)
cfg = HabfConfig.for_keys(n, 10, family_seed=0)
fam = cfg.family()
keys = ds.negative_keys

def timed(fn):
    out = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        out.append(time.perf_counter_ns() - t0)
    return statistics.median(out) / n

digests = fam.digests(keys)
bloom = BloomFilter(cfg.total_bits, 3, family=fam)
habf = build(ds.positives, ds.negatives, cfg)
small = max(1, n // 10)
ds_small = generate(small, small, 1.0, 1)
cfg_small = HabfConfig.for_keys(small, 10, family_seed=1)
rows = {
    "digest": timed(lambda: fam.digests(keys)),
    "positions": timed(lambda: fam.positions(digests, (1, 2, 3), cfg.m)),
    "bloom_insert": timed(lambda: bloom.insert_many(ds.positives)),
    "bloom_query": timed(lambda: bloom.contains_many(keys)),
    "habf_query": timed(lambda: habf.query_flags(digests)),
    "expressor_trace": timed(lambda: [habf.expressor.trace(d, 3) for d in digests]),
    "habf_build_small": timed(lambda: build(ds_small.positives, ds_small.negatives, cfg_small)) * n / small,
}
print(json.dumps({"backend": BACKEND, "ns_per_key": rows}))
"""


def run(pure: bool, n: int, reps: int) -> dict:
    env = dict(os.environ, HABF_PURE_PYTHON="1" if pure else "0")
    res = subprocess.run(
        [sys.executable, "-c", WORKER, str(n), str(reps)], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(res.stdout)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--json", action="store_true", help="print raw results as JSON")
    args = p.parse_args(argv)
    py = run(True, args.n, args.reps)
    native = run(False, args.n, args.reps)
    if args.json:
        print(json.dumps([py, native]))
        return 0
    if native["backend"] == py["backend"]:
        print("compiled kernels are not built; both runs used the pure-Python backend", file=sys.stderr)
    print(f"{'operation':<20}{py['backend'] + ' ns/key':>16}{native['backend'] + ' ns/key':>16}{'speedup':>10}")
    for op, slow in py["ns_per_key"].items():
        fast = native["ns_per_key"][op]
        print(f"{op:<20}{slow:>16.1f}{fast:>16.1f}{slow / fast:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
