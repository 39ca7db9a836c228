"""Closed-form bounds for HABF and routines that check them against builds.

All evaluators use ``expm1``/``log1p`` where a naive form would cancel, so
they stay accurate for tiny ratios such as ``k/b`` near zero.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

from .errors import DomainError, InputError, UndefinedMetricError

# -- measurement ------------------------------------------------------------


def _flags(query, keys: list) -> list:
    if hasattr(query, "query_many"):
        return query.query_many(keys)
    if hasattr(query, "contains_many"):
        return query.contains_many(keys)
    return [query(k) for k in keys]


def weighted_fpr(query, negatives: Iterable[tuple[bytes, float]]) -> float:
    """Cost-weighted share of ``negatives`` that ``query`` reports as present.

    ``query`` is a callable or any object with ``query_many``/``contains_many``.
    """
    negatives = list(negatives)
    total = math.fsum(c for _, c in negatives)
    if not total > 0:
        raise UndefinedMetricError("weighted FPR needs a positive total cost")
    flags = _flags(query, [k for k, _ in negatives])
    return math.fsum(c for f, (_, c) in zip(flags, negatives) if f) / total


def fpr(query, keys: Iterable[bytes]) -> float:
    keys = list(keys)
    if not keys:
        raise UndefinedMetricError("FPR of an empty probe set")
    return sum(1 for f in _flags(query, keys) if f) / len(keys)


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


# -- composition and optimization bounds ------------------------------------


def habf_fpr_composition(fstar_bf: float, f_h: float, omega: int | None = None, t: int | None = None):
    """Overall FPR from the Bloom FPR and the expressor false-hit rate.

    With ``omega`` and ``t`` also returns the looser ``((omega + t)/omega) * F*``.
    """
    for name, v in (("F*_bf", fstar_bf), ("F_h", f_h)):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name} must be in [0, 1], got {v}")
    value = fstar_bf + f_h * fstar_bf * (1.0 - fstar_bf)
    if omega is None or t is None:
        return value
    if omega <= 0:
        raise DomainError("omega must be positive")
    return value, (omega + t) / omega * fstar_bf


def p_xi_lower_bound(k: int, b: float) -> float:
    """Lower bound ``x / (e^x - 1)`` with ``x = k/b`` on a bit being singly owned."""
    if k < 1 or not b > 0:
        raise DomainError(f"need k >= 1 and b > 0, got k={k}, b={b}")
    x = k / b
    return x / math.expm1(x)


def expected_optimized_lower_bound(T: float, pc_prime: float, omega: int, k: int) -> float:
    """Lower bound on the expected number of optimized collision keys."""
    if omega <= k * k:
        raise DomainError(f"bound needs omega > k^2, got omega={omega}, k={k}")
    if not 0.0 <= pc_prime <= 1.0:
        raise DomainError(f"P'_c must be in [0, 1], got {pc_prime}")
    if T < 0:
        raise DomainError("T must be >= 0")
    a = T * pc_prime
    return a * (omega - k * k) / (omega + a * k * k)


def fstar_bound(F_bf: float, T: float, pc_prime: float, omega: int, k: int, n_neg: int) -> float:
    """Upper bound on the post-optimization Bloom FPR over the negatives."""
    if n_neg < 1:
        raise DomainError("need at least one negative key")
    return F_bf - expected_optimized_lower_bound(T, pc_prime, omega, k) / n_neg


# -- appendix ---------------------------------------------------------------


def pc_prime_lower_bound(p0: float, k: int, n_neg: int, family_size: int, m: int) -> float:
    """``(1 - p0^(k-1)) ^ (|O| |H|^2 / (4m))``."""
    if k < 2:
        raise DomainError(f"bound needs k >= 2, got {k}")
    if not 0.0 <= p0 <= 1.0:
        raise DomainError(f"p0 must be in [0, 1], got {p0}")
    if m <= 0 or n_neg < 0:
        raise DomainError("need m > 0 and |O| >= 0")
    exponent = n_neg * family_size * family_size / (4.0 * m)
    if exponent == 0:
        return 1.0
    base = p0 ** (k - 1)
    if base >= 1.0:
        return 0.0
    return math.exp(exponent * math.log1p(-base))


def insertion_workload_costs(
    m: int, k: int, alpha: float, bit_costs: Sequence[float], avoid: Sequence[float]
) -> tuple[float, float]:
    """Expected false-positive cost after ``alpha`` insertions: plain Bloom vs HABF.

    ``bit_costs[i]`` is the cost attached to bit ``i`` turning on and
    ``avoid[i]`` the probability that HABF steers an insertion away from it.
    """
    if len(bit_costs) != m or len(avoid) != m:
        raise InputError(f"need {m} bit costs and avoidance probabilities")
    n = k * alpha

    def hit(q: float) -> float:
        # probability that n insertions each landing with probability q reach the bit
        if q >= 1.0:
            return 1.0 if n > 0 else 0.0
        return -math.expm1(n * math.log1p(-q))

    plain = hit(1.0 / m)
    c_bf = math.fsum(c * plain for c in bit_costs)
    terms = []
    for c, p in zip(bit_costs, avoid):
        if not 0.0 <= p <= 1.0:
            raise InputError(f"avoidance probability {p} outside [0, 1]")
        terms.append(c * hit((1.0 - p) / m))
    return c_bf, math.fsum(terms)


def candidate_success_probability(h: float, m: float, n_candidates: int) -> float:
    """``1 - (h/m)^|H_c|``."""
    if not 0 < h <= m:
        raise DomainError(f"need 0 < h <= m, got h={h}, m={m}")
    return -math.expm1(n_candidates * math.log(h / m)) if h < m else 0.0


def insertion_avoidance_bound(omega: float, k: int, m: float, h: float, alpha: float, p_c: float) -> float:
    """Lower bound on the expected avoidance probability of a bit."""
    if min(omega, k, m, h) <= 0 or alpha < 0 or not 0 < p_c <= 1 or h > m:
        raise DomainError("need positive omega, k, m, h with h <= m, alpha >= 0, 0 < P_c <= 1")
    return (omega + k * k) / (omega * m / (p_c * h) + k**3 * alpha)


def lemma1_check(p: Sequence[float], slack: float = 1e-12) -> bool:
    """``prod(1 - p_i) >= 1 - sum(p_i)``."""
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"probability {v} outside [0, 1]")
    lhs = math.prod(1.0 - v for v in p)
    return lhs >= 1.0 - math.fsum(p) - slack


def lemma2_log_f(s: int, x: float) -> float:
    """``log f(x)`` for ``f(x) = s x / ((1 - x)^-s - 1)``."""
    y = s * math.log1p(-x)
    return math.log(s) + math.log(x) + y - math.log(-math.expm1(y))


def lemma2_check(s: int, grid: Sequence[float] | None = None, tol: float = 1e-9) -> bool:
    """Convexity and strict decrease of ``f`` on ``grid`` via finite differences."""
    if s < 1:
        raise DomainError(f"|S| must be >= 1, got {s}")
    if grid is None:
        grid = [i / 1000 for i in range(1, 1000)]
    grid = list(grid)
    if any(not 0.0 < x < 1.0 for x in grid):
        raise DomainError("grid must lie inside (0, 1)")
    logs = [lemma2_log_f(s, x) for x in grid]
    values = [math.exp(v) for v in logs]
    decreasing = all(b < a for a, b in zip(logs, logs[1:]))
    convex = True
    for i in range(1, len(grid) - 1):
        h1 = grid[i] - grid[i - 1]
        h2 = grid[i + 1] - grid[i]
        # second divided difference, scaled to a central difference on uniform grids
        d2 = 2.0 * ((values[i + 1] - values[i]) / h2 - (values[i] - values[i - 1]) / h1) / (h1 + h2)
        if d2 * h1 * h2 < -tol:
            convex = False
            break
    return decreasing and convex


# -- verification sweep -----------------------------------------------------


@dataclass
class BoundRow:
    sweep: str
    k: int
    b: float
    m: int
    omega: int
    n_pos: int
    n_neg: int
    T: int
    t: int
    p0: float
    pc_prime: float
    F_bf: float
    F_star_bf: float
    bound: float
    passed: bool

    def as_dict(self) -> dict:
        return asdict(self)


K_SWEEP = tuple(range(2, 11))
B_SWEEP = tuple(range(4, 14))


def bound_point(positives, negatives, *, k: int, b: float, seed: int, delta: float = 0.25,
                cell_width: int = 5, family_size: int = 15, sweep: str = "") -> BoundRow:
    from .habf import HabfConfig, build

    cfg = HabfConfig.for_keys(
        len(positives), b, k=k, delta=delta, cell_width=cell_width,
        family_size=family_size, family_seed=seed,
    )
    habf = build(positives, negatives, cfg)
    st = habf.build_stats
    n_neg = len(negatives)
    if st.T == 0:
        bound = st.F_bf
        passed = st.F_star_bf == bound
    else:
        bound = fstar_bound(st.F_bf, st.T, st.pc_prime, cfg.omega, k, n_neg)
        passed = st.F_star_bf < bound
    return BoundRow(sweep, k, b, cfg.m, cfg.omega, len(positives), n_neg, st.T, st.t,
                    st.p0, st.pc_prime, st.F_bf, st.F_star_bf, bound, passed)


def verify_bounds(seed: int = 0, n: int = 20000, skew: float = 1.0,
                  k_sweep: Sequence[int] = K_SWEEP, b_sweep: Sequence[float] = B_SWEEP,
                  progress: Callable[[BoundRow], None] | None = None) -> list[BoundRow]:
    """Measured ``F*_bf`` against its bound over a ``k`` sweep at b=10 and a ``b`` sweep at k=4."""
    from .workload import generate

    ds = generate(n, n, skew, seed)
    rows = []
    grid = [("k", kk, 10) for kk in k_sweep] + [("b", 4, bb) for bb in b_sweep]
    for sweep, kk, bb in grid:
        row = bound_point(ds.positives, ds.negatives, k=kk, b=bb, seed=seed, sweep=sweep)
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows


def occupancy_histogram(expressor) -> dict[int, int]:
    """Number of cells holding each id (0 for empty)."""
    hist: dict[int, int] = {}
    hmask = (1 << (expressor.cell_width - 1)) - 1
    for i in range(expressor.omega):
        hid = expressor.raw(i) & hmask
        hist[hid] = hist.get(hid, 0) + 1
    return dict(sorted(hist.items()))
