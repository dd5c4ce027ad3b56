"""Randomized wave-vector systems and the zero-sum tuple counts N_a.

A system carries, for each level ``lambda_k``, a finite set of planar vectors
of norm ``sqrt(lambda_k)/(2 pi)`` built from sampled directions:

* rectangular variant: ``m_k`` directions in (0, pi/2), each expanded to the
  4 reflections ``(+-cos, +-sin)``;
* square-symmetric variant: ``n_k`` directions in (0, pi/4), each expanded to
  8 images (the 4 reflections plus the coordinate swap ``(sin, cos)``).

Negations are stored as exact componentwise float negations, so tuples whose
vectors cancel pairwise sum to (near-)zero at rounding level, far below any
counting tolerance.  ``na_bruteforce`` counts zero-sum tuples geometrically;
``na_formula`` computes the same count by exact rational combinatorics.  The
two must agree exactly: that cross-check anchors the whole step-2 model.

Systems are immutable after sampling and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from pointscatter.partition_polynomials import PartitionPolynomialTable, build_table, eval_P

__all__ = [
    "WaveVectorSystem",
    "BudgetExceededError",
    "ToleranceSensitivityError",
    "sample_system",
    "na_bruteforce",
    "na_formula",
    "randomized_moment_step2",
    "randomized_moment_direct",
]

DEFAULT_TUPLE_BUDGET = 10**8
_HALF_CAP = 4 * 2**20  # per-half enumeration cap (memory guard)


class BudgetExceededError(RuntimeError):
    pass


class ToleranceSensitivityError(RuntimeError):
    """Zero-sum count changed across the guard tolerance window: the sampled
    directions produced a borderline near-cancellation, which has probability
    zero under any absolutely continuous direction law."""


@dataclass(frozen=True)
class WaveVectorSystem:
    variant: str  # "rectangular" | "square"
    lambdas: tuple[float, ...]
    thetas: tuple[tuple[float, ...], ...]
    vectors: tuple[np.ndarray, ...]  # per level, second half is the exact negation of the first

    @property
    def n_levels(self) -> int:
        return len(self.lambdas)

    @property
    def counts(self) -> tuple[int, ...]:
        """Quarter-plane multiplicities m_k (the N_a formula inputs); r_k = 4 m_k."""
        per_theta = 2 if self.variant == "square" else 1
        return tuple(per_theta * len(t) for t in self.thetas)

    def r(self, k: int) -> int:
        return self.vectors[k].shape[0]


def sample_system(lambdas, multiplicities, variant: str = "rectangular",
                  rng: np.random.Generator | None = None) -> WaveVectorSystem:
    """Draw i.i.d. uniform directions and build the reflected vector sets.

    ``multiplicities[k]`` is the number of sampled directions at level k:
    m_k for the rectangular variant (4 vectors each), n_k for the square
    variant (8 vectors each).
    """
    if variant not in ("rectangular", "square"):
        raise ValueError(f"unknown variant {variant!r}")
    lambdas = [float(v) for v in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])) or any(v <= 0 for v in lambdas):
        raise ValueError("lambdas must be strictly increasing and positive")
    if len(multiplicities) != len(lambdas):
        raise ValueError("one multiplicity per level required")
    if any(int(m) < 1 for m in multiplicities):
        raise ValueError("multiplicities must be positive integers")
    if rng is None:
        rng = np.random.default_rng()
    upper = math.pi / 4 if variant == "square" else math.pi / 2
    thetas = []
    vectors = []
    for lam, mult in zip(lambdas, multiplicities):
        th = rng.uniform(0.0, upper, size=int(mult))
        rho = math.sqrt(lam) / (2.0 * math.pi)
        c, s = rho * np.cos(th), rho * np.sin(th)
        if variant == "square":
            plus = np.stack([np.concatenate([c, -c, s, -s]),
                             np.concatenate([s, s, c, c])], axis=1)
        else:
            plus = np.stack([np.concatenate([c, -c]),
                             np.concatenate([s, s])], axis=1)
        vecs = np.concatenate([plus, -plus], axis=0)
        vecs.flags.writeable = False
        thetas.append(tuple(th.tolist()))
        vectors.append(vecs)
    return WaveVectorSystem(variant=variant, lambdas=tuple(lambdas),
                            thetas=tuple(thetas), vectors=tuple(vectors))


def _normalize_a(system_levels: int, a) -> tuple[int, ...]:
    if isinstance(a, dict):
        out = [0] * system_levels
        for k, v in a.items():
            if not 0 <= k < system_levels:
                raise ValueError(f"level index {k} out of range")
            out[k] = int(v)
        a = out
    a = tuple(int(v) for v in a)
    if len(a) > system_levels:
        if any(a[system_levels:]):
            raise ValueError("a has support beyond the sampled levels")
        a = a[:system_levels]
    a = a + (0,) * (system_levels - len(a))
    if any(v < 0 for v in a):
        raise ValueError("a must be non-negative")
    return a


def _enumerate_sums(slot_arrays: list[np.ndarray]) -> np.ndarray:
    sums = np.zeros((1, 2))
    for arr in slot_arrays:
        sums = (sums[:, None, :] + arr[None, :, :]).reshape(-1, 2)
        if sums.shape[0] > _HALF_CAP:
            raise BudgetExceededError("half-product exceeds the enumeration cap")
    return sums


def na_bruteforce(system: WaveVectorSystem, a, zero_tol: float | None = None,
                  budget: int = DEFAULT_TUPLE_BUDGET) -> int:
    """Count tuples in prod_k Lambda_k^{a_k} whose vector sum is (numerically) zero.

    Meet-in-the-middle on two slot halves; matching uses |sum| <= zero_tol
    with the default 1e-9 * sqrt(lambda_max).  The count is recomputed at
    1e-12 and 1e-6 times sqrt(lambda_max); any disagreement raises, since
    genuine cancellations sit at rounding level (~1e-15) and almost surely
    nothing else comes close.
    """
    a = _normalize_a(system.n_levels, a)
    if all(v == 0 for v in a):
        return 1  # the empty tuple
    scale = math.sqrt(max(system.lambdas))
    if zero_tol is None:
        zero_tol = 1e-9 * scale
    total = 1
    slots: list[np.ndarray] = []
    for k, a_k in enumerate(a):
        for _ in range(a_k):
            slots.append(system.vectors[k])
            total *= system.vectors[k].shape[0]
    if total > budget:
        raise BudgetExceededError(f"{total} tuples exceed budget {budget}")

    # split slots so both half-products stay balanced
    half1: list[np.ndarray] = []
    half2: list[np.ndarray] = []
    p1 = p2 = 1
    for arr in sorted(slots, key=lambda v: -v.shape[0]):
        if p1 <= p2:
            half1.append(arr)
            p1 *= arr.shape[0]
        else:
            half2.append(arr)
            p2 *= arr.shape[0]
    s1 = _enumerate_sums(half1)
    s2 = _enumerate_sums(half2)

    u1, c1 = np.unique(s1, axis=0, return_counts=True)
    u2, c2 = np.unique(s2, axis=0, return_counts=True)
    # sort mirror of u2 by x for window queries against -u1
    neg2 = -u2
    order = np.lexsort((neg2[:, 1], neg2[:, 0]))
    neg2, c2 = neg2[order], c2[order]

    tol_lo, tol_hi = 1e-12 * scale, 1e-6 * scale
    window = max(zero_tol, tol_hi)
    counts = {tol_lo: 0, zero_tol: 0, tol_hi: 0}
    xs = neg2[:, 0]
    for (x, y), mult in zip(u1, c1):
        lo = np.searchsorted(xs, x - window, side="left")
        hi = np.searchsorted(xs, x + window, side="right")
        if lo == hi:
            continue
        d = np.hypot(neg2[lo:hi, 0] - x, neg2[lo:hi, 1] - y)
        for tol in counts:
            counts[tol] += int(mult) * int(c2[lo:hi][d <= tol].sum())
    if not counts[tol_lo] == counts[zero_tol] == counts[tol_hi]:
        raise ToleranceSensitivityError(
            f"counts {counts} unstable across tolerance window [{tol_lo:g}, {tol_hi:g}]")
    return counts[zero_tol]


@lru_cache(maxsize=4096)
def _pair_weight(b: int) -> Fraction:
    # sum_{c=0}^{b} (1 / (c! (b-c)!))^2
    return sum((Fraction(1, math.factorial(c) * math.factorial(b - c)) ** 2
                for c in range(b + 1)), Fraction(0))


@lru_cache(maxsize=65536)
def _inner_sum(a_k: int, m_k: int) -> Fraction:
    """sum over (b_1..b_m) with 2*sum(b_j) = a_k of prod_j pair_weight(b_j).

    This is N_a / a! restricted to one level; it vanishes for odd a_k.
    """
    if a_k % 2:
        return Fraction(0)
    s = a_k // 2
    # coefficient of x^s in W(x)^m, W(x) = sum_b pair_weight(b) x^b
    w = [_pair_weight(b) for b in range(s + 1)]
    coeffs = [Fraction(1)] + [Fraction(0)] * s
    for _ in range(m_k):
        nxt = [Fraction(0)] * (s + 1)
        for i, ci in enumerate(coeffs):
            if ci == 0:
                continue
            for j in range(s + 1 - i):
                if w[j]:
                    nxt[i + j] += ci * w[j]
        coeffs = nxt
    return coeffs[s]


def na_formula(a, multiplicities) -> int:
    """Exact almost-sure value of N_a from the level multiplicities alone.

    ``multiplicities[k]`` must be the quarter-plane count m_k (for the
    square-symmetric variant that is 2 n_k).  Computed in exact rationals;
    the result is asserted to be an integer.
    """
    a = tuple(int(v) for v in a)
    if any(v < 0 for v in a):
        raise ValueError("a must be non-negative")
    if len(multiplicities) < len(a) and any(a[len(multiplicities):]):
        raise ValueError("multiplicities must cover the support of a")
    if any(v % 2 for v in a):
        return 0
    total = Fraction(1)
    for a_k, m_k in zip(a, multiplicities):
        if a_k == 0:
            continue
        total *= _inner_sum(a_k, int(m_k))
        if total == 0:
            return 0
    for a_k in a:
        total *= math.factorial(a_k)
    if total.denominator != 1:
        raise AssertionError(f"N_a came out non-integer: {total}")
    return int(total)


_TABLE_CACHE: dict[int, PartitionPolynomialTable] = {}


def _table_for(p: int, table: PartitionPolynomialTable | None) -> PartitionPolynomialTable:
    if table is not None:
        if table.p_max < p:
            raise ValueError(f"table p_max={table.p_max} < required {p}")
        return table
    if p not in _TABLE_CACHE:
        _TABLE_CACHE[p] = build_table(p)
    return _TABLE_CACHE[p]


def _spectral_sums(system: WaveVectorSystem, tau: float, p: int) -> list[float]:
    lam = np.asarray(system.lambdas)
    m = np.asarray(system.counts, dtype=np.float64)
    gap = np.min(np.abs(lam - tau))
    if gap < 1e-9:
        raise ValueError(f"tau={tau} collides with a sampled level (gap {gap:.2e})")
    d2 = (lam - tau) ** -2
    return [float(np.sum(m * d2**q)) for q in range(1, p + 1)]


def randomized_moment_step2(system: WaveVectorSystem, tau: float, order: int,
                            table: PartitionPolynomialTable | None = None) -> float:
    """Almost-sure randomized moment of the given order on a finite system.

    Odd orders vanish identically; even order 2p evaluates
    (2p)!/p! * P_p(2 A_1 S^1, ..., 2 A_p S^p) with S^q = sum_k m_k/(lambda_k-tau)^(2q).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if order % 2:
        return 0.0
    p = order // 2
    tab = _table_for(p, table)
    s = _spectral_sums(system, tau, p)
    args = [2.0 * float(tab.A_p(q)) * s[q - 1] for q in range(1, p + 1)]
    return math.factorial(2 * p) / math.factorial(p) * float(eval_P(tab, p, args))


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def randomized_moment_direct(system: WaveVectorSystem, tau: float, order: int) -> float:
    """Same moment evaluated from the defining series over tuple profiles.

    Sums order! * N_a / a! * prod_k (lambda_k - tau)^(-a_k) over all profiles
    a supported on the sampled levels with |a| = order, using the exact N_a
    formula per profile.  Independent path used to cross-check
    :func:`randomized_moment_step2`.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    lam = np.asarray(system.lambdas)
    if np.min(np.abs(lam - tau)) < 1e-9:
        raise ValueError("tau collides with a sampled level")
    counts = system.counts
    inv = 1.0 / (lam - tau)
    total = 0.0
    for a in _compositions(order, system.n_levels):
        if any(v % 2 for v in a):
            continue
        ratio = Fraction(1)  # N_a / a!
        for a_k, m_k in zip(a, counts):
            if a_k:
                ratio *= _inner_sum(a_k, m_k)
        if ratio == 0:
            continue
        weight = 1.0
        for a_k, w in zip(a, inv):
            if a_k:
                weight *= float(w) ** a_k
        total += float(ratio) * weight
    return math.factorial(order) * total
