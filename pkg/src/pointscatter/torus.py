"""Deterministic ground truth on the rectangular torus of aspect ratio alpha^2.

The dual lattice is ``{(a/alpha, alpha*b)}`` and the Laplace eigenvalues are
``lambda = (4 pi^2 / alpha^2)(a^2 + alpha^4 b^2)``.  With ``alpha^2 = P/Q``
rational this equals ``4 pi^2 (a^2 Q^2 + P^2 b^2) / (P Q)``, so levels are
grouped by the exact integer key ``a^2 Q^2 + P^2 b^2`` and multiplicities are
never corrupted by floating-point near-degeneracies.  Irrational aspect
ratios are rejected; approximate them by rationals.

Moments of the truncated eigenfunction ``f_tau`` are computed two independent
ways: a zero-sum tuple sum over lattice points (meet-in-the-middle on exact
integer keys) and an exact trigonometric-polynomial grid quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "TorusLattice",
    "LatticeLevel",
    "build_lattice",
    "deterministic_moment",
    "moment_from_multiplicities",
    "grid_moment",
    "evaluate_f_on_grid",
    "solve_new_eigenvalues",
    "GridTooCoarseError",
    "TauCollisionError",
]

TAU_GUARD = 1e-9  # reject tau closer than this to any eigenvalue
FOUR_PI_SQ = 4.0 * math.pi**2


class GridTooCoarseError(ValueError):
    pass


class TauCollisionError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeLevel:
    key: int            # a^2 Q^2 + P^2 b^2, exact level identifier
    lam: float          # 4 pi^2 key / (P Q)
    vectors: tuple[tuple[int, int], ...]

    @property
    def r(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class TorusLattice:
    alpha_sq: Fraction
    cutoff: float                      # levels satisfy lam <= cutoff
    levels: tuple[LatticeLevel, ...]   # positive levels, ascending; lambda_0 = 0 excluded

    @property
    def alpha(self) -> float:
        return math.sqrt(float(self.alpha_sq))

    @property
    def n_points(self) -> int:
        return sum(level.r for level in self.levels)

    def lambdas(self) -> np.ndarray:
        return np.array([level.lam for level in self.levels])

    def multiplicities(self) -> np.ndarray:
        return np.array([level.r for level in self.levels])

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All nonzero (a, b) pairs with their eigenvalues, flattened."""
        a, b, lam = [], [], []
        for level in self.levels:
            for pa, pb in level.vectors:
                a.append(pa)
                b.append(pb)
                lam.append(level.lam)
        return np.array(a, dtype=np.int64), np.array(b, dtype=np.int64), np.array(lam)


def build_lattice(alpha_sq, cutoff: float) -> TorusLattice:
    """Enumerate dual-lattice points with eigenvalue <= cutoff, grouped exactly.

    ``alpha_sq`` must be positive and rational (Fraction, int, or "P/Q"
    string); ``cutoff`` bounds ``4 pi^2 ||xi||^2``.
    """
    alpha_sq = Fraction(alpha_sq)
    if alpha_sq <= 0:
        raise ValueError("alpha_sq must be positive")
    if cutoff < 0:
        raise ValueError("cutoff must be non-negative")
    P, Q = alpha_sq.numerator, alpha_sq.denominator
    # lam = 4 pi^2 K / (P Q) with K = a^2 Q^2 + P^2 b^2 <= K_max
    k_max = cutoff * P * Q / FOUR_PI_SQ
    groups: dict[int, list[tuple[int, int]]] = {}
    a = 0
    while a * a * Q * Q <= k_max:
        b = 0
        while a * a * Q * Q + P * P * b * b <= k_max:
            key = a * a * Q * Q + P * P * b * b
            if key > 0:
                bucket = groups.setdefault(key, [])
                for sa in ((a, -a) if a else (a,)):
                    for sb in ((b, -b) if b else (b,)):
                        bucket.append((sa, sb))
            b += 1
        a += 1
    levels = tuple(
        LatticeLevel(key=key, lam=FOUR_PI_SQ * key / (P * Q), vectors=tuple(sorted(groups[key])))
        for key in sorted(groups)
    )
    return TorusLattice(alpha_sq=alpha_sq, cutoff=float(cutoff), levels=levels)


def _check_tau(lattice: TorusLattice, tau: float) -> None:
    lams = lattice.lambdas()
    if lams.size and np.min(np.abs(lams - tau)) < TAU_GUARD:
        raise TauCollisionError(f"tau={tau} is within {TAU_GUARD} of an eigenvalue")
    if abs(tau) < TAU_GUARD:
        # tau = 0 is the excluded lambda_0; amplitudes only involve positive levels,
        # so tau near 0 is fine for moments but kept out of the solver's way.
        pass


def deterministic_moment(lattice: TorusLattice, tau: float, p: int,
                         max_hash_entries: int = 5_000_000) -> float:
    """Truncated p-th moment of f_tau via the zero-sum tuple expansion.

    Sums prod_j 1/(lambda_j - tau) over ordered p-tuples of nonzero lattice
    points (within the cutoff) whose integer coordinates sum to zero.
    Meet-in-the-middle: hash all floor(p/2)-tuple partial sums under exact
    (sum_a, sum_b) keys, then match complements; zero detection is exact
    integer equality.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    _check_tau(lattice, tau)
    a, b, lam = lattice.points()
    if a.size == 0:
        return 0.0
    w = 1.0 / (lam - tau)
    pts = list(zip((int(v) for v in a), (int(v) for v in b), w))

    def convolve(times: int) -> dict[tuple[int, int], float]:
        table = {(0, 0): 1.0}
        for _ in range(times):
            if len(table) * len(pts) > 20 * max_hash_entries:
                raise RuntimeError(
                    f"tuple enumeration budget exceeded for p={p}, n={len(pts)}")
            nxt: dict[tuple[int, int], float] = {}
            for (sa, sb), val in table.items():
                for pa, pb, wi in pts:
                    key = (sa + pa, sb + pb)
                    nxt[key] = nxt.get(key, 0.0) + val * wi
            table = nxt
        return table

    h1 = p // 2
    h2 = p - h1
    t1 = convolve(h1)
    t2 = t1 if h2 == h1 else convolve(h2)
    total = 0.0
    for (sa, sb), val in t1.items():
        other = t2.get((-sa, -sb))
        if other is not None:
            total += val * other
    return total


def moment_from_multiplicities(lattice: TorusLattice, tau: float) -> float:
    """Second moment as sum_k r_k / (lambda_k - tau)^2 (Parseval route)."""
    _check_tau(lattice, tau)
    lams = lattice.lambdas()
    return float(np.sum(lattice.multiplicities() / (lams - tau) ** 2))


def _min_grid_size(lattice: TorusLattice, p: int) -> int:
    a, b, _ = lattice.points()
    if a.size == 0:
        return 1
    max_comp = int(max(np.max(np.abs(a)), np.max(np.abs(b))))
    return p * max_comp + 1


def evaluate_f_on_grid(lattice: TorusLattice, tau: float, n: int) -> np.ndarray:
    """f_tau on the n x n uniform grid of the fundamental domain (complex)."""
    _check_tau(lattice, tau)
    a, b, lam = lattice.points()
    if a.size == 0:
        return np.zeros((n, n), dtype=complex)
    w = 1.0 / (lam - tau)
    # xi . x on the aligned grid reduces to (a i + b j)/n
    i = np.arange(n)
    pa = np.exp(2j * math.pi * np.outer(i, a) / n)   # (n, npts)
    pb = np.exp(2j * math.pi * np.outer(b, i) / n)   # (npts, n)
    return (pa * w) @ pb


def grid_moment(lattice: TorusLattice, tau: float, p: int, n: int | None = None) -> float:
    """p-th moment of f_tau by exact grid quadrature of the trig polynomial.

    The grid average integrates f_tau^p exactly (up to rounding) once the
    grid exceeds the Nyquist bound n > p * max|frequency component|; a
    coarser explicit n raises GridTooCoarseError.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    n_min = _min_grid_size(lattice, p)
    if n is None:
        n = n_min
    elif n < n_min:
        raise GridTooCoarseError(f"grid {n} < required {n_min} for degree-{p} powers")
    if lattice.n_points == 0:
        return 0.0
    f = evaluate_f_on_grid(lattice, tau, n)
    scale = float(np.max(np.abs(f.real))) or 1.0
    max_imag = float(np.max(np.abs(f.imag)))
    if max_imag > 1e-10 * scale:
        raise AssertionError(f"f_tau should be real-valued; max imag {max_imag:g}")
    return float(np.mean(f.real**p))


def _spectral_gap_series(lattice: TorusLattice, tau: float, tan_half_phi: float) -> float:
    # G(tau) = sum r_k (1/(lambda_k - tau) - lambda_k/(lambda_k^2+1))
    #          - tan(phi/2) sum r_k/(lambda_k^2+1), including the level lambda_0 = 0
    lams = np.concatenate([[0.0], lattice.lambdas()])
    mults = np.concatenate([[1.0], lattice.multiplicities().astype(float)])
    lhs = np.sum(mults * (1.0 / (lams - tau) - lams / (lams**2 + 1.0)))
    rhs = tan_half_phi * np.sum(mults / (lams**2 + 1.0))
    return float(lhs - rhs)


def solve_new_eigenvalues(lattice: TorusLattice, phi: float, k_range: tuple[int, int],
                          reg_terms: int = 5, rel_tol: float = 1e-10) -> list[float]:
    """Roots of the truncated spectral equation, one per interval (lambda_{k-1}, lambda_k).

    ``k_range = (k_lo, k_hi)`` is inclusive with lambda_0 = 0, so k=1 yields
    the root below the first positive eigenvalue.  The two regularized series
    are truncated at the enumerated levels; the lattice must extend at least
    ``reg_terms`` levels beyond k_hi.  Truncating the absolutely convergent
    series shifts each root by at most the first omitted term's contribution,
    which decays like r_k / lambda_k^2.
    """
    if not -math.pi < phi < math.pi:
        raise ValueError("phi must lie in (-pi, pi)")
    k_lo, k_hi = k_range
    if not 1 <= k_lo <= k_hi:
        raise ValueError("need 1 <= k_lo <= k_hi")
    n_levels = len(lattice.levels)
    if k_hi + reg_terms > n_levels:
        raise ValueError(
            f"lattice has {n_levels} levels; need {k_hi + reg_terms} "
            f"(k_hi={k_hi} plus {reg_terms} regularization levels)")
    tan_half = math.tan(phi / 2.0)
    lams = np.concatenate([[0.0], lattice.lambdas()])
    roots = []
    for k in range(k_lo, k_hi + 1):
        lo_pole, hi_pole = lams[k - 1], lams[k]
        gap = hi_pole - lo_pole
        delta = 1e-6 * gap
        lo, hi = lo_pole + delta, hi_pole - delta
        # G is increasing on the interval with poles at both ends; widen toward
        # the poles until the bracket straddles the root
        for _ in range(40):
            if _spectral_gap_series(lattice, lo, tan_half) < 0:
                break
            delta /= 16.0
            lo = lo_pole + delta
        else:
            raise RuntimeError(f"bracket failure at k={k} (low end)")
        delta = 1e-6 * gap
        for _ in range(40):
            if _spectral_gap_series(lattice, hi, tan_half) > 0:
                break
            delta /= 16.0
            hi = hi_pole - delta
        else:
            raise RuntimeError(f"bracket failure at k={k} (high end)")
        while hi - lo > rel_tol * max(abs(lo), abs(hi), 1.0):
            mid = 0.5 * (lo + hi)
            if _spectral_gap_series(lattice, mid, tan_half) < 0:
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return roots
