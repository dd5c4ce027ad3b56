"""Poisson-process spectra, spectral sums, and randomized even moments.

The mock Laplace spectrum is a Poisson point process on a window with
intensity density ``1/(16 pi m(t))``, where the multiplicity function ``m``
is one of three parametric families (constant, ``1 + C ln(1+t)^a``,
``1 + C t^a`` with ``a < 1``).  Each sampled point carries the multiplicity
``m_k = m(lambda_k)``, which is generally not an integer; every formula
downstream accepts that.

Sampling is by thinning: candidates come from a piecewise-constant envelope
of the intensity (exact, since acceptance happens with probability
rate/envelope), so windows sitting far to the right of the origin do not pay
for the global ``1/(16 pi)`` candidate rate when ``m`` is large there.

The sufficient statistics for all even moments are the spectral sums
``S^q = sum_k m_k / (lambda_k - tau)^(2q)``; the moment of order 2p is the
partition sum

    M^(2p) = (2p)! sum_alpha (-1)^(p-|alpha|) 2^|alpha| / alpha!
             prod_q (A_q S^q)^alpha_q

which algebraically equals ``(2p)!/p! P_p(2 A_1 S^1, ..., 2 A_p S^p)``; both
routes are implemented and cross-checked.  Replicas draw their own Philox
streams keyed by (master_seed, replica_id), so experiment results do not
depend on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from pointscatter.partition_polynomials import (
    PartitionPolynomialTable,
    build_table,
    eval_P_many,
)
from pointscatter.stats import rng_stream

__all__ = [
    "MultiplicityFunction",
    "PoissonSpectrum",
    "SpectralSums",
    "sample_spectrum",
    "spectral_sums",
    "randomized_even_moment",
    "even_moments_batch",
    "normalized_moments",
    "normalized_moments_scaled_form",
    "gaussian_moment",
    "sample_sums_batch",
    "default_window",
]

INTENSITY_SCALE = 1.0 / (16.0 * math.pi)
TAU_GUARD = 1e-9


@dataclass(frozen=True)
class MultiplicityFunction:
    """One of the admissible multiplicity families m: [0, inf) -> [1, inf).

    kind "const": m = c;  "logpow": m = 1 + C ln(1+t)^a (C >= 0, a >= 0);
    "pow": m = 1 + C t^a (C >= 0, 0 <= a < 1, so that m' decays).
    """

    kind: str
    c: float = 1.0
    a: float = 0.0

    def __post_init__(self):
        if self.kind == "const":
            if self.c < 1.0:
                raise ValueError("constant multiplicity must be >= 1")
        elif self.kind == "logpow":
            if self.c < 0.0 or self.a < 0.0:
                raise ValueError("logpow needs C >= 0 and a >= 0")
        elif self.kind == "pow":
            if self.c < 0.0:
                raise ValueError("pow needs C >= 0")
            if not 0.0 <= self.a < 1.0:
                raise ValueError("pow exponent must satisfy 0 <= a < 1")
        else:
            raise ValueError(f"unknown multiplicity kind {self.kind!r}")

    @classmethod
    def constant(cls, c: float = 1.0) -> "MultiplicityFunction":
        return cls("const", c=float(c))

    @classmethod
    def one_plus_log_pow(cls, C: float, a: float) -> "MultiplicityFunction":
        return cls("logpow", c=float(C), a=float(a))

    @classmethod
    def one_plus_pow(cls, C: float, a: float) -> "MultiplicityFunction":
        return cls("pow", c=float(C), a=float(a))

    @classmethod
    def parse(cls, text: str) -> "MultiplicityFunction":
        """Parse CLI syntax const:c | logpow:C,a | pow:C,a."""
        kind, _, args = text.partition(":")
        try:
            if kind == "const":
                return cls.constant(float(args or 1.0))
            vals = [float(v) for v in args.split(",")]
            if kind == "logpow":
                return cls.one_plus_log_pow(*vals)
            if kind == "pow":
                return cls.one_plus_pow(*vals)
        except (TypeError, ValueError) as err:
            raise ValueError(f"bad multiplicity spec {text!r}: {err}") from None
        raise ValueError(f"bad multiplicity spec {text!r}")

    def label(self) -> str:
        if self.kind == "const":
            return f"const:{self.c:g}"
        return f"{self.kind}:{self.c:g},{self.a:g}"

    def value(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "const":
            return np.full_like(t, self.c)
        if self.kind == "logpow":
            return 1.0 + self.c * np.log1p(t) ** self.a
        return 1.0 + self.c * t**self.a

    def derivative(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "const" or self.c == 0.0 or self.a == 0.0:
            return np.zeros_like(t)
        if self.kind == "logpow":
            return self.c * self.a * np.log1p(t) ** (self.a - 1.0) / (1.0 + t)
        return self.c * self.a * t ** (self.a - 1.0)

    def integral(self, lam: float) -> float:
        """Antiderivative int_0^lam m(t) dt (closed form except logpow's tail)."""
        lam = float(lam)
        if lam < 0:
            raise ValueError("lam must be >= 0")
        if self.kind == "const":
            return self.c * lam
        if self.kind == "pow":
            return lam + self.c * lam ** (1.0 + self.a) / (1.0 + self.a)
        if self.a == 0.0 or self.c == 0.0:
            return (1.0 + self.c) * lam
        # int_0^lam ln(1+t)^a dt via u = ln(1+t): int_0^L u^a e^u du - no
        # elementary closed form for general a, integrate numerically
        L = math.log1p(lam)
        val, _ = quad(lambda u: u**self.a * math.exp(u), 0.0, L, limit=200)
        return lam + self.c * val

    def check_derivative_decay(self, beta: float | None = None,
                               t_range: tuple[float, float] = (1.0, 1e12)) -> float:
        """Max of |m'(t)| t^beta on a log grid; finite for an admissible family."""
        if beta is None:
            beta = (1.0 - self.a) if self.kind == "pow" else 0.9
        t = np.geomspace(t_range[0], t_range[1], 200)
        return float(np.max(np.abs(self.derivative(t)) * t**beta))


@dataclass(frozen=True)
class PoissonSpectrum:
    window: tuple[float, float]
    points: np.ndarray
    mults: np.ndarray
    master_seed: int | None = None
    replica_id: int | None = None

    @property
    def n(self) -> int:
        return self.points.size


def _envelope_cells(m: MultiplicityFunction, lo: float, hi: float, n_cells: int):
    edges = np.linspace(lo, hi, n_cells + 1)
    # all families are non-decreasing, so the rate 1/(16 pi m) is non-increasing
    # and its sup over a cell is attained at the left edge; keep the max of
    # both edges anyway so a future non-monotone family fails loudly here
    rate_edges = INTENSITY_SCALE / m.value(edges)
    rates = np.maximum(rate_edges[:-1], rate_edges[1:])
    return edges, rates


def sample_spectrum(m: MultiplicityFunction, window: tuple[float, float],
                    rng: np.random.Generator | None = None,
                    master_seed: int | None = None, replica_id: int = 0,
                    n_cells: int = 64) -> PoissonSpectrum:
    """Exact Poisson sample on the window by envelope thinning.

    Candidates are drawn from a homogeneous process on each envelope cell and
    accepted with probability rate(t)/envelope, so sub-interval counts are
    exactly Poisson with mass integral of ``1/(16 pi m)``.
    """
    lo, hi = float(window[0]), float(window[1])
    if not 0.0 <= lo <= hi:
        raise ValueError("window must satisfy 0 <= lo <= hi")
    if rng is None:
        if master_seed is None:
            raise ValueError("need an rng or a master_seed")
        rng = rng_stream(master_seed, replica_id)
    if hi == lo:
        pts = np.empty(0)
    else:
        edges, env = _envelope_cells(m, lo, hi, n_cells)
        widths = np.diff(edges)
        counts = rng.poisson(env * widths)
        total = int(counts.sum())
        u = rng.random(total)
        cell = np.repeat(np.arange(n_cells), counts)
        cand = edges[cell] + u * widths[cell]
        accept = rng.random(total) * env[cell] <= INTENSITY_SCALE / m.value(cand)
        pts = np.sort(cand[accept])
    mults = m.value(pts)
    pts.flags.writeable = False
    mults.flags.writeable = False
    return PoissonSpectrum(window=(lo, hi), points=pts, mults=mults,
                           master_seed=master_seed,
                           replica_id=replica_id if master_seed is not None else None)


@dataclass(frozen=True)
class SpectralSums:
    tau: float
    values: np.ndarray           # S^1 .. S^p
    tail_bias_bound: np.ndarray  # expected mass of the two omitted tails, per q

    @property
    def p_max(self) -> int:
        return self.values.size

    def s(self, q: int) -> float:
        return float(self.values[q - 1])


def spectral_sums(spec: PoissonSpectrum, tau: float, p_max: int) -> SpectralSums:
    """S^q = sum_k m_k/(lambda_k - tau)^(2q) for q <= p_max, with tail bounds.

    tau must sit strictly inside the window; the reported bias bound for each
    q is the expected mass of the two omitted tails,
    2 / (16 pi (2q-1) W^(2q-1)) with W the distance from tau to the nearest
    window edge (the intensity density is at most 1/(16 pi)).
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    lo, hi = spec.window
    margin = min(tau - lo, hi - tau)
    if margin <= 0:
        raise ValueError(f"tau={tau} outside the open window ({lo}, {hi})")
    if spec.n and np.min(np.abs(spec.points - tau)) < TAU_GUARD:
        raise ValueError(f"tau={tau} collides with a sampled point")
    d2 = (spec.points - tau) ** -2 if spec.n else np.empty(0)
    values = np.empty(p_max)
    power = np.ones_like(d2)
    for q in range(1, p_max + 1):
        power = power * d2
        values[q - 1] = np.sum(spec.mults * power) if spec.n else 0.0
    q = np.arange(1, p_max + 1)
    tail = 2.0 * INTENSITY_SCALE * margin ** (1 - 2 * q) / (2 * q - 1)
    return SpectralSums(tau=float(tau), values=values, tail_bias_bound=tail)


@lru_cache(maxsize=32)
def _cached_table(p_max: int) -> PartitionPolynomialTable:
    return build_table(p_max)


def randomized_even_moment(sums: SpectralSums, table: PartitionPolynomialTable,
                           p: int, route: str = "partition") -> float:
    """Randomized moment of order 2p from the spectral sums.

    route "partition" evaluates the defining alternating partition sum;
    route "polynomial" evaluates (2p)!/p! P_p(2 A_1 S^1, ..., 2 A_p S^p).
    The two are algebraically identical; keeping both exposes any floating
    disagreement.  For non-integer multiplicities the value can be negative;
    that is recorded, not rejected.
    """
    if p > sums.p_max or p > table.p_max:
        raise ValueError(f"p={p} exceeds available sums or table")
    s = sums.values[:p]
    a_vals = np.array([float(table.A_p(q)) for q in range(1, p + 1)])
    if route == "polynomial":
        args = 2.0 * a_vals * s
        pval = eval_P_many(table, p, args[None, :])[0]
        return math.factorial(2 * p) / math.factorial(p) * float(pval)
    if route != "partition":
        raise ValueError(f"unknown route {route!r}")
    total = 0.0
    for alpha, _, _ in table.rows[p]:
        sign = -1.0 if (p - alpha.length) % 2 else 1.0
        term = sign * 2.0**alpha.length / alpha.factorial()
        for q, a_q in enumerate(alpha.parts, start=1):
            if a_q:
                term *= (a_vals[q - 1] * s[q - 1]) ** a_q
        total += term
    return math.factorial(2 * p) * total


def even_moments_batch(s_matrix: np.ndarray, table: PartitionPolynomialTable,
                       p: int, route: str = "partition") -> np.ndarray:
    """Vectorized M^(2p) over rows of spectral-sum values, shape (n, >=p)."""
    s_matrix = np.asarray(s_matrix, dtype=np.float64)
    s = s_matrix[:, :p]
    a_vals = np.array([float(table.A_p(q)) for q in range(1, p + 1)])
    if route == "polynomial":
        pvals = eval_P_many(table, p, 2.0 * a_vals * s)
        return math.factorial(2 * p) / math.factorial(p) * pvals
    total = np.zeros(s.shape[0])
    for alpha, _, _ in table.rows[p]:
        sign = -1.0 if (p - alpha.length) % 2 else 1.0
        term = np.full(s.shape[0], sign * 2.0**alpha.length / alpha.factorial())
        for q, a_q in enumerate(alpha.parts, start=1):
            if a_q:
                term = term * (a_vals[q - 1] * s[:, q - 1]) ** a_q
        total += term
    return math.factorial(2 * p) * total


def normalized_moments(sums: SpectralSums, table: PartitionPolynomialTable,
                       p_max: int) -> np.ndarray:
    """(M^4/(M^2)^2, ..., M^(2 p_max)/(M^2)^p_max); requires S^1 > 0."""
    if sums.s(1) <= 0.0:
        raise ValueError("normalization requires S^1 > 0")
    m2 = randomized_even_moment(sums, table, 1)
    return np.array([
        randomized_even_moment(sums, table, p) / m2**p for p in range(2, p_max + 1)
    ])


def normalized_moments_scaled_form(sums: SpectralSums, table: PartitionPolynomialTable,
                                   p_max: int) -> np.ndarray:
    """Same vector via mu_2p * P_p(1, 2 A_2 S^2/(2 S^1)^2, ...): the route that
    feeds the limit objects.  Must agree with :func:`normalized_moments` to
    rounding."""
    s1 = sums.s(1)
    if s1 <= 0.0:
        raise ValueError("normalization requires S^1 > 0")
    out = np.empty(p_max - 1)
    for p in range(2, p_max + 1):
        args = np.array([
            2.0 * float(table.A_p(q)) * sums.s(q) / (2.0 * s1) ** q
            for q in range(1, p + 1)
        ])
        args[0] = 1.0
        out[p - 2] = gaussian_moment(2 * p) * eval_P_many(table, p, args[None, :])[0]
    return out


def gaussian_moment(order: int) -> int:
    """Exact moments of the standard Gaussian: odd 0, even (2p)!/(2^p p!)."""
    if order < 0:
        raise ValueError("order must be >= 0")
    if order % 2:
        return 0
    p = order // 2
    return math.factorial(2 * p) // (2**p * math.factorial(p))


def default_window(tau: float, window_frac: float = 0.5) -> tuple[float, float]:
    """Window [max(0, tau - W), tau + W] with W = window_frac * tau."""
    w = window_frac * tau
    return (max(0.0, tau - w), tau + w)


def sample_sums_batch(m: MultiplicityFunction, tau: float, p_max: int,
                      n_replicas: int, master_seed: int,
                      window_frac: float = 0.5, stream_offset: int = 0) -> np.ndarray:
    """Spectral sums for independent replicas, shape (n_replicas, p_max).

    Replica i uses the Philox stream (master_seed, stream_offset + i); tau is
    fixed before sampling, per the model's sampling order.
    """
    window = default_window(tau, window_frac)
    out = np.empty((n_replicas, p_max))
    for i in range(n_replicas):
        spec = sample_spectrum(m, window, master_seed=master_seed,
                               replica_id=stream_offset + i)
        out[i] = spectral_sums(spec, tau, p_max).values
    return out
