"""Shared statistical utilities: reproducible RNG streams, ECDFs, KS distances.

All experiment randomness flows through :func:`rng_stream`, which builds a
counter-based Philox generator keyed by ``(master_seed, stream_id)``.  Streams
with distinct keys are independent and their output does not depend on how
many other streams exist, so replicas can run in any order (or in parallel)
and still reproduce bit-for-bit.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "rng_stream",
    "EmpiricalDistribution",
    "ks_one_sample",
    "ks_two_sample",
    "ks_critical_value",
    "normal_cdf",
]

_MASK64 = (1 << 64) - 1


def rng_stream(master_seed: int, stream_id: int = 0) -> np.random.Generator:
    """Return an independent, reproducible generator for one logical stream.

    The Philox-4x64 bit generator is keyed with the 128-bit integer
    ``master_seed + (stream_id << 64)``; both inputs must fit in 64 bits.
    Philox is counter-based, so the stream is a pure function of the key and
    is identical across platforms.  Pinned output vectors live in the tests.
    """
    if not (0 <= master_seed <= _MASK64):
        raise ValueError(f"master_seed must be a 64-bit unsigned int, got {master_seed}")
    if not (0 <= stream_id <= _MASK64):
        raise ValueError(f"stream_id must be a 64-bit unsigned int, got {stream_id}")
    key = master_seed | (stream_id << 64)
    return np.random.Generator(np.random.Philox(key=key))


class EmpiricalDistribution:
    """Sorted sample set with ECDF, quantile and KS-distance queries.

    NaN inputs are rejected at ingestion; the ECDF is the usual
    right-continuous step function ``F_n(x) = #{x_i <= x} / n``.
    """

    def __init__(self, samples):
        arr = np.asarray(samples, dtype=np.float64)
        if arr.ndim != 1:
            arr = arr.ravel()
        if arr.size == 0:
            raise ValueError("need at least one sample")
        if np.isnan(arr).any():
            raise ValueError("NaN samples are not allowed")
        self.samples = np.sort(arr)

    @property
    def n(self) -> int:
        return self.samples.size

    def ecdf(self, x) -> np.ndarray:
        """Right-continuous empirical CDF evaluated at x (scalar or array)."""
        x = np.asarray(x, dtype=np.float64)
        return np.searchsorted(self.samples, x, side="right") / self.n

    def quantile(self, q) -> np.ndarray:
        """Lower empirical quantile: smallest sample s with F_n(s) >= q."""
        q = np.asarray(q, dtype=np.float64)
        if np.any((q < 0.0) | (q > 1.0)):
            raise ValueError("quantile levels must lie in [0, 1]")
        idx = np.clip(np.ceil(q * self.n).astype(int) - 1, 0, self.n - 1)
        return self.samples[idx]


def ks_one_sample(emp: EmpiricalDistribution, cdf) -> float:
    """One-sample KS distance sup_x |F_n(x) - F(x)| against a callable CDF.

    The supremum of the step-function deviation is attained at sample points,
    where it equals max(i/n - F(x_i), F(x_i) - (i-1)/n).
    """
    x = emp.samples
    f = np.asarray(cdf(x), dtype=np.float64)
    if f.shape != x.shape:
        raise ValueError("cdf must evaluate vectorized over the sample points")
    n = emp.n
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(max(d_plus, d_minus, 0.0))


def ks_two_sample(emp_a: EmpiricalDistribution, emp_b: EmpiricalDistribution) -> float:
    """Two-sample KS distance sup_x |F_a(x) - F_b(x)|."""
    pooled = np.concatenate([emp_a.samples, emp_b.samples])
    fa = np.searchsorted(emp_a.samples, pooled, side="right") / emp_a.n
    fb = np.searchsorted(emp_b.samples, pooled, side="right") / emp_b.n
    return float(np.max(np.abs(fa - fb)))


def ks_critical_value(alpha: float, n: int, m: int | None = None) -> float:
    """Asymptotic KS critical value at level alpha.

    Uses the Kolmogorov limit quantile c(alpha) = sqrt(-ln(alpha/2)/2); the
    one-sample threshold is c/sqrt(n), the two-sample one c*sqrt((n+m)/(n*m)).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    if m is None:
        return c / math.sqrt(n)
    return c * math.sqrt((n + m) / (n * m))


def normal_cdf(x) -> np.ndarray:
    """Standard normal CDF via erfc (shared by the Weyl CLT check)."""
    x = np.asarray(x, dtype=np.float64)
    from scipy.special import erfc

    return 0.5 * erfc(-x / math.sqrt(2.0))
