"""Exact partition combinatorics behind the even-moment formulas.

Everything here is built in arbitrary-precision rationals
(:class:`fractions.Fraction`):

* integer partitions in multiplicity form ``alpha = (alpha_1, alpha_2, ...)``
  with ``sum(q * alpha_q) = p``,
* the mutually inverse polynomial families ``P_p`` and ``Q_p`` obtained from
  exp/log of generating series (coefficient of ``prod X_q^alpha_q`` equals
  ``(-1)^(p-|alpha|) p!/alpha!`` for ``P_p`` and
  ``(-1)^(p-|alpha|)/|alpha| * |alpha|!/alpha! * prod (1/q!)^alpha_q`` for
  ``Q_p``),
* the positive weights ``A_p = Q_p(1, 1/2!, ..., 1/p!)``, cross-checked
  against the Taylor expansion ``ln(I_0(2X)) = sum (-1)^(p-1) A_p X^(2p)``
  of the modified Bessel function,
* the triangular maps ``Phi_p = (P_1, ..., P_p)`` and their inverses, whose
  Jacobian determinants are the constants ``prod q!``.

Float evaluation is a thin projection of the exact tables; a built table is
immutable and can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "Partition",
    "PartitionPolynomialTable",
    "enumerate_partitions",
    "build_table",
    "bessel_log_series",
    "eval_P",
    "eval_Q",
    "eval_P_many",
    "phi_map",
    "psi_map",
    "compose_check",
    "jacobian_phi",
    "jacobian_phi_prime",
]

SOFT_PMAX = 12  # beyond this, coefficients stay exact but get large; warn only


@dataclass(frozen=True)
class Partition:
    """A partition of ``weight`` in multiplicity form.

    ``parts[q-1]`` is the number of parts equal to ``q``; trailing zeros are
    trimmed, so the empty tuple is the unique partition of 0.
    """

    parts: tuple[int, ...]

    def __post_init__(self):
        if any(a < 0 for a in self.parts):
            raise ValueError("multiplicities must be non-negative")
        if self.parts and self.parts[-1] == 0:
            raise ValueError("trailing zeros must be trimmed")

    @property
    def weight(self) -> int:
        return sum(q * a for q, a in enumerate(self.parts, start=1))

    @property
    def length(self) -> int:
        """Number of parts, written ``|alpha|``."""
        return sum(self.parts)

    def factorial(self) -> int:
        """``alpha! = prod alpha_q!``."""
        out = 1
        for a in self.parts:
            out *= math.factorial(a)
        return out

    def multiplicity(self, q: int) -> int:
        return self.parts[q - 1] if 1 <= q <= len(self.parts) else 0


def _gen_partitions(weight: int, q: int) -> Iterator[tuple[int, ...]]:
    # ascending alpha_q at each level => lexicographic on (alpha_1, alpha_2, ...)
    if weight == 0:
        yield ()
        return
    if q > weight:
        return
    for a in range(weight // q + 1):
        for rest in _gen_partitions(weight - q * a, q + 1):
            yield (a,) + rest


def enumerate_partitions(p: int) -> list[Partition]:
    """All partitions of p, lexicographically ordered on (alpha_1, alpha_2, ...)."""
    if p < 0:
        raise ValueError("p must be non-negative")
    out = []
    for parts in _gen_partitions(p, 1):
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        out.append(Partition(parts))
    return out


@dataclass(frozen=True)
class PartitionPolynomialTable:
    """Exact coefficients of P_p, Q_p for p <= p_max, plus A_1..A_pmax.

    ``rows[p]`` lists ``(partition, P_coeff, Q_coeff)`` in enumeration order.
    """

    p_max: int
    rows: dict[int, list[tuple[Partition, Fraction, Fraction]]]
    A: list[Fraction]  # A[p-1] = A_p

    def A_p(self, p: int) -> Fraction:
        return self.A[p - 1]


def build_table(p_max: int) -> PartitionPolynomialTable:
    """Tabulate P_p/Q_p coefficients and A_p exactly for all p <= p_max."""
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if p_max > SOFT_PMAX:
        import warnings

        warnings.warn(
            f"p_max={p_max} > {SOFT_PMAX}: table stays exact but coefficient "
            "sizes and runtime grow quickly",
            RuntimeWarning,
            stacklevel=2,
        )
    rows: dict[int, list[tuple[Partition, Fraction, Fraction]]] = {}
    A: list[Fraction] = []
    for p in range(1, p_max + 1):
        row = []
        a_p = Fraction(0)
        for alpha in enumerate_partitions(p):
            sign = -1 if (p - alpha.length) % 2 else 1
            afact = alpha.factorial()
            p_coeff = Fraction(sign * math.factorial(p), afact)
            q_coeff = Fraction(sign * math.factorial(alpha.length), alpha.length * afact)
            inv_fact_prod = Fraction(1)
            for q, a in enumerate(alpha.parts, start=1):
                if a:
                    inv_fact_prod /= Fraction(math.factorial(q)) ** a
            q_coeff *= inv_fact_prod
            row.append((alpha, p_coeff, q_coeff))
            # A_p = Q_p(1, 1/2!, ..., 1/p!): the (1/q!)^alpha_q factors repeat
            a_p += q_coeff * inv_fact_prod
        rows[p] = row
        A.append(a_p)
    return PartitionPolynomialTable(p_max=p_max, rows=rows, A=A)


def bessel_log_series(p_max: int) -> list[Fraction]:
    """Taylor coefficients of ln(I_0(2X)) in X^2, X^4, ..., X^(2*p_max).

    Independent oracle for the A_p: composes ln(1+u) with
    ``u = I_0(2X) - 1 = sum_{p>=1} X^(2p) / (p!)^2`` by exact rational series
    arithmetic, so the returned list equals ``[(-1)^(p-1) A_p]``.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    # series in Y = X^2, index 0..p_max
    u = [Fraction(0)] * (p_max + 1)
    for p in range(1, p_max + 1):
        u[p] = Fraction(1, math.factorial(p) ** 2)

    def mul(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
        out = [Fraction(0)] * (p_max + 1)
        for i, ai in enumerate(a):
            if ai == 0:
                continue
            for j in range(0, p_max + 1 - i):
                if b[j]:
                    out[i + j] += ai * b[j]
        return out

    result = [Fraction(0)] * (p_max + 1)
    power = [Fraction(1)] + [Fraction(0)] * p_max  # u^0
    for j in range(1, p_max + 1):
        power = mul(power, u)
        sign = 1 if j % 2 == 1 else -1
        for k in range(p_max + 1):
            result[k] += Fraction(sign, j) * power[k]
    return result[1:]


def _eval_poly(row, kind: int, x: Sequence) -> object:
    # kind: 1 -> P coefficients, 2 -> Q coefficients
    is_exact = all(isinstance(v, (Fraction, int)) for v in x)
    total = Fraction(0) if is_exact else 0.0
    for alpha, p_coeff, q_coeff in row:
        coeff = p_coeff if kind == 1 else q_coeff
        if not is_exact:
            coeff = float(coeff)
        term = coeff
        for q, a in enumerate(alpha.parts, start=1):
            if a:
                term *= x[q - 1] ** a
        total += term
    return total


def eval_P(table: PartitionPolynomialTable, p: int, x: Sequence):
    """P_p(x_1, ..., x_p); exact when the inputs are rational."""
    if not 1 <= p <= table.p_max:
        raise ValueError(f"p={p} outside table range 1..{table.p_max}")
    if len(x) != p:
        raise ValueError(f"P_{p} takes {p} arguments, got {len(x)}")
    return _eval_poly(table.rows[p], 1, x)


def eval_Q(table: PartitionPolynomialTable, p: int, x: Sequence):
    """Q_p(x_1, ..., x_p); exact when the inputs are rational."""
    if not 1 <= p <= table.p_max:
        raise ValueError(f"p={p} outside table range 1..{table.p_max}")
    if len(x) != p:
        raise ValueError(f"Q_{p} takes {p} arguments, got {len(x)}")
    return _eval_poly(table.rows[p], 2, x)


def eval_P_many(table: PartitionPolynomialTable, p: int, x: np.ndarray) -> np.ndarray:
    """Vectorized float P_p over rows of ``x`` with shape (..., p)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p:
        raise ValueError(f"last axis must have length {p}")
    total = np.zeros(x.shape[:-1])
    for alpha, p_coeff, _ in table.rows[p]:
        term = np.full(x.shape[:-1], float(p_coeff))
        for q, a in enumerate(alpha.parts, start=1):
            if a:
                term = term * x[..., q - 1] ** a
        total += term
    return total


def phi_map(table: PartitionPolynomialTable, p: int, x: Sequence) -> list:
    """Phi_p(x) = (P_1(x_1), P_2(x_1,x_2), ..., P_p(x_1..x_p))."""
    return [eval_P(table, q, x[:q]) for q in range(1, p + 1)]


def psi_map(table: PartitionPolynomialTable, p: int, x: Sequence) -> list:
    """Psi_p(x) = (Q_1(x_1), ..., Q_p(x_1..x_p)), the inverse of Phi_p."""
    return [eval_Q(table, q, x[:q]) for q in range(1, p + 1)]


def _random_rational(rng: np.random.Generator, num_bound: int = 50, den_bound: int = 12) -> Fraction:
    num = int(rng.integers(-num_bound, num_bound + 1))
    den = int(rng.integers(1, den_bound + 1))
    return Fraction(num, den)


def compose_check(table: PartitionPolynomialTable, p: int, n_points: int | None = None,
                  rng: np.random.Generator | None = None) -> bool:
    """Exactly verify Q_p(Phi_p(x)) = x_p and P_p(Psi_p(x)) = x_p at random points.

    Checked by exact rational evaluation instead of symbolic expansion: the
    composed identities have degree <= p^2 in each variable, so generic point
    checks at well over p^2+1 points per variable are decisive; the default
    uses 20*p points.
    """
    if not 1 <= p <= table.p_max:
        raise ValueError(f"p={p} outside table range 1..{table.p_max}")
    if n_points is None:
        n_points = 20 * p
    if rng is None:
        rng = np.random.default_rng(0)
    for _ in range(n_points):
        x = [_random_rational(rng) for _ in range(p)]
        if eval_Q(table, p, phi_map(table, p, x)) != x[p - 1]:
            return False
        if eval_P(table, p, psi_map(table, p, x)) != x[p - 1]:
            return False
    return True


def _partial_P(row, j: int, x: Sequence) -> Fraction:
    # d P_p / d x_j evaluated exactly at x
    total = Fraction(0)
    for alpha, p_coeff, _ in row:
        a_j = alpha.multiplicity(j)
        if a_j == 0:
            continue
        term = p_coeff * a_j
        for q, a in enumerate(alpha.parts, start=1):
            e = a - 1 if q == j else a
            if e:
                term *= Fraction(x[q - 1]) ** e
        total += term
    return total


def _abs_det_fraction(mat: list[list[Fraction]]) -> Fraction:
    # exact fraction-pivot Gaussian elimination
    n = len(mat)
    m = [row[:] for row in mat]
    det = Fraction(1)
    for c in range(n):
        pivot = next((r for r in range(c, n) if m[r][c] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != c:
            m[c], m[pivot] = m[pivot], m[c]
            det = -det
        det *= m[c][c]
        inv = 1 / m[c][c]
        for r in range(c + 1, n):
            if m[r][c]:
                factor = m[r][c] * inv
                m[r] = [m[r][k] - factor * m[c][k] for k in range(n)]
    return abs(det)


def jacobian_phi(table: PartitionPolynomialTable, p: int, x: Sequence) -> Fraction:
    """|det d_x Phi_p| computed exactly from the full differential at x.

    The differential is lower triangular with constant diagonal entries
    (-1)^(q-1) q!, so the result equals prod_{q=1..p} q! at every x; the
    determinant is still evaluated from the assembled matrix so that the
    x-independence is an observable fact, not an assumption.
    """
    if not 1 <= p <= table.p_max:
        raise ValueError(f"p={p} outside table range 1..{table.p_max}")
    x = [Fraction(v) if not isinstance(v, Fraction) else v for v in x]
    mat = [[_partial_P(table.rows[i], j, x[:i]) for j in range(1, p + 1)]
           for i in range(1, p + 1)]
    return _abs_det_fraction(mat)


def jacobian_phi_prime(table: PartitionPolynomialTable, p: int, y: Sequence) -> Fraction:
    """|det d_y Phi'_p| for Phi'_p: (y_2..y_p) -> (P_2(1,y_2), ..., P_p(1,y_2..y_p)).

    Equals prod_{q=2..p} q! independently of y.
    """
    if not 2 <= p <= table.p_max:
        raise ValueError(f"p={p} outside table range 2..{table.p_max}")
    y = [Fraction(v) if not isinstance(v, Fraction) else v for v in y]
    if len(y) != p - 1:
        raise ValueError(f"Phi'_{p} takes {p - 1} arguments, got {len(y)}")
    x = [Fraction(1)] + y
    mat = [[_partial_P(table.rows[i], j, x[:i]) for j in range(2, p + 1)]
           for i in range(2, p + 1)]
    return _abs_det_fraction(mat)
