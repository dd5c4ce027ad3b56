"""Limit objects of the spectral sums: the characteristic function psi, its
one-sided stable marginals, Fourier-inversion densities, and samplers for the
limit vectors.

``psi(x) = exp(-(1/16 pi) I(x))`` with
``I(x) = int_R (1 - exp(i sum_q x_q t^(-2q))) dt``.  Substituting ``u = 1/t``
turns the whole line integral into ``2 int_0^inf (1 - e^{i Phi(u)}) / u^2 du``
with the polynomial phase ``Phi(u) = sum_q x_q u^(2q)``, which is integrated
by phase-portioned Gauss-Legendre panels up to a radius where the phase is
large, plus an integration-by-parts asymptotic tail (the exponent gains a
factor ~1/Phi per IBP order, so three orders suffice once |Phi| > ~60).
Richardson-style panel doubling provides the error estimate.

The q-th marginal has the closed stable form
``psi_q(x) = exp(-|c_q x|^(1/2q) (1 - i sign(x) tan(pi/4q)))`` with
``c_q = ((1/8 pi) cos(pi/4q) Gamma(1 - 1/2q))^(2q)``; for q = 1 that is the
Levy distribution with scale ``1/(128 pi)`` and an explicit density, used as
the oracle for both the quadrature and the Fourier inversion.

The limit vector S has no known closed joint density, so it is sampled
through its own defining limit: spectral sums of a unit-multiplicity Poisson
spectrum at a large proxy tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.special import erfc

from pointscatter.partition_polynomials import PartitionPolynomialTable, build_table, eval_Q
from pointscatter.spectrum import default_window, sample_spectrum, spectral_sums
from pointscatter.spectrum import MultiplicityFunction
from pointscatter.stats import rng_stream

__all__ = [
    "StableMarginal",
    "AccuracyError",
    "psi",
    "stable_params",
    "stable_char",
    "levy_density",
    "levy_cdf",
    "invert_density",
    "sample_limit_vector",
    "sample_limit_vectors",
    "sample_R",
    "density_Dl",
]

SIXTEEN_PI = 16.0 * math.pi


class AccuracyError(RuntimeError):
    """Raised when a quadrature cannot certify the requested tolerance; the
    message carries the achieved estimate."""


@dataclass(frozen=True)
class StableMarginal:
    q: int
    c_q: float

    @property
    def alpha(self) -> float:
        return 1.0 / (2 * self.q)

    @property
    def skew(self) -> float:
        return 1.0


def stable_params(q: int) -> StableMarginal:
    """Stable parameters (1/2q, +1, c_q, 0) of the q-th marginal."""
    if q < 1:
        raise ValueError("q must be >= 1")
    c_q = ((1.0 / (8.0 * math.pi)) * math.cos(math.pi / (4 * q))
           * math.gamma(1.0 - 1.0 / (2 * q))) ** (2 * q)
    return StableMarginal(q=q, c_q=c_q)


def stable_char(q: int, x) -> np.ndarray:
    """Closed-form characteristic function of the q-th marginal."""
    x = np.asarray(x, dtype=np.float64)
    c_q = stable_params(q).c_q
    mag = np.abs(c_q * x) ** (1.0 / (2 * q))
    return np.exp(-mag * (1.0 - 1j * np.sign(x) * math.tan(math.pi / (4 * q))))


def levy_density(t) -> np.ndarray:
    """Density of the q=1 marginal: Levy(0, 1/(128 pi))."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    pos = t > 0.0
    tp = t[pos]
    out[pos] = tp**-1.5 * np.exp(-1.0 / (256.0 * math.pi * tp)) / SIXTEEN_PI
    return out


def levy_cdf(t) -> np.ndarray:
    """CDF of Levy(0, 1/(128 pi)): erfc(1/sqrt(256 pi t)) for t > 0."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    pos = t > 0.0
    out[pos] = erfc(1.0 / np.sqrt(256.0 * math.pi * t[pos]))
    return out


# 10-point Gauss-Legendre rule on [-1, 1]
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _phi_coeffs(x: np.ndarray) -> np.ndarray:
    # Phi(u) = sum_q x_q u^(2q) as np.polyval coefficients (highest first)
    p = x.size
    coeffs = np.zeros(2 * p + 1)
    for q in range(1, p + 1):
        coeffs[2 * (p - q)] = x[q - 1]
    return coeffs


def _positive_real_roots(coeffs: np.ndarray) -> np.ndarray:
    trimmed = np.trim_zeros(coeffs, "f")
    if trimmed.size <= 1:
        return np.empty(0)
    roots = np.roots(trimmed)
    real = roots[np.abs(roots.imag) <= 1e-9 * (np.abs(roots) + 1.0)].real
    return real[real > 0.0]


def _jet_div(a: list[complex], b: list[complex]) -> list[complex]:
    # raw-derivative jets: f = a/b with a = f*b expanded by Leibniz
    f0 = a[0] / b[0]
    out = [f0]
    if len(a) > 1:
        f1 = (a[1] - f0 * b[1]) / b[0]
        out.append(f1)
    if len(a) > 2:
        out.append((a[2] - 2 * out[1] * b[1] - f0 * b[2]) / b[0])
    return out


def _ibp_tail(phi: np.ndarray, u: float) -> tuple[complex, float]:
    """(value, error_estimate) of int_u^inf e^{i Phi} v^-2 dv by 3-term IBP."""
    d1 = np.polyder(phi, 1)
    jets = [np.polyval(np.polyder(phi, k), u) for k in range(1, 5)]
    iphi = [1j * jets[0], 1j * jets[1], 1j * jets[2]]  # (i Phi')^(0..2) at u
    g = [u**-2.0, -2.0 * u**-3.0, 6.0 * u**-4.0]
    g1 = _jet_div(g, iphi)                      # G1 = g/(i Phi'), order 2
    h2 = _jet_div([g1[1], g1[2]], iphi[:2])     # H2 = G1'/(i Phi'), order 1
    h3 = _jet_div([h2[1]], iphi[:1])            # H3 = H2'/(i Phi'), order 0
    phase = np.exp(1j * np.polyval(phi, u))
    value = -phase * (g1[0] - h2[0] + h3[0])
    return value, 2.0 * abs(h3[0])


def _panel_edges(phi: np.ndarray, u_end: float, stationary: np.ndarray,
                 phase_step: float, base: int) -> np.ndarray:
    # monotone segments of Phi between stationary points; phase-equal edges
    # per segment, unioned with a resolution grid for the 1/u^2 factor
    breaks = np.concatenate([[0.0], stationary[stationary < u_end], [u_end]])
    breaks = np.unique(breaks)
    edges = [np.linspace(0.0, u_end, base + 1)]
    if u_end > 1e-3:
        edges.append(np.geomspace(min(1e-3, u_end / 8), u_end, base + 1))
    for a, b in zip(breaks[:-1], breaks[1:]):
        grid = np.linspace(a, b, 257)
        vals = np.polyval(phi, grid)
        span = abs(vals[-1] - vals[0])
        n_seg = int(min(math.ceil(span / phase_step) + 1, 120_000))
        if n_seg <= 1:
            continue
        targets = np.linspace(vals[0], vals[-1], n_seg + 1)
        if vals[-1] >= vals[0]:
            seg_edges = np.interp(targets, vals, grid)
        else:
            seg_edges = np.interp(targets[::-1], vals[::-1], grid[::-1])
        edges.append(seg_edges)
    out = np.unique(np.concatenate(edges))
    return out[(out >= 0.0) & (out <= u_end)]


def _integral_over_panels(phi: np.ndarray, edges: np.ndarray) -> complex:
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = -np.expm1(1j * np.polyval(phi, nodes)) / nodes**2
    return complex(np.sum(half * (vals @ _GL_WEIGHTS)))


def _oscillatory_exponent(x: np.ndarray, tol: float) -> tuple[complex, float]:
    """I(x) = 2 int_0^inf (1 - e^{i Phi(u)})/u^2 du with an error estimate."""
    phi = _phi_coeffs(x)
    p_eff = x.nonzero()[0].max() + 1
    lead = abs(x[p_eff - 1])
    stationary = _positive_real_roots(np.polyder(phi))
    u_guard = 1.05 * (stationary.max() if stationary.size else 0.0)

    phi_big = 60.0
    for _ in range(8):
        u_end = max((phi_big / lead) ** (1.0 / (2 * p_eff)), u_guard, 1e-6)
        tail, tail_err = _ibp_tail(phi, u_end)
        if tail_err <= 0.25 * tol or phi_big > 1e7:
            break
        phi_big *= 4.0
    coarse = _integral_over_panels(phi, _panel_edges(phi, u_end, stationary, math.pi / 2, 32))
    value = err = None
    for phase_step, base in ((math.pi / 4, 64), (math.pi / 8, 128), (math.pi / 16, 256)):
        fine = _integral_over_panels(phi, _panel_edges(phi, u_end, stationary, phase_step, base))
        err = abs(fine - coarse)
        value = fine
        coarse = fine
        if err <= 0.25 * tol:
            break
    total = 2.0 * (value + 1.0 / u_end - tail)
    total_err = 2.0 * (err + tail_err)
    # Re I >= 0 exactly (the real part of the integrand is 1 - cos >= 0);
    # clamp away quadrature noise so |psi| <= 1 holds structurally
    return complex(max(total.real, 0.0), total.imag), total_err


def psi(p: int, x, quad_tol: float = 1e-8) -> complex:
    """Limit characteristic function at x in R^p by oscillatory quadrature.

    Raises :class:`AccuracyError` if the internal error estimate for psi
    exceeds ``quad_tol``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p,):
        raise ValueError(f"x must have shape ({p},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    if quad_tol <= 0:
        raise ValueError("quad_tol must be positive")
    if not np.any(x):
        return 1.0 + 0.0j
    # exponent error of 16 pi * quad_tol maps to a psi error <= quad_tol
    exponent, exp_err = _oscillatory_exponent(x, SIXTEEN_PI * quad_tol)
    value = np.exp(-exponent / SIXTEEN_PI)
    psi_err = abs(value) * exp_err / SIXTEEN_PI
    if psi_err > quad_tol:
        raise AccuracyError(
            f"psi quadrature achieved ~{psi_err:.2e}, requested {quad_tol:.2e} at x={x}")
    return complex(value)


def _psi_spline(quad_tol: float, x_max: float, n_knots: int):
    # psi(s^2) is smooth in s (the p=1 exponent is linear in s), so a spline
    # on an s-grid interpolates accurately with moderate knot counts
    s = np.linspace(0.0, math.sqrt(x_max), n_knots)
    vals = np.empty(n_knots, dtype=complex)
    vals[0] = 1.0
    for i in range(1, n_knots):
        vals[i] = psi(1, [s[i] ** 2], quad_tol=quad_tol)
    return CubicSpline(s, vals.real), CubicSpline(s, vals.imag)


def invert_density(p: int, eval_points, quad_tol: float = 1e-3,
                   full_output: bool = False):
    """Density of the limit vector by Fourier inversion of psi.

    Only p = 1 is supported with a certified error: the integrand decays like
    exp(-sqrt(c_1 x)), so truncating at X with exp(-sqrt(c_1 X)) < 1e-8
    bounds the tail, and the oscillatory integrals
    ``(1/pi) int_0^X [Re psi cos(tx) + Im psi sin(tx)] dx`` are computed by
    adaptive QUADPACK oscillatory quadrature over a spline of the quadrature
    psi.  For p >= 2 the decay exp(-|x|^(1/2p)) pushes the truncation radius
    beyond any practical grid; use the KDE route of :func:`density_Dl`.
    """
    if p != 1:
        raise NotImplementedError(
            "certified inversion is p = 1 only: for p >= 2 the integrand decays "
            "as exp(-|x|^(1/2p)) and the truncation radius is impractical")
    t_points = np.atleast_1d(np.asarray(eval_points, dtype=np.float64))
    c1 = stable_params(1).c_q
    x_max = (math.log(1e8)) ** 2 / c1
    tail_bound = (2.0 / (math.pi * c1)) * (1.0 + math.sqrt(c1 * x_max)) \
        * math.exp(-math.sqrt(c1 * x_max))
    spl_re, spl_im = _psi_spline(quad_tol=1e-7, x_max=x_max, n_knots=1400)

    f_re = lambda x: spl_re(math.sqrt(x))
    f_im = lambda x: spl_im(math.sqrt(x))
    out = np.empty(t_points.size)
    errs = np.empty(t_points.size)
    for i, t in enumerate(t_points):
        vc, ec = quad(f_re, 0.0, x_max, weight="cos", wvar=t, limit=2000)
        vs, es = quad(f_im, 0.0, x_max, weight="sin", wvar=t, limit=2000)
        out[i] = (vc + vs) / math.pi
        errs[i] = (ec + es) / math.pi + tail_bound
    if np.any(errs > quad_tol):
        raise AccuracyError(
            f"inversion achieved ~{errs.max():.2e}, requested {quad_tol:.2e}")
    if full_output:
        return out, {"err_estimates": errs, "x_max": x_max, "tail_bound": tail_bound}
    return out


_UNIT_MULT = MultiplicityFunction.constant(1.0)


def sample_limit_vector(p: int, proxy_tau: float, window: tuple[float, float],
                        rng: np.random.Generator) -> np.ndarray:
    """One approximate draw of S = (S^1, ..., S^p).

    Uses the defining limit: spectral sums of a unit-intensity-family Poisson
    spectrum at tau = proxy_tau.  The bias decreases in proxy_tau; quantify
    it by comparing two proxy values.  proxy_tau >= 1e4 is a sensible floor.
    """
    spec = sample_spectrum(_UNIT_MULT, window, rng=rng)
    return spectral_sums(spec, proxy_tau, p).values


def sample_limit_vectors(p: int, n: int, proxy_tau: float = 1e5,
                         master_seed: int = 0, window_frac: float = 0.5,
                         stream_offset: int = 0) -> np.ndarray:
    """n independent draws of S, shape (n, p), one Philox stream per draw."""
    window = default_window(proxy_tau, window_frac)
    out = np.empty((n, p))
    for i in range(n):
        rng = rng_stream(master_seed, stream_offset + i)
        out[i] = sample_limit_vector(p, proxy_tau, window, rng)
    return out


def _quotient(samples: np.ndarray) -> np.ndarray:
    # (S^2/(S^1)^2, ..., S^p/(S^1)^p), one row per sample
    s1 = samples[:, :1]
    powers = s1 ** np.arange(2, samples.shape[1] + 1)[None, :]
    return samples[:, 1:] / powers


def sample_R(l: float, p: int, n: int, master_seed: int = 0,
             proxy_tau: float = 1e5, table: PartitionPolynomialTable | None = None,
             stream_offset: int = 0, samples: np.ndarray | None = None) -> np.ndarray:
    """n draws of the limit vector (R_2(l), ..., R_p(l)), shape (n, p-1).

    l = inf gives the constant vector (1, ..., 1).  Otherwise draws of S are
    pushed through R_q = P_q(1, A_2/(2l) S^2/(S^1)^2, ...,
    A_q/(2l)^(q-1) S^q/(S^1)^q).  Precomputed S ``samples`` may be supplied.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    if math.isinf(l):
        return np.ones((n, p - 1))
    if l <= 0:
        raise ValueError("l must be positive or inf")
    if table is None:
        table = build_table(p)
    if samples is None:
        samples = sample_limit_vectors(p, n, proxy_tau=proxy_tau,
                                       master_seed=master_seed,
                                       stream_offset=stream_offset)
    y = _quotient(samples[:, :p])
    from pointscatter.partition_polynomials import eval_P_many

    args = np.empty((samples.shape[0], p))
    args[:, 0] = 1.0
    for q in range(2, p + 1):
        args[:, q - 1] = float(table.A_p(q)) / (2.0 * l) ** (q - 1) * y[:, q - 2]
    out = np.empty((samples.shape[0], p - 1))
    for q in range(2, p + 1):
        out[:, q - 2] = eval_P_many(table, q, args[:, :q])
    return out


def density_Dl(l: float, p: int, eval_points, table: PartitionPolynomialTable | None = None,
               n_samples: int = 20000, proxy_tau: float = 1e5, master_seed: int = 0,
               quotient_samples: np.ndarray | None = None):
    """Density of (R_2(l), ..., R_p(l)) by change of variables through Q_q.

    The quotient-vector density is estimated by a Gaussian KDE (Silverman
    bandwidth, a heuristic smoothing choice) over draws of S; the value at
    ``x`` is then ``(2l)^(p(p-1)/2) prod_q (A_q q!)^-1 *
    D_quot(2l/A_2 Q_2(1,x_2), ..., (2l)^(p-1)/A_p Q_p(1,x_2..x_p))``.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    if not 0 < l < math.inf:
        raise ValueError("density exists for finite positive l only")
    if table is None:
        table = build_table(p)
    from scipy.stats import gaussian_kde

    if quotient_samples is None:
        s = sample_limit_vectors(p, n_samples, proxy_tau=proxy_tau, master_seed=master_seed)
        quotient_samples = _quotient(s)
    kde = gaussian_kde(quotient_samples.T, bw_method="silverman")

    pts = np.atleast_2d(np.asarray(eval_points, dtype=np.float64))
    if pts.shape[1] != p - 1:
        raise ValueError(f"eval points must have {p - 1} columns")
    args = np.empty_like(pts)
    for row in range(pts.shape[0]):
        xlist = [1.0] + [float(v) for v in pts[row]]
        for q in range(2, p + 1):
            args[row, q - 2] = (2.0 * l) ** (q - 1) / float(table.A_p(q)) \
                * float(eval_Q(table, q, xlist[:q]))
    jac = (2.0 * l) ** (p * (p - 1) / 2.0)
    for q in range(2, p + 1):
        jac /= float(table.A_p(q)) * math.factorial(q)
    return jac * kde(args.T)
