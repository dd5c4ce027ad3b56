"""Figure rendering for the report path.  Pure presentation: every function
takes precomputed arrays and writes one PNG."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_coefficient_decay",
    "plot_counting_function",
    "plot_ecdf_vs_cdf",
    "plot_psi_check",
    "plot_density_inversion",
    "plot_weyl_moments",
    "plot_clt_histogram",
    "plot_moment_convergence",
    "plot_fourth_moment_match",
]

_DPI = 150


def _finish(fig, path: str):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_coefficient_decay(a_values, path: str):
    p = np.arange(1, len(a_values) + 1)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.semilogy(p, [float(a) for a in a_values], "o-", label="$A_p$")
    ax.semilogy(p, 1.0 / p**2, "--", color="gray", label="$1/p^2$")
    ax.set_xlabel("p")
    ax.set_ylabel("$A_p$")
    ax.legend()
    _finish(fig, path)


def plot_counting_function(lams, counts, path: str):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.step(lams, counts, where="post", label=r"$\mathcal{N}(\lambda)$")
    ax.plot(lams, 1 + np.asarray(lams) / (4 * math.pi), "--", label=r"$1+\lambda/4\pi$")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("count")
    ax.legend()
    _finish(fig, path)


def plot_ecdf_vs_cdf(samples, cdf, path: str, xlabel: str = "$S^1$"):
    x = np.sort(np.asarray(samples))
    ecdf = np.arange(1, x.size + 1) / x.size
    grid = np.geomspace(max(x[0], 1e-6), x[-1], 400)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.semilogx(x, ecdf, label="ECDF")
    ax.semilogx(grid, cdf(grid), "--", label="limit CDF")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("probability")
    ax.legend()
    _finish(fig, path)


def plot_psi_check(xs, quad_abs, closed_abs, err, path: str):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.loglog(xs, closed_abs, "--", label="closed form")
    ax1.loglog(xs, quad_abs, ".", ms=4, label="quadrature")
    ax1.set_xlabel("$x$")
    ax1.set_ylabel(r"$|\psi_1(x)|$")
    ax1.legend()
    ax2.loglog(xs, np.maximum(err, 1e-17), ".", ms=4)
    ax2.set_xlabel("$x$")
    ax2.set_ylabel("abs. difference")
    _finish(fig, path)


def plot_density_inversion(t, inverted, reference, path: str):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(t, reference, "--", label="Levy density")
    ax.plot(t, inverted, ".", ms=5, label="Fourier inversion")
    ax.set_xlabel("t")
    ax.set_ylabel("density")
    ax.legend()
    _finish(fig, path)


def plot_weyl_moments(rows_by_family, path: str):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    for label, rows in rows_by_family.items():
        lam = [r["lambda"] for r in rows]
        ax1.loglog(lam, [r["mean_emp"] for r in rows], "o", label=label)
        ax2.loglog(lam, [r["var_emp"] for r in rows], "o", label=label)
        ax1.loglog(lam, [r["mean_theory"] for r in rows], "k--", lw=0.8)
        ax2.loglog(lam, [r["var_theory"] for r in rows], "k--", lw=0.8)
    ax1.set_xlabel(r"$\lambda$")
    ax1.set_ylabel("mean count")
    ax2.set_xlabel(r"$\lambda$")
    ax2.set_ylabel("count variance")
    ax1.legend(fontsize=7)
    _finish(fig, path)


def plot_clt_histogram(standardized, path: str):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.hist(standardized, bins=40, density=True, alpha=0.6, label="standardized counts")
    grid = np.linspace(-4, 4, 200)
    ax.plot(grid, np.exp(-grid**2 / 2) / math.sqrt(2 * math.pi), "--", label="N(0,1)")
    ax.set_xlabel("z")
    ax.set_ylabel("density")
    ax.legend()
    _finish(fig, path)


def plot_moment_convergence(taus, medians, iqr_lo, iqr_hi, target, path: str):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.errorbar(taus, medians,
                yerr=[np.array(medians) - iqr_lo, iqr_hi - np.array(medians)],
                fmt="o-", capsize=4, label="replica median (IQR)")
    ax.axhline(target, color="gray", ls="--", label=f"limit {target:g}")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel("normalized 4th moment")
    ax.legend()
    _finish(fig, path)


def plot_fourth_moment_match(moment_samples, r_samples, path: str):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    bins = np.linspace(0, 3.2, 60)
    ax.hist(moment_samples, bins=bins, density=True, alpha=0.5,
            label=r"$M^4_\tau/(M^2_\tau)^2$")
    ax.hist(r_samples, bins=bins, density=True, alpha=0.5,
            histtype="step", lw=1.6, label=r"$3 R_2(l)$")
    ax.set_xlabel("normalized 4th moment")
    ax.set_ylabel("density")
    ax.legend()
    _finish(fig, path)
