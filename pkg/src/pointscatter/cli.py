"""Single entry point exposing the experiments and table dumps.

Subcommands: coeffs, torus, na-check, simulate, weyl, limit, report.
Every run writes its delimited output plus a ``*.config.json`` sidecar with
the resolved parameters; re-running a sidecar's parameters reproduces the
output bit-for-bit, because all randomness is drawn from per-replica Philox
streams keyed by (seed, replica id) and reductions are ordered by replica id
regardless of ``--threads``.

Exit codes: 0 success, 1 validation error, 2 accuracy-not-met.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from pointscatter import __version__
from pointscatter.partition_polynomials import (
    bessel_log_series,
    build_table,
    enumerate_partitions,
)
from pointscatter.spectrum import (
    MultiplicityFunction,
    default_window,
    even_moments_batch,
    sample_spectrum,
    sample_sums_batch,
    spectral_sums,
)
from pointscatter.stats import (
    EmpiricalDistribution,
    ks_critical_value,
    ks_one_sample,
    ks_two_sample,
    normal_cdf,
    rng_stream,
)
from pointscatter import limits, torus, wavevectors, weyl

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ACCURACY = 2


class _Parser(argparse.ArgumentParser):
    # argparse's default usage-error exit code is 2; remap to 1 so that 2
    # stays reserved for accuracy failures
    def error(self, message):
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_config(out_path: str, config: dict) -> str:
    base, _ = os.path.splitext(out_path)
    sidecar = base + ".config.json"
    payload = {"version": __version__, **config}
    with open(sidecar, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


def _frac_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------- coeffs

def cmd_coeffs(args) -> int:
    table = build_table(args.pmax)
    oracle = bessel_log_series(args.pmax)
    records = []
    for p in range(1, args.pmax + 1):
        for alpha, p_coeff, q_coeff in table.rows[p]:
            parts = " ".join(str(v) for v in alpha.parts)
            records.append((p, parts, _frac_str(p_coeff), _frac_str(q_coeff)))
    a_rows = [(p, _frac_str(table.A_p(p)), _frac_str((-1) ** (p - 1) * oracle[p - 1]))
              for p in range(1, args.pmax + 1)]
    config = {"subcommand": "coeffs", "pmax": args.pmax, "format": args.format,
              "out": args.out}
    if args.format == "json":
        payload = {
            "p_max": args.pmax,
            "polynomials": [
                {"p": p, "alpha": parts, "P": pc, "Q": qc}
                for p, parts, pc, qc in records
            ],
            "A": [{"p": p, "value": v, "bessel_oracle": o} for p, v, o in a_rows],
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        rows = [("coeff", p, parts, pc, qc) for p, parts, pc, qc in records]
        rows += [("A", p, "", v, o) for p, v, o in a_rows]
        _write_csv(args.out, ["kind", "p", "alpha", "value_P_or_A", "value_Q_or_oracle"], rows)
    _write_config(args.out, config)
    mismatch = any(table.A_p(p) != (-1) ** (p - 1) * oracle[p - 1]
                   for p in range(1, args.pmax + 1))
    return EXIT_ACCURACY if mismatch else EXIT_OK


# ---------------------------------------------------------------- torus

def cmd_torus(args) -> int:
    try:
        alpha_sq = Fraction(args.alpha_sq)
    except (ValueError, ZeroDivisionError):
        print(f"invalid --alpha-sq {args.alpha_sq!r}", file=sys.stderr)
        return EXIT_VALIDATION
    if alpha_sq <= 0:
        print("--alpha-sq must be positive", file=sys.stderr)
        return EXIT_VALIDATION
    moments = sorted({int(v) for v in args.moments.split(",")}) if args.moments else []
    if any(p < 1 for p in moments):
        print("--moments entries must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    lattice = torus.build_lattice(alpha_sq, args.cutoff)
    prefix = args.out
    level_rows = [(k, _fmt(lv.lam), lv.r)
                  for k, lv in enumerate(lattice.levels, start=1)]
    _write_csv(prefix + "_levels.csv", ["k", "lambda_k", "r_k"], level_rows)

    worst = 0.0
    moment_rows = []
    for p in moments:
        formula = torus.deterministic_moment(lattice, args.tau, p)
        grid = torus.grid_moment(lattice, args.tau, p)
        rel = abs(formula - grid) / max(abs(grid), 1e-300)
        worst = max(worst, rel)
        moment_rows.append((p, _fmt(formula), _fmt(grid), _fmt(rel)))
    if moments:
        _write_csv(prefix + "_moments.csv", ["p", "M_p_formula", "M_p_grid", "rel_err"],
                   moment_rows)
    if args.phi is not None:
        k_hi = max(1, min(args.k_max, len(lattice.levels) - args.reg_terms))
        roots = torus.solve_new_eigenvalues(lattice, args.phi, (1, k_hi),
                                            reg_terms=args.reg_terms)
        _write_csv(prefix + "_new_eigenvalues.csv", ["k", "tau_k"],
                   [(k, _fmt(r)) for k, r in enumerate(roots, start=1)])
    _write_config(prefix + ".csv", {
        "subcommand": "torus", "alpha_sq": str(alpha_sq), "cutoff": args.cutoff,
        "moments": moments, "tau": args.tau, "phi": args.phi,
        "k_max": args.k_max, "reg_terms": args.reg_terms, "out": prefix,
    })
    if moments and worst > 1e-9:
        print(f"moment cross-check failed: rel_err={worst:g}", file=sys.stderr)
        return EXIT_ACCURACY
    return EXIT_OK


# ---------------------------------------------------------------- na-check

def random_na_config(rng, max_levels: int, variant: str,
                     tuple_cap: int = 200_000):
    """One random (system, profile) pair small enough to brute force."""
    n_levels = int(rng.integers(1, max_levels + 1))
    lams = np.sort(rng.uniform(1.0, 200.0, size=n_levels))
    while np.any(np.diff(lams) <= 1e-6):
        lams = np.sort(rng.uniform(1.0, 200.0, size=n_levels))
    mults = [int(v) for v in rng.integers(1, 4, size=n_levels)]
    system = wavevectors.sample_system(lams, mults, variant, rng)
    for _ in range(200):
        a = [int(v) for v in rng.integers(0, 7, size=n_levels)]
        total = 1
        for a_k, vecs in zip(a, system.vectors):
            total *= vecs.shape[0] ** a_k
        if 0 < sum(a) <= 8 and total <= tuple_cap:
            return system, a
    return system, [2] + [0] * (n_levels - 1)


def cmd_na_check(args) -> int:
    variants = ["rectangular", "square"] if args.variant == "both" else \
        ["square" if args.variant == "square" else "rectangular"]
    mismatches = []
    t0 = time.time()
    checked = 0
    for variant in variants:
        for trial in range(args.trials):
            rng = rng_stream(args.seed, trial + (10**6 if variant == "square" else 0))
            system, a = random_na_config(rng, args.max_levels, variant)
            brute = wavevectors.na_bruteforce(system, a)
            formula = wavevectors.na_formula(a, system.counts)
            checked += 1
            if brute != formula:
                mismatches.append({
                    "variant": variant, "trial": trial, "a": a,
                    "multiplicities": list(system.counts),
                    "bruteforce": brute, "formula": formula,
                })
    payload = {
        "trials_per_variant": args.trials,
        "variants": variants,
        "checked": checked,
        "elapsed_s": round(time.time() - t0, 3),
        "mismatches": mismatches,
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")
    _write_config(args.out, {
        "subcommand": "na-check", "trials": args.trials, "max_levels": args.max_levels,
        "variant": args.variant, "seed": args.seed, "out": args.out,
    })
    print(f"na-check: {checked} configurations, {len(mismatches)} mismatches")
    return EXIT_ACCURACY if mismatches else EXIT_OK


# ---------------------------------------------------------------- simulate

def _simulate_chunk(payload) -> list[list[float]]:
    m_label, tau, pmax, window_frac, seed, start, count = payload
    m = MultiplicityFunction.parse(m_label)
    table = build_table(pmax)
    window = default_window(tau, window_frac)
    rows = []
    for replica in range(start, start + count):
        spec = sample_spectrum(m, window, master_seed=seed, replica_id=replica)
        sums = spectral_sums(spec, tau, pmax)
        s = sums.values
        moments = [even_moments_batch(s[None, :], table, q)[0] for q in range(1, pmax + 1)]
        if s[0] > 0:
            norms = [moments[q - 1] / moments[0] ** q for q in range(2, pmax + 1)]
        else:
            norms = [math.nan] * (pmax - 1)
        rows.append([replica, *s, *moments, *norms, *sums.tail_bias_bound])
    return rows


def cmd_simulate(args) -> int:
    try:
        m = MultiplicityFunction.parse(args.m)
    except ValueError as err:
        print(err, file=sys.stderr)
        return EXIT_VALIDATION
    if args.pmax < 1 or args.replicas < 1 or not 0 < args.window_frac <= 1 or args.tau <= 0:
        print("need pmax >= 1, replicas >= 1, 0 < window-frac <= 1, tau > 0",
              file=sys.stderr)
        return EXIT_VALIDATION
    chunks = _split_chunks(args.replicas, args.threads)
    payloads = [(m.label(), args.tau, args.pmax, args.window_frac, args.seed,
                 start, count) for start, count in chunks]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_simulate_chunk, payloads))
    else:
        results = [_simulate_chunk(p) for p in payloads]
    header = (["replica"]
              + [f"S{q}" for q in range(1, args.pmax + 1)]
              + [f"M{2*q}" for q in range(1, args.pmax + 1)]
              + [f"norm{2*q}" for q in range(2, args.pmax + 1)]
              + [f"tail_bias_{q}" for q in range(1, args.pmax + 1)])
    rows = [[r[0]] + [_fmt(v) for v in r[1:]] for chunk in results for r in chunk]
    _write_csv(args.out, header, rows)
    _write_config(args.out, {
        "subcommand": "simulate", "m": m.label(), "tau": args.tau, "pmax": args.pmax,
        "replicas": args.replicas, "window_frac": args.window_frac,
        "seed": args.seed, "out": args.out,
    })
    return EXIT_OK


def _split_chunks(n: int, threads: int) -> list[tuple[int, int]]:
    threads = max(1, threads)
    size = math.ceil(n / threads)
    return [(start, min(size, n - start)) for start in range(0, n, size)]


# ---------------------------------------------------------------- weyl

def cmd_weyl(args) -> int:
    try:
        m = MultiplicityFunction.parse(args.m)
        lambdas = [float(v) for v in args.lambdas.split(",")]
    except ValueError as err:
        print(err, file=sys.stderr)
        return EXIT_VALIDATION
    if any(v <= 0 for v in lambdas) or args.replicas < 2:
        print("lambdas must be positive and replicas >= 2", file=sys.stderr)
        return EXIT_VALIDATION
    rows = []
    for j, lam in enumerate(lambdas):
        counts = weyl.replica_counts(m, lam, args.replicas, args.seed,
                                     stream_offset=j * args.replicas)
        mean_th, var_th = weyl.weyl_moments(m, lam)
        mean_emp = float(np.mean(counts))
        var_emp = float(np.var(counts, ddof=1))
        se_mean = math.sqrt(var_th / args.replicas)
        se_var = var_th * math.sqrt(2.0 / (args.replicas - 1))
        std = (counts - mean_th) / math.sqrt(var_th)
        ks = ks_one_sample(EmpiricalDistribution(std), normal_cdf)
        rows.append({
            "lambda": lam, "replicas": args.replicas,
            "mean_emp": mean_emp, "mean_theory": mean_th,
            "mean_z": (mean_emp - mean_th) / se_mean,
            "var_emp": var_emp, "var_theory": var_th,
            "var_z": (var_emp - var_th) / se_var,
            "ks_normal": ks,
            "mean_ratio_rel_dev": abs(mean_emp / lam - 1 / (4 * math.pi)) / (1 / (4 * math.pi)),
        })
    header = list(rows[0].keys())
    _write_csv(args.out, header, [[_fmt(r[k]) if isinstance(r[k], float) else r[k]
                                   for k in header] for r in rows])
    _write_config(args.out, {
        "subcommand": "weyl", "m": m.label(), "lambdas": lambdas,
        "replicas": args.replicas, "seed": args.seed, "out": args.out,
    })
    worst = max(max(abs(r["mean_z"]), abs(r["var_z"])) for r in rows)
    return EXIT_ACCURACY if worst > 6.0 else EXIT_OK


# ---------------------------------------------------------------- limit

def cmd_limit(args) -> int:
    if args.mode == "psi":
        if not args.points:
            print("limit psi requires --points FILE", file=sys.stderr)
            return EXIT_VALIDATION
        pts = np.loadtxt(args.points, delimiter=",", comments="#", ndmin=2)
        if pts.shape[1] != args.p:
            print(f"points file must have {args.p} columns", file=sys.stderr)
            return EXIT_VALIDATION
        rows = []
        for x in pts:
            val = limits.psi(args.p, x, quad_tol=args.quad_tol)
            rows.append([*(_fmt(v) for v in x), _fmt(val.real), _fmt(val.imag), _fmt(abs(val))])
        header = [f"x{q}" for q in range(1, args.p + 1)] + ["psi_re", "psi_im", "psi_abs"]
        _write_csv(args.out, header, rows)
        _write_config(args.out, {
            "subcommand": "limit", "mode": "psi", "p": args.p, "points": args.points,
            "quad_tol": args.quad_tol, "out": args.out,
        })
        return EXIT_OK

    l_value = math.inf if args.l in ("inf", "Inf", "INF") else float(args.l)
    if args.p < 2 or args.n < 1 or args.proxy_tau < 1e4:
        print("need p >= 2, n >= 1, proxy-tau >= 1e4", file=sys.stderr)
        return EXIT_VALIDATION
    table = build_table(args.p)
    samples = limits.sample_limit_vectors(args.p, args.n, proxy_tau=args.proxy_tau,
                                          master_seed=args.seed)
    r_vals = sample_R_from(samples, l_value, args.p, table)
    header = ([f"S{q}" for q in range(1, args.p + 1)]
              + [f"R{q}" for q in range(2, args.p + 1)])
    rows = [[_fmt(v) for v in (*samples[i], *r_vals[i])] for i in range(args.n)]
    _write_csv(args.out, header, rows)
    _write_config(args.out, {
        "subcommand": "limit", "mode": "sample", "p": args.p,
        "l": "inf" if math.isinf(l_value) else l_value, "n": args.n,
        "proxy_tau": args.proxy_tau, "seed": args.seed, "out": args.out,
    })
    return EXIT_OK


def sample_R_from(samples: np.ndarray, l_value: float, p: int, table) -> np.ndarray:
    if math.isinf(l_value):
        return np.ones((samples.shape[0], p - 1))
    return limits.sample_R(l_value, p, samples.shape[0], table=table, samples=samples)


# ---------------------------------------------------------------- report

def cmd_report(args) -> int:
    from pointscatter import plots

    os.makedirs(args.out_dir, exist_ok=True)
    scale = 4 if args.quick else 1
    seed = args.seed
    results: dict[str, dict] = {}
    figures: list[str] = []

    def fig_path(name: str) -> str:
        path = os.path.join(args.out_dir, name)
        figures.append(path)
        return path

    # exact combinatorics
    pmax = 10
    table = build_table(pmax)
    oracle = bessel_log_series(pmax)
    coeff_ok = all(table.A_p(p) == (-1) ** (p - 1) * oracle[p - 1] and table.A_p(p) > 0
                   for p in range(1, pmax + 1))
    results["coefficients"] = {
        "p_max": pmax, "pass": coeff_ok,
        "A": [_frac_str(table.A_p(p)) for p in range(1, pmax + 1)],
    }
    plots.plot_coefficient_decay(table.A, fig_path("coefficient_decay.png"))

    # torus oracle
    lattice = torus.build_lattice(1, 4 * math.pi**2 * 50)
    torus_rel = max(
        abs(torus.deterministic_moment(lattice, 17.0, p) - torus.grid_moment(lattice, 17.0, p))
        / abs(torus.grid_moment(lattice, 17.0, p)) for p in (2, 3, 4))
    results["torus_oracle"] = {"points": lattice.n_points,
                               "max_rel_err_p234": torus_rel, "pass": torus_rel < 1e-10}
    lams = lattice.lambdas()
    counts = 1 + np.cumsum(lattice.multiplicities())
    plots.plot_counting_function(lams, counts, fig_path("deterministic_counting.png"))

    # N_a equivalence (small battery)
    mism = 0
    trials = max(60 // scale, 10)
    for variant in ("rectangular", "square"):
        for trial in range(trials):
            rng = rng_stream(seed, 5000 + trial + (10**6 if variant == "square" else 0))
            system, a = random_na_config(rng, 4, variant)
            if wavevectors.na_bruteforce(system, a) != wavevectors.na_formula(a, system.counts):
                mism += 1
    results["na_equivalence"] = {"trials_per_variant": trials, "mismatches": mism,
                                 "pass": mism == 0}

    # stable marginal
    n_rep = max(1500 // scale, 300)
    sums = sample_sums_batch(MultiplicityFunction.constant(1.0), 1e5, 4, n_rep,
                             master_seed=seed, stream_offset=10_000)
    ks_levy = ks_one_sample(EmpiricalDistribution(sums[:, 0]), limits.levy_cdf)
    results["stable_marginal"] = {
        "replicas": n_rep, "tau": 1e5, "ks_vs_levy": ks_levy, "pass": ks_levy < 0.05,
    }
    plots.plot_ecdf_vs_cdf(sums[:, 0], limits.levy_cdf, fig_path("levy_ecdf.png"))

    # psi quadrature vs closed form
    xs = np.geomspace(1e-2, 1e4, max(40 // scale, 12))
    quad_vals = np.array([limits.psi(1, [x], quad_tol=1e-7) for x in xs])
    closed = limits.stable_char(1, xs)
    psi_err = float(np.max(np.abs(quad_vals - closed)))
    results["psi_closed_form"] = {"points": xs.size, "max_abs_err": psi_err,
                                  "pass": psi_err < 1e-6}
    plots.plot_psi_check(xs, np.abs(quad_vals), np.abs(closed),
                         np.abs(quad_vals - closed), fig_path("psi_check.png"))

    # density inversion
    t_grid = np.array([0.002, 0.005, 0.01, 0.02, 0.05])
    inverted = limits.invert_density(1, t_grid)
    ref = limits.levy_density(t_grid)
    inv_rel = float(np.max(np.abs(inverted - ref) / ref))
    results["density_inversion"] = {"max_rel_err": inv_rel, "pass": inv_rel < 0.02}
    plots.plot_density_inversion(t_grid, inverted, ref, fig_path("density_inversion.png"))

    # random Weyl law
    families = {
        "const:1": MultiplicityFunction.constant(1.0),
        "logpow:1,0.5": MultiplicityFunction.one_plus_log_pow(1.0, 0.5),
        "pow:1,0.333": MultiplicityFunction.one_plus_pow(1.0, 1.0 / 3.0),
    }
    n_rep = max(400 // scale, 100)
    weyl_rows: dict[str, list[dict]] = {}
    worst_z = 0.0
    for fam_i, (label, m) in enumerate(families.items()):
        rows = []
        for lam_i, lam in enumerate((1e3, 1e4, 1e5)):
            counts = weyl.replica_counts(m, lam, n_rep, seed,
                                         stream_offset=20_000 + (3 * fam_i + lam_i) * n_rep)
            mean_th, var_th = weyl.weyl_moments(m, lam)
            mean_z = (float(np.mean(counts)) - mean_th) / math.sqrt(var_th / n_rep)
            var_z = (float(np.var(counts, ddof=1)) - var_th) / (var_th * math.sqrt(2 / (n_rep - 1)))
            worst_z = max(worst_z, abs(mean_z), abs(var_z))
            rows.append({"lambda": lam, "mean_emp": float(np.mean(counts)),
                         "mean_theory": mean_th, "var_emp": float(np.var(counts, ddof=1)),
                         "var_theory": var_th, "mean_z": mean_z, "var_z": var_z})
        weyl_rows[label] = rows
    n_clt = max(1200 // scale, 300)
    # at reduced replica counts judge the KS distance against its own 1% quantile
    clt_gate = max(0.04, ks_critical_value(0.01, n_clt))
    ks_clt, _ = weyl.clt_experiment(families["const:1"], 1e5, n_clt, master_seed=seed + 1)
    results["random_weyl_law"] = {"replicas": n_rep, "worst_moment_z": worst_z,
                                  "clt_ks": ks_clt, "clt_gate": clt_gate,
                                  "pass": worst_z < 5.0 and ks_clt < clt_gate}
    plots.plot_weyl_moments(weyl_rows, fig_path("weyl_moments.png"))
    counts = weyl.replica_counts(families["const:1"], 1e5, n_clt, seed + 1)
    mean_th, var_th = weyl.weyl_moments(families["const:1"], 1e5)
    plots.plot_clt_histogram((counts - mean_th) / math.sqrt(var_th),
                             fig_path("clt_histogram.png"))

    # fourth-moment convergence, l = inf branch
    m_div = MultiplicityFunction.one_plus_pow(1.0, 1.0 / 3.0)
    taus = (1e4, 1e6, 1e8)
    n_rep = max(300 // scale, 80)
    medians, lo_q, hi_q = [], [], []
    for t_i, tau in enumerate(taus):
        sums = sample_sums_batch(m_div, tau, 2, n_rep, master_seed=seed,
                                 stream_offset=40_000 + t_i * n_rep)
        m2 = even_moments_batch(sums, table, 1)
        m4 = even_moments_batch(sums, table, 2)
        ratio = m4 / m2**2
        medians.append(float(np.median(ratio)))
        lo_q.append(float(np.quantile(ratio, 0.25)))
        hi_q.append(float(np.quantile(ratio, 0.75)))
    gaps = [abs(v - 3.0) for v in medians]
    results["fourth_moment_diverging_m"] = {
        "taus": list(taus), "medians": medians,
        "monotone": gaps[0] > gaps[1] > gaps[2], "final_gap": gaps[-1],
        "pass": gaps[0] > gaps[1] > gaps[2] and gaps[-1] < 0.2,
    }
    plots.plot_moment_convergence(taus, medians, np.array(lo_q), np.array(hi_q), 3.0,
                                  fig_path("fourth_moment_convergence.png"))

    # fourth moment vs limit law, l = 1 branch
    n_cmp = max(1500 // scale, 400)
    sums = sample_sums_batch(MultiplicityFunction.constant(1.0), 1e6, 2, n_cmp,
                             master_seed=seed, stream_offset=60_000)
    ratio = even_moments_batch(sums, table, 2) / even_moments_batch(sums, table, 1) ** 2
    r2 = 3.0 * limits.sample_R(1.0, 2, n_cmp, master_seed=seed + 7)[:, 0]
    ks_match = ks_two_sample(EmpiricalDistribution(ratio), EmpiricalDistribution(r2))
    crit = ks_critical_value(0.01, n_cmp, n_cmp)
    results["fourth_moment_finite_l"] = {
        "replicas": n_cmp, "ks_vs_limit": ks_match, "ks_critical_1pct": crit,
        "pass": ks_match < max(0.05, crit),
    }
    plots.plot_fourth_moment_match(ratio, r2, fig_path("fourth_moment_match.png"))

    all_pass = all(r.get("pass", True) for r in results.values())
    payload = {
        "seed": seed, "quick": bool(args.quick), "all_pass": all_pass,
        "results": results, "figures": [os.path.basename(f) for f in figures],
    }
    report_path = os.path.join(args.out_dir, "report.json")
    with open(report_path, "w") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")
    summary_rows = [(name, r.get("pass", "n/a")) for name, r in results.items()]
    _write_csv(os.path.join(args.out_dir, "summary.csv"), ["check", "pass"], summary_rows)
    _write_config(report_path, {
        "subcommand": "report", "out_dir": args.out_dir, "seed": seed,
        "quick": bool(args.quick),
    })
    print(f"report: {'all checks passed' if all_pass else 'FAILURES PRESENT'} "
          f"({len(figures)} figures) -> {report_path}")
    return EXIT_OK if all_pass else EXIT_ACCURACY


# ---------------------------------------------------------------- parser

def build_parser() -> _Parser:
    parser = _Parser(prog="pointscatter",
                     description="Random-model experiments for point-scatterer moments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    default_threads = int(os.environ.get("POINTSCATTER_THREADS", "1"))

    p = sub.add_parser("coeffs", help="dump exact partition-polynomial tables")
    p.add_argument("--pmax", type=int, default=8)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default="coeffs.csv")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("torus", help="deterministic lattice and moment oracle")
    p.add_argument("--alpha-sq", default="1", help="aspect ratio alpha^2 as P/Q")
    p.add_argument("--cutoff", type=float, required=True, help="eigenvalue cutoff")
    p.add_argument("--moments", default="2,3,4", help="comma list of orders")
    p.add_argument("--tau", type=float, default=17.0)
    p.add_argument("--phi", type=float, default=None,
                   help="also solve the spectral equation at this phi")
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--reg-terms", type=int, default=8)
    p.add_argument("--out", default="torus", help="output file prefix")
    p.set_defaults(func=cmd_torus)

    p = sub.add_parser("na-check", help="brute-force vs formula zero-sum counts")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-levels", type=int, default=4)
    p.add_argument("--variant", choices=["rect", "square", "both"], default="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="na_check.json")
    p.set_defaults(func=cmd_na_check)

    p = sub.add_parser("simulate", help="replica spectral sums and even moments")
    p.add_argument("--m", default="const:1", help="const:c | logpow:C,a | pow:C,a")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--pmax", type=int, default=4)
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--window-frac", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=default_threads)
    p.add_argument("--out", default="simulate.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("weyl", help="random Weyl law statistics")
    p.add_argument("--m", default="const:1")
    p.add_argument("--lambdas", default="1e4,1e5,1e6")
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=default_threads)
    p.add_argument("--out", default="weyl.csv")
    p.set_defaults(func=cmd_weyl)

    p = sub.add_parser("limit", help="limit-vector samples or psi evaluation")
    p.add_argument("mode", nargs="?", choices=["sample", "psi"], default="sample")
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--l", default="inf", help="inf or a positive float")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--proxy-tau", type=float, default=1e5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", default=None, help="CSV of psi evaluation points")
    p.add_argument("--quad-tol", type=float, default=1e-6)
    p.add_argument("--out", default="limit.csv")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("report", help="run the verification battery with figures")
    p.add_argument("--out-dir", default="report")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except limits.AccuracyError as err:
        print(f"accuracy not met: {err}", file=sys.stderr)
        return EXIT_ACCURACY


if __name__ == "__main__":
    sys.exit(main())
