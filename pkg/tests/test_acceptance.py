"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy import integrate, optimize, stats

import oracles
from dynnet import analytic, critical
from dynnet.bjr import ModelKernel, operator_norm, solve_rho
from dynnet.core import (Constant, Discrete, Exponential, LogNormal, ModelParams, RngStream,
                         TwoPoint)
from dynnet.graphstats import (assortativity, edge_degree_covariance, empirical_age_ks,
                               empirical_degree_hist, largest_component, total_variation)
from dynnet.sim import StopRule, run

BASE_U = ModelParams(1.0, 0.2, 1.0, 0.8, "U")


def verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def replicas(params, dist, n, count, seed):
    return [run(params, dist, StopRule(n_target=n), RngStream(seed, stream=r))
            for r in range(count)]


@pytest.fixture(scope="module")
def base_snapshots():
    t0 = time.perf_counter()
    snaps = replicas(BASE_U, Constant(1), 20_000, 16, 2024)
    return snaps, time.perf_counter() - t0


def test_criterion_01_mean_degree(capsys, base_snapshots):
    snaps, elapsed = base_snapshots
    theory = analytic.degree_mean_var(BASE_U, Constant(1))[0]
    assert theory == pytest.approx(oracles.mean_degree(1.0, 0.2, 0.8, 1.0, 1.0))
    mean = float(np.concatenate([s.degree for s in snaps]).mean())
    rel = abs(mean - theory) / theory
    verdict(capsys, 1, rel < 0.03 and elapsed < 120,
            f"mean degree {mean:.4f} vs {theory:.4f} (rel {rel:.4f}), {elapsed:.1f} s")


def test_criterion_02_degree_law(capsys, base_snapshots):
    snaps, _ = base_snapshots
    hist = empirical_degree_hist(snaps)
    law = analytic.DegreeLaw(BASE_U, Constant(1))
    pmf = law.pmf_table(max(law.default_kmax(), hist.size))
    tv = total_variation(hist, pmf)
    verdict(capsys, 2, tv <= 0.02, f"total variation {tv:.4f}")


def test_criterion_03_age_law(capsys, base_snapshots):
    snaps, _ = base_snapshots
    ks = empirical_age_ks(snaps, BASE_U.lam)
    verdict(capsys, 3, ks.passes(0.01), f"pooled age KS p = {ks.pvalue:.3f} over n = {ks.n}")


def test_criterion_04_small_u_limit(capsys):
    t0 = time.perf_counter()
    u = 1e-3
    val = u * critical.c_rescaled(u)
    elapsed = time.perf_counter() - t0
    verdict(capsys, 4, abs(val - 0.25) < 0.01 and elapsed < 1.0,
            f"u c(u) = {val:.6f} at u = 1e-3, {elapsed:.2f} s")


def test_criterion_05_scaling_identity(capsys):
    gen = np.random.default_rng(5)
    worst = 0.0
    for lam, u in gen.uniform(0.2, 5.0, (20, 2)):
        a = critical.c_cr(lam, u)
        b = u * critical.c_rescaled(u / lam)
        worst = max(worst, abs(a - b) / abs(b))
    verdict(capsys, 5, worst < 1e-9, f"max relative gap {worst:.2e} over 20 pairs")


def test_criterion_06_recursion_oracle(capsys):
    cases = [((1, 2), (0.5, 0.5)), ((1, 4), (0.3, 0.7)),
             ((1, 2, 5), (0.2, 0.5, 0.3)), ((0.5, 1, 3), (0.25, 0.25, 0.5))]
    worst = 0.0
    for values, probs in cases:
        dist = TwoPoint(values[0], values[1], probs[0]) if len(values) == 2 else \
            Discrete(values, probs)
        for k in range(1, 7):
            for alpha in (1.0, 0.75):
                ref = float(oracles.enumerate_alpha2_U(k, alpha, values, probs))
                got = critical.alpha2_U(k, alpha, dist)
                worst = max(worst, abs(got - ref) / ref)
    verdict(capsys, 6, worst < 1e-9, f"max relative gap {worst:.2e}, k <= 6")


def test_criterion_07_giant_component(capsys):
    t0 = time.perf_counter()
    d = Constant(1)
    # R = 2 alpha / c_cr for S == 1 in the U version
    alpha_star = critical.c_cr(BASE_U.lam, BASE_U.gamma) / 2.0
    assert critical.R_and_verdict(BASE_U.with_(alpha=alpha_star), d).R == pytest.approx(1.0)
    hi = BASE_U.with_(alpha=1.5 * alpha_star)
    rho = solve_rho(ModelKernel(hi, d)).rho_kappa
    above = [largest_component(s).fraction for s in replicas(hi, d, 100_000, 8, 70)]
    below = [largest_component(s).fraction
             for s in replicas(BASE_U.with_(alpha=0.5 * alpha_star), d, 100_000, 8, 71)]
    elapsed = time.perf_counter() - t0
    ok = (all(abs(f - rho) <= 0.03 for f in above) and max(below) < 0.01 and elapsed < 600)
    verdict(capsys, 7, ok,
            f"rho_kappa {rho:.4f}; above: {min(above):.4f}..{max(above):.4f}; "
            f"below max {max(below):.4f}; {elapsed:.0f} s")


def random_dist(gen):
    kind = gen.integers(4)
    if kind == 0:
        return Constant(float(gen.uniform(0.5, 2)))
    if kind == 1:
        return TwoPoint(1.0, float(gen.uniform(1.5, 6)), float(gen.uniform(0.2, 0.9)))
    if kind == 2:
        return Exponential(float(gen.uniform(0.5, 2)))
    return LogNormal(float(gen.uniform(-0.5, 0.5)), float(gen.uniform(0.05, 0.5)))


def test_criterion_08_operator_norm_sign(capsys):
    gen = np.random.default_rng(8)
    agree, draws = 0, 0
    while draws < 20:
        lam = float(gen.uniform(0.5, 2.0))
        p = ModelParams(lam, float(gen.uniform(0.05, 0.9)) * lam, float(gen.uniform(0.1, 2.0)),
                        float(gen.uniform(0.1, 2.0)), str(gen.choice(["U", "P"])))
        d = random_dist(gen)
        R = critical.R_and_verdict(p, d).R
        if abs(R - 1) <= 0.1:
            continue
        draws += 1
        norm = operator_norm(ModelKernel(p, d)).value
        agree += np.sign(norm - 1) == np.sign(R - 1)
    verdict(capsys, 8, agree == 20, f"{agree}/20 sign agreements")


def test_criterion_09_p_assortativity(capsys):
    gen = np.random.default_rng(9)
    lines, ok = [], True
    for _ in range(5):
        lam = float(gen.uniform(0.8, 2.0))
        p = ModelParams(lam, float(gen.uniform(0.1, 0.5)) * lam, float(gen.uniform(0.5, 1.5)),
                        float(gen.uniform(0.2, 1.0)), "P")
        d = random_dist(gen)
        rho = analytic.degree_correlation(p, d).rho
        est = assortativity(replicas(p, d, 25_000, 4, int(gen.integers(1 << 30))))
        lo, _ = est.interval(0.99)
        ok &= rho > 0 and est.r > 0 and lo > 0
        lines.append(f"{rho:.3f}/{est.r:.3f}")
    verdict(capsys, 9, ok, "analytic/simulated r: " + ", ".join(lines))


def ratio_two_point(target, p):
    """TwoPoint(1, b, p) with E[S^2]/E[S]^2 = target."""
    f = lambda b: (p + (1 - p) * b * b) / (p + (1 - p) * b) ** 2 - target
    b = optimize.brentq(f, 1.0 + 1e-9, 1e4, xtol=1e-14)
    return TwoPoint(1.0, b, p)


def test_criterion_10_u_sign_flip(capsys):
    p = ModelParams(1.0, 0.5, 1.0, 0.5, "U")
    thr = analytic.assortativity_threshold(p)
    ok = abs(thr - 1.84307) < 5e-6
    parts = [f"threshold {thr:.5f}"]
    for target, pmass, sign, seed in ((1.2, 0.5, 1, 101), (3.0, 0.9, -1, 102)):
        d = ratio_two_point(target, pmass)
        C = analytic.covariance(p, d)
        est = assortativity(replicas(p, d, 25_000, 4, seed))
        lo, hi = est.interval(0.99)
        ok &= np.sign(C) == sign and np.sign(est.r) == sign and (lo > 0 or hi < 0)
        parts.append(f"ratio {target}: C {C:+.4f}, r {est.r:+.4f} [{lo:+.4f}, {hi:+.4f}]")
    verdict(capsys, 10, ok, "; ".join(parts))


def test_criterion_11_constant_index(capsys):
    d = Constant(2.0)
    pu = ModelParams(1.3, 0.4, 0.6, 0.7, "U")
    pp = pu.with_(version="P")
    checks = {
        "mean_var": lambda p: analytic.degree_mean_var(p, d),
        "pmf": lambda p: analytic.DegreeLaw(p, d).pmf_table(40),
        "covariance": lambda p: [analytic.covariance(p, d)],
        "displays": lambda p: list(analytic.edge_moment_displays(p, d).values()),
        "correlation": lambda p: list(analytic.degree_correlation(p, d).to_dict().values()),
        "R": lambda p: [critical.R_and_verdict(p, d).R],
        "rho_kappa": lambda p: [solve_rho(ModelKernel(p, d)).rho_kappa],
    }
    worst = 0.0
    for fn in checks.values():
        a, b = np.asarray(fn(pu), float), np.asarray(fn(pp), float)
        worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
    du = np.concatenate([s.degree for s in replicas(pu, d, 20_000, 4, 111)])
    dp = np.concatenate([s.degree for s in replicas(pp, d, 20_000, 4, 112)])
    pval = stats.ks_2samp(du, dp).pvalue
    verdict(capsys, 11, worst <= 1e-12 and pval > 0.01,
            f"max U/P analytic gap {worst:.1e}; degree KS p = {pval:.3f}")


def test_criterion_12_p_covariance(capsys):
    p = ModelParams(1.0, 0.5, 0.5, 0.5, "P")
    d = TwoPoint(1.0, 3.0, 0.5)
    disp = analytic.edge_moment_displays(p, d)
    corr = analytic.degree_correlation(p, d)
    gap = max(abs(disp["E_D1"] - corr.mean) / corr.mean,
              abs(disp["E_D1D2"] - corr.cross_moment) / corr.cross_moment)
    C = analytic.covariance(p, d)
    gap = max(gap, abs(C - corr.covariance) / C)
    est = edge_degree_covariance(replicas(p, d, 25_000, 4, 100))
    z = (est.value - C) / est.stderr
    # unnormalized variant: squares 2 alpha E[S^2] without dividing by E[S]
    lam, g = p.lam, p.gamma
    unnorm = (lam * lam / ((lam + g) * (lam + 2 * g) ** 2 * (lam + 3 * g))
               * (2 * p.alpha * d.m2) ** 2)
    z_unnorm = (est.value - unnorm) / est.stderr
    verdict(capsys, 12, gap < 1e-9 and abs(z) < 2,
            f"closed-form gap {gap:.1e}; C {C:.4f} vs MC {est.value:.4f} +- {est.stderr:.4f} "
            f"(z {z:+.2f}; unnormalized {unnorm:.4f}, z {z_unnorm:+.1f})")


def test_criterion_13_stationary_fixed_point(capsys):
    p = ModelParams(1.5, 0.3, 1.0, 0.9, "U")
    law = analytic.stationary_edge_law(p, Constant(1))
    worst = 0.0
    for x in np.linspace(0.05, 6.0, 20):
        f = lambda a: law.age_density(a) * analytic.neighbor_age_density(x, a, p)
        lo, _ = integrate.quad(f, 0, x, epsabs=1e-13, limit=200)
        hi, _ = integrate.quad(f, x, np.inf, epsabs=1e-13, limit=200)
        worst = max(worst, abs(lo + hi - law.age_density(x)))
    verdict(capsys, 13, worst < 1e-6, f"max residual {worst:.1e} at 20 ages")
