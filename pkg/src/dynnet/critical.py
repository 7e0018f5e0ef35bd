"""Giant-component criterion: the H(x) series, its first root and R."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import mpmath
import numpy as np
from scipy import optimize

from .analytic import age_kernel
from .core import (DynNetError, ModelParams, NonConvergence, RngStream,
                   SocialIndexDistribution, Version, validate)


class RootNotFound(DynNetError, ArithmeticError):
    pass


MAX_TERMS = 100_000
AIRY_A1 = 2.338107  # -a1, first zero of Ai; slightly under it keeps the bound valid
_TRUNC = 1e-14


def _log10_peak_term(y: float, v: float) -> float:
    """log10 of the largest |term| of sum (-y)^n / (n! prod_{l<=n} (1+(l-1)v))."""
    logm = 0.0
    best = 0.0
    n = 1
    while n < MAX_TERMS:
        r = y / (n * (1.0 + (n - 1) * v))
        if r <= 1.0:
            break
        logm += math.log10(r)
        best = max(best, logm)
        n += 1
    return best


@dataclass(frozen=True)
class SeriesValue:
    value: float
    n_terms: int
    bound: float  # magnitude of the first omitted term


def h_series(x: float, lam: float, u_rate: float) -> SeriesValue:
    """Evaluate H(x) = 1 + sum_n (-x/u)^n / n! prod_{l=1}^n 1/(1 + (l-1) u/lam).

    Terms follow t_{n+1} = t_n (-x/u) / ((n+1)(1 + n u/lam)).  Summation
    stops once two consecutive terms are shrinking and below 1e-14 times
    max(1e-300, |partial sum|).  When the terms peak far above the size of
    the result the sum cancels heavily; it is then carried out in extended
    precision, raising the precision until the result is resolved to
    relative accuracy ~1e-15.
    """
    if x < 0 or not u_rate > 0 or not lam > 0:
        raise ValueError("need x >= 0, u_rate > 0, lam > 0")
    if x == 0:
        return SeriesValue(1.0, 0, 0.0)
    y = x / u_rate
    v = u_rate / lam
    peak = _log10_peak_term(y, v)
    if peak <= 1.0 and y < 1.0:
        return _sum_float(y, v)
    # |H| is near e^{-y} before its first root; size the precision for that
    dps = int(peak + min(y, 1e5) * math.log10(math.e)) + 45
    for _ in range(20):
        with mpmath.workdps(dps):
            res, noise = _sum_mp(mpmath.mpf(x), mpmath.mpf(u_rate), mpmath.mpf(lam), peak)
        if res.value != 0.0 and abs(res.value) > 1e17 * noise:
            return res
        gap = 20 if res.value == 0.0 else max(20, int(math.log10(noise / abs(res.value))) + 20)
        if res.value == 0.0 and dps > 4 * (peak + 30) + 2000:
            return res
        dps += gap
    raise NonConvergence(f"H({x}) unresolved at {dps} digits")


def _sum_float(y: float, v: float) -> SeriesValue:
    t = 1.0
    s = 1.0
    small = 0
    prev = math.inf
    for n in range(MAX_TERMS):
        t *= -y / ((n + 1) * (1.0 + n * v))
        s += t
        a = abs(t)
        small = small + 1 if (a < _TRUNC * max(abs(s), 1e-300) and a < prev) else 0
        prev = a
        if small >= 2:
            nxt = a * y / ((n + 2) * (1.0 + (n + 1) * v))
            return SeriesValue(s, n + 1, nxt)
    raise NonConvergence(f"H series did not settle in {MAX_TERMS} terms")


def _sum_mp(x, u, lam, peak: float):
    """Series in the current mpmath precision; also returns the roundoff level."""
    y = x / u
    v = u / lam
    noise = 10.0 ** (peak - mpmath.mp.dps + 5)
    floor = mpmath.mpf(noise) * mpmath.mpf(10) ** -20
    t = mpmath.mpf(1)
    s = mpmath.mpf(1)
    small = 0
    prev = mpmath.inf
    tol = mpmath.mpf(_TRUNC) * mpmath.mpf(10) ** -3
    for n in range(MAX_TERMS):
        t *= -y / ((n + 1) * (1 + n * v))
        s += t
        a = abs(t)
        small = small + 1 if (a < tol * max(abs(s), floor) and a < prev) else 0
        prev = a
        if small >= 2:
            bound = float(a * y / ((n + 2) * (1 + (n + 1) * v)))
            return SeriesValue(float(s), n + 1, bound), noise
    raise NonConvergence(f"H series did not settle in {MAX_TERMS} terms")


def H(x: float, lam: float, u_rate: float) -> float:
    return h_series(x, lam, u_rate).value


def h_partial_sums(x: float, lam: float, u_rate: float, n: int) -> list[float]:
    """Partial sums S_0..S_n of the H series in extended precision."""
    with mpmath.workdps(60 + int(_log10_peak_term(x / u_rate, u_rate / lam))):
        y = mpmath.mpf(x) / u_rate
        v = mpmath.mpf(u_rate) / lam
        t = mpmath.mpf(1)
        s = mpmath.mpf(1)
        out = [float(s)]
        for k in range(n):
            t *= -y / ((k + 1) * (1 + k * v))
            s += t
            out.append(float(s))
    return out


def _root_variable(x: float, lam: float, u_rate: float) -> float:
    """w = 2 sqrt(x lam) / u, in which the roots of H are spaced more than 1 apart."""
    return 2.0 * math.sqrt(x * lam) / u_rate


def c_cr(lam: float, u_rate: float, rel_tol: float = 1e-13, growth: float = 1.05,
         max_steps: int = 100_000) -> float:
    """Smallest positive root of H.

    H(x) equals Gamma(N) z^{(1-N)/2} J_{N-1}(2 sqrt z) with N = lam/u and
    z = x lam / u^2, so in ``w = 2 sqrt z`` its roots are those of a Bessel
    function: none below the order N-1 and consecutive ones more than one
    unit apart.  The first zero also exceeds N-1 + 2.338 ((N-1)/2)^{1/3}
    (the first Airy zero bound).  The scan starts at max(u/10, that bound), takes geometric
    steps capped at dw = 1 so no pair of roots is stepped over, checks H > 0
    at every point before the first sign change, then refines with Brent.
    """
    if not (lam > 0 and u_rate > 0):
        raise ValueError("need lam > 0 and u_rate > 0")
    order = lam / u_rate - 1.0
    w0 = order + AIRY_A1 * (order / 2.0) ** (1.0 / 3.0) - 1.0 if order > 0 else 0.0
    x_order = (max(w0, 0.0) * u_rate) ** 2 / (4.0 * lam)
    lo = max(u_rate / 10.0, x_order)
    while H(lo, lam, u_rate) <= 0.0:
        lo /= 10.0
        if lo < 1e-300:
            raise RootNotFound("H nonpositive arbitrarily close to 0")
    hi = lo
    for _ in range(max_steps):
        w = _root_variable(lo, lam, u_rate)
        hi = min(lo * growth, ((w + 1.0) * u_rate) ** 2 / (4.0 * lam))
        h_hi = H(hi, lam, u_rate)
        if h_hi <= 0.0:
            break
        lo = hi
    else:
        raise RootNotFound(f"no sign change of H up to x = {hi:g}")
    if h_hi == 0.0:
        return hi
    return optimize.brentq(lambda x: H(x, lam, u_rate), lo, hi,
                           xtol=1e-300, rtol=max(rel_tol, 4.5e-16), maxiter=500)


def c_rescaled(v: float, **kw) -> float:
    """c(v): smallest root of H_v(x) = 1 + sum (-x)^n/n! prod 1/(1 + (l-1) v)."""
    return c_cr(1.0 / v, 1.0, **kw)


# ---------------------------------------------------------------------------
# index path sums


def _require(dist: SocialIndexDistribution):
    dist.require_moments(1, 2)


def log_alpha2_U(k: int, alpha: float, dist: SocialIndexDistribution) -> float:
    """log of alpha^k E[prod_{i=1}^k (S_{i-1} + S_i)] via the 2x2 recursion."""
    if k < 1:
        raise ValueError("k >= 1")
    _require(dist)
    m1, m2 = dist.m1, dist.m2
    f, g = 2.0 * m1, m1 * m1 + m2
    log_scale = 0.0
    for _ in range(k - 1):
        f, g = m1 * f + g, m2 * f + m1 * g
        top = max(f, g)
        f, g = f / top, g / top
        log_scale += math.log(top)
    if alpha == 0.0:
        return -math.inf
    return k * math.log(alpha) + log_scale + math.log(f)


def alpha2_U(k: int, alpha: float, dist: SocialIndexDistribution) -> float:
    return math.exp(log_alpha2_U(k, alpha, dist))


def log_alpha2_P(k: int, alpha: float, dist: SocialIndexDistribution) -> float:
    """log of E[prod kappa2(S_{i-1}, S_i)] with kappa2 = 2 alpha s s' / E[S]."""
    if k < 1:
        raise ValueError("k >= 1")
    _require(dist)
    if alpha == 0.0:
        return -math.inf
    m1, m2 = dist.m1, dist.m2
    return k * math.log(2.0 * alpha / m1) + 2.0 * math.log(m1) + (k - 1) * math.log(m2)


def alpha2_P(k: int, alpha: float, dist: SocialIndexDistribution) -> float:
    return math.exp(log_alpha2_P(k, alpha, dist))


def growth_rate(version: Version | str, alpha: float, dist: SocialIndexDistribution) -> float:
    """lim alpha2(k)^{1/k}: the Perron root of the index kernel."""
    _require(dist)
    if Version(version) is Version.U:
        return alpha * (dist.m1 + math.sqrt(dist.m2))
    return 2.0 * alpha * dist.m2 / dist.m1


def growth_rate_ratio(version, alpha: float, dist: SocialIndexDistribution, k: int = 60) -> float:
    """alpha2(k+1)/alpha2(k), which converges to ``growth_rate``."""
    f = log_alpha2_U if Version(version) is Version.U else log_alpha2_P
    return math.exp(f(k + 1, alpha, dist) - f(k, alpha, dist))


class Verdict(str, Enum):
    GIANT = "Giant"
    NO_GIANT = "NoGiant"
    NEAR_CRITICAL = "NearCritical"


@dataclass(frozen=True)
class CriticalReport:
    c_cr: float
    u: float
    growth: float
    R: float
    verdict: Verdict
    margin: float

    def to_dict(self) -> dict:
        return {"c_cr": self.c_cr, "u": self.u, "growth_rate": self.growth, "R": self.R,
                "verdict": self.verdict.value, "margin": self.margin}


def R_and_verdict(params: ModelParams, dist: SocialIndexDistribution,
                  margin: float = 0.02) -> CriticalReport:
    """Ratio of the index growth rate to c_cr, and the giant-component verdict."""
    validate(params, analytic=True)
    crit = c_cr(params.lam, params.gamma)
    growth = growth_rate(params.version, params.alpha, dist)
    R = growth / crit
    if abs(R - 1.0) < margin:
        verdict = Verdict.NEAR_CRITICAL
    elif R > 1.0:
        verdict = Verdict.GIANT
    else:
        verdict = Verdict.NO_GIANT
    return CriticalReport(crit, params.gamma / params.lam, growth, R, verdict, margin)


# ---------------------------------------------------------------------------
# age path sums, Monte Carlo


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int


def alpha1_exact_k1(lam: float, u_rate: float) -> float:
    """E[kappa1(A, A')] for independent Exp(lam) ages: 1 / (lam + u)."""
    return 1.0 / (lam + u_rate)


def alpha1_mc(k: int, lam: float, u_rate: float, n_samples: int, rng: RngStream,
              block: int = 1 << 18) -> McEstimate:
    """Monte Carlo estimate of E[prod_{i=1}^k kappa1(X_{i-1}/lam, X_i/lam)], X_i ~ Exp(1).

    Blocks use consecutive substreams of ``rng`` and are merged in order.
    """
    if k < 1:
        raise ValueError("k >= 1")
    total = 0.0
    total_sq = 0.0
    done = 0
    b = 0
    while done < n_samples:
        m = min(block, n_samples - done)
        gen = rng.substream(b).gen
        ages = gen.exponential(1.0, size=(k + 1, m)) / lam
        prod = np.ones(m)
        for i in range(k):
            prod *= age_kernel(ages[i], ages[i + 1], lam, u_rate)
        total += prod.sum()
        total_sq += (prod * prod).sum()
        done += m
        b += 1
    mean = total / done
    var = max(total_sq / done - mean * mean, 0.0) * done / max(done - 1, 1)
    return McEstimate(mean, math.sqrt(var / done), done)
