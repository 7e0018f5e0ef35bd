"""Noise-free evaluation of the asymptotic degree and edge laws.

Notation: ``gamma = beta + mu`` is the total hazard of an edge (its own
deletion plus the death of the partner), a node's age is Exp(lam) and its
social index S ~ F_S.  Given age ``a`` and index ``s`` the degree is Poisson
with mean ``g1(a) * g2(s)`` where ``g1(a) = (1 - exp(-gamma a)) / gamma`` and
``g2`` is ``alpha (s + E[S])`` (U) or ``2 alpha s`` (P).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .core import (InfiniteMoment, ModelParams, NonConvergence, SocialIndexDistribution,
                   Version, validate)

QUAD = dict(epsabs=1e-14, epsrel=1e-12, limit=500)


def expm1_ratio(x: float, t):
    """(exp(x t) - 1) / x, with the x -> 0 limit taken explicitly.

    ``t`` may be an array.  Below ``|x| < tiny`` the second-order expansion
    ``t + x t^2 / 2 + x^2 t^3 / 6`` is used.
    """
    t = np.asarray(t, dtype=float)
    if abs(x) < 1e-12:
        out = t + x * t * t / 2.0 + x * x * t ** 3 / 6.0
    else:
        out = np.expm1(x * t) / x
    return out if out.ndim else float(out)


def age_kernel(a, b, lam: float, gamma: float):
    """Age factor of the connection kernel, (e^{(lam-gamma) min(a,b)} - 1)/(lam-gamma)."""
    x = lam - gamma
    m = np.minimum(a, b)
    if abs(x) < 1e-9 * lam:
        m = np.asarray(m, dtype=float)
        out = m + x * m * m / 2.0 + x * x * m ** 3 / 6.0
        return out if out.ndim else float(out)
    return expm1_ratio(x, m)


def _damped_kernel(a: float, lam: float, gamma: float) -> float:
    """exp(-lam a) * age_kernel(a, a) without overflow for large a."""
    x = lam - gamma
    if abs(x) < 1e-9 * lam:
        return math.exp(-lam * a) * age_kernel(a, a, lam, gamma)
    if x > 0:
        return math.exp(-gamma * a) * -math.expm1(-x * a) / x
    return math.exp(-lam * a) * math.expm1(x * a) / x


def _analytic_params(params: ModelParams) -> None:
    validate(params, analytic=True)


def _age_cutoff(params: ModelParams) -> float:
    return 40.0 / min(params.lam, params.gamma)


def _age_quad(fn, params: ModelParams) -> float:
    """Integral of ``fn`` over a in [0, inf) for integrands decaying like e^{-lam a}."""
    amax = _age_cutoff(params)
    pts = sorted({min(x, amax / 2) for x in (1.0 / params.lam, 5.0 / params.lam,
                                            1.0 / params.gamma)})
    val, err = integrate.quad(fn, 0.0, amax, points=pts, **QUAD)
    # beyond amax the integrand decays at rate >= lam, so fn(amax)/lam bounds the rest
    return val + fn(amax) / params.lam


def degree_mean_var(params: ModelParams, dist: SocialIndexDistribution) -> tuple[float, float]:
    """Mean and variance of the degree of a uniformly chosen node."""
    _analytic_params(params)
    dist.require_moments(1, 2)
    lam, g, al = params.lam, params.gamma, params.alpha
    ms, var_s = dist.m1, dist.variance
    mean = 2.0 * al * ms / (lam + g)
    c_var_s = 2.0 if params.version is Version.U else 8.0
    var = (mean
           + 4.0 * lam * al ** 2 * ms ** 2 / ((lam + g) ** 2 * (lam + 2 * g))
           + c_var_s * al ** 2 * var_s / ((lam + g) * (lam + 2 * g)))
    return mean, var


def index_factor(params: ModelParams, dist: SocialIndexDistribution, s):
    """g2(s): the index part of a node's Poisson degree mean."""
    s = np.asarray(s, dtype=float)
    if params.version is Version.U:
        out = params.alpha * (s + dist.m1)
    else:
        out = 2.0 * params.alpha * s
    return out if out.ndim else float(out)


def age_factor(params: ModelParams, a):
    """g1(a) = (1 - exp(-gamma a)) / gamma."""
    a = np.asarray(a, dtype=float)
    out = -np.expm1(-params.gamma * a) / params.gamma
    return out if out.ndim else float(out)


@dataclass
class DegreeLaw:
    """Mixed Poisson degree law of a uniformly chosen node."""

    params: ModelParams
    dist: SocialIndexDistribution

    def __post_init__(self):
        _analytic_params(self.params)

    @property
    def version(self) -> Version:
        return self.params.version

    def mixing(self, a, s):
        """Poisson mean given age ``a`` and index ``s``."""
        return index_factor(self.params, self.dist, s) * age_factor(self.params, a)

    @property
    def mean(self) -> float:
        return degree_mean_var(self.params, self.dist)[0]

    @property
    def variance(self) -> float:
        return degree_mean_var(self.params, self.dist)[1]

    def pmf_table(self, kmax: int) -> np.ndarray:
        """P(D = k) for k = 0..kmax."""
        p = self.params
        ks = np.arange(kmax + 1, dtype=float)
        lgk = special.gammaln(ks + 1.0)
        if p.alpha == 0.0:
            out = np.zeros(kmax + 1)
            out[0] = 1.0
            return out

        def poisson(mean):
            if mean <= 0.0:
                v = np.zeros_like(ks)
                v[0] = 1.0
                return v
            return np.exp(ks * math.log(mean) - mean - lgk)

        amax = _age_cutoff(p)
        lam = p.lam

        def over_age(c):
            # c is g2(s); integrate Poisson(c g1(a)) against Exp(lam)
            fn = lambda a: poisson(c * age_factor(p, a)) * lam * math.exp(-lam * a)
            val, err = integrate.quad_vec(fn, 0.0, amax, epsabs=1e-13, epsrel=1e-11,
                                          limit=2000)
            if err > 1e-9:
                raise NonConvergence(f"age quadrature error {err:g}")
            return val + poisson(c / p.gamma) * math.exp(-lam * amax)

        d = self.dist
        if d.is_discrete:
            vals, probs = d.atoms()
            return sum(pr * over_age(index_factor(p, d, v)) for v, pr in zip(vals, probs))
        lo, hi = d.support()
        fn = lambda s: over_age(index_factor(p, d, s)) * d.pdf(s)
        val, err = integrate.quad_vec(fn, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=2000)
        if err > 1e-8:
            raise NonConvergence(f"index quadrature error {err:g}")
        return val

    def pmf(self, k: int) -> float:
        if k < 0:
            return 0.0
        return float(self.pmf_table(int(k))[int(k)])

    def default_kmax(self, residual: float = 1e-9, limit: int = 100_000) -> int:
        """Table length: mean + 10 sd, extended until the missing mass is below ``residual``.

        Exponential-tailed mixing laws can leave more than ``residual`` past
        mean + 10 sd, hence the extension.
        """
        mean, var = degree_mean_var(self.params, self.dist)
        k = int(math.ceil(mean + 10.0 * math.sqrt(var))) + 1
        while k < limit and 1.0 - self.pmf_table(k).sum() > residual:
            k = int(k * 1.5) + 1
        return k


def mixed_poisson_pmf(k: int, params: ModelParams, dist: SocialIndexDistribution) -> float:
    return DegreeLaw(params, dist).pmf(k)


# ---------------------------------------------------------------------------
# neighbour type densities


def neighbor_age_density(a_nb, a, params: ModelParams):
    """Density of a neighbour's age given the focal node has age ``a``."""
    _analytic_params(params)
    lam, g = params.lam, params.gamma
    a_nb = np.asarray(a_nb, dtype=float)
    if a <= 0.0:
        out = np.zeros_like(a_nb)
    else:
        out = (g * lam * np.exp(-lam * a_nb) * age_kernel(a, a_nb, lam, g)
               / -math.expm1(-g * a))
    return out if out.ndim else float(out)


def neighbor_index_density(s_nb, s, params: ModelParams, dist: SocialIndexDistribution):
    """Density (pmf for discrete laws) of a neighbour's index given index ``s``."""
    s_nb = np.asarray(s_nb, dtype=float)
    f = dist.density(s_nb)
    if params.version is Version.U:
        out = (s + s_nb) * f / (s + dist.m1)
    else:
        out = s_nb * f / dist.m1
    return out if np.ndim(out) else float(out)


@dataclass
class StationaryEdgeLaw:
    """Type law of the first endpoint of a uniformly chosen edge.

    Age and index are independent; ``age_density`` is common to both
    versions, ``index_density`` is the size-biased F_S (P) or the even mix of
    F_S and its size-biased version (U).
    """

    params: ModelParams
    dist: SocialIndexDistribution
    age_norm: float = field(init=False)
    index_norm: float = field(init=False)

    def __post_init__(self):
        _analytic_params(self.params)
        self.dist.require_moments(1)
        self.age_norm = _age_quad(self.age_density, self.params)
        self.index_norm = self.index_expect(lambda s: 1.0)
        for name, v in (("age", self.age_norm), ("index", self.index_norm)):
            if abs(v - 1.0) > 1e-8:
                raise NonConvergence(f"stationary {name} density integrates to {v!r}")

    def age_density(self, a):
        lam, g = self.params.lam, self.params.gamma
        a = np.asarray(a, dtype=float)
        out = lam * (1.0 + lam / g) * np.exp(-lam * a) * -np.expm1(-g * a)
        return out if out.ndim else float(out)

    def _index_weight(self, s):
        m1 = self.dist.m1
        if self.params.version is Version.U:
            return (s + m1) / (2.0 * m1)
        return s / m1

    def index_density(self, s):
        s = np.asarray(s, dtype=float)
        out = self._index_weight(s) * self.dist.density(s)
        return out if np.ndim(out) else float(out)

    def index_expect(self, fn) -> float:
        """Expectation of ``fn(S*)`` for S* drawn from the stationary index law."""
        return self.dist.expect(lambda s: fn(s) * self._index_weight(s))

    def g1(self, a):
        return age_factor(self.params, a)

    def g2(self, s):
        return index_factor(self.params, self.dist, s)


def stationary_edge_law(params: ModelParams, dist: SocialIndexDistribution) -> StationaryEdgeLaw:
    return StationaryEdgeLaw(params, dist)


# ---------------------------------------------------------------------------
# covariance and degree correlation


def threshold_parameter(params: ModelParams) -> float:
    """a = lam^2 / ((lam + gamma)(lam + 3 gamma)), always in (0, 1)."""
    _analytic_params(params)
    lam, g = params.lam, params.gamma
    return lam * lam / ((lam + g) * (lam + 3 * g))


def assortativity_threshold(params: ModelParams) -> float:
    """Value of E[S^2]/E[S]^2 below which the U version is assortative."""
    a = threshold_parameter(params)
    return 1.0 + a + math.sqrt(a * a + 4.0 * a)


def edge_moment_displays(params: ModelParams, dist: SocialIndexDistribution) -> dict:
    """Closed forms of E[D1] and E[D1 D2] over a random edge (excess degrees)."""
    _analytic_params(params)
    dist.require_moments(1, 2)
    lam, g, al = params.lam, params.gamma, params.alpha
    m1, m2 = dist.m1, dist.m2
    cross = (5 * lam + 6 * g) / ((lam + g) * (lam + 2 * g) * (lam + 3 * g))
    if params.version is Version.P:
        q = 2.0 * al * m2 / m1
        return {"E_D1": 2.0 / (lam + 2 * g) * q, "E_D1D2": cross * q * q}
    return {"E_D1": 2.0 / (lam + 2 * g) * al * (m2 + 3 * m1 * m1) / (2.0 * m1),
            "E_D1D2": cross * 2.0 * al * al * (m2 + m1 * m1)}


def covariance(params: ModelParams, dist: SocialIndexDistribution) -> float:
    """C(D1, D2): covariance of the endpoint degrees of a random edge."""
    _analytic_params(params)
    dist.require_moments(1, 2)
    lam, g, al = params.lam, params.gamma, params.alpha
    m1, m2 = dist.m1, dist.m2
    if params.version is Version.P:
        return (lam * lam / ((lam + g) * (lam + 2 * g) ** 2 * (lam + 3 * g))
                * (2.0 * al * m2 / m1) ** 2)
    a = threshold_parameter(params)
    r = m2 / (m1 * m1)
    return al * al * m1 * m1 / (lam + 2 * g) ** 2 * (2 * (a + 4) * (r + 1) - (r + 3) ** 2)


@dataclass(frozen=True)
class DegreeCorrelation:
    rho: float
    mean: float
    second_moment: float
    cross_moment: float

    @property
    def covariance(self) -> float:
        return self.cross_moment - self.mean ** 2

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean ** 2

    def to_dict(self) -> dict:
        return {"rho": self.rho, "E_D1": self.mean, "E_D1_sq": self.second_moment,
                "E_D1D2": self.cross_moment, "covariance": self.covariance,
                "variance": self.variance}


def degree_correlation(params: ModelParams, dist: SocialIndexDistribution) -> DegreeCorrelation:
    """Degree correlation over a random edge, from the stationary edge law.

    The age integrals are done by quadrature; index integrals are
    expectations under F_S (exact sums for discrete laws).
    """
    _analytic_params(params)
    dist.require_moments(1, 2, 3)
    law = StationaryEdgeLaw(params, dist)
    lam, g = params.lam, params.gamma
    fa = law.age_density
    g1 = law.g1
    g2 = law.g2

    age1 = _age_quad(lambda a: g1(a) * fa(a), params)
    age2 = _age_quad(lambda a: g1(a) ** 2 * fa(a), params)

    # pair (a, a') with a < a': kernel depends on a only; the a' integral is
    # elementary, and the symmetric half doubles.
    def tail_g1(a):
        return (math.exp(-lam * a) / lam - math.exp(-(lam + g) * a) / (lam + g)) / g

    age_cross = 2.0 * lam * lam * (lam + g) * _age_quad(
        lambda a: _damped_kernel(a, lam, g) * g1(a) * tail_g1(a), params)

    idx1 = law.index_expect(g2)
    idx2 = law.index_expect(lambda s: g2(s) ** 2)
    # f_inf(s) f(s'|s) factorizes as w(s) w'(s') f_S(s) f_S(s') summed over terms
    m1 = dist.m1
    if params.version is Version.P:
        e_gs = dist.expect(lambda s: g2(s) * s) / m1
        idx_cross = e_gs * e_gs
    else:
        e_g = dist.expect(g2)
        e_gs = dist.expect(lambda s: g2(s) * s)
        idx_cross = (e_gs * e_g + e_g * e_gs) / (2.0 * m1)

    mean = age1 * idx1
    second = mean + age2 * idx2
    cross = age_cross * idx_cross
    var = second - mean * mean
    rho = (cross - mean * mean) / var
    return DegreeCorrelation(float(rho), float(mean), float(second), float(cross))
