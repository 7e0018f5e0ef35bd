"""Static inhomogeneous random graph view of a snapshot.

A node has type x = (a, s): age a ~ Exp(lam) and social index s ~ F_S.
Two nodes are joined independently with probability min(kappa(x, x')/n, 1)
where kappa = kappa1(a, a') * kappa2(s, s') and

    kappa1(a, a') = (exp((lam - gamma) min(a, a')) - 1) / (lam - gamma)
    kappa2(s, s') = alpha (s + s')           (U)
                  = 2 alpha s s' / E[S]      (P)

With these kernels the expected degree of a type-(a, s) node is the mixed
Poisson mean of the dynamic model.  The survival probability rho_kappa of
the associated branching process is the asymptotic giant-component fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .analytic import age_kernel
from .core import (DynNetError, ModelParams, RngStream, SocialIndexDistribution, Version,
                   validate)
from .snapshot import Snapshot


class MaxIterations(DynNetError, ArithmeticError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# kernels


class Kernel:
    """Symmetric nonnegative kernel on (age, index) types.

    Subclasses describe kappa through an age part and an index part; for
    two nodes with a <= a' the kernel is ``row_factor(a) * index_part(s, s')``,
    which is what the graph sampler exploits after sorting nodes by age.
    """

    def age_part(self, a, a2):
        raise NotImplementedError

    def index_part(self, s, s2):
        raise NotImplementedError

    def row_factor(self, a):
        return self.age_part(a, a)

    def __call__(self, a, s, a2, s2):
        return self.age_part(a, a2) * self.index_part(s, s2)

    def sample_types(self, n: int, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def type_grid(self, m_age: int = 200, m_index: int = 200) -> "TypeGrid":
        raise NotImplementedError

    def scaled(self, t: float) -> "Kernel":
        raise NotImplementedError


@dataclass(frozen=True)
class ModelKernel(Kernel):
    """Kernel of the dynamic model for given rates and index law."""

    params: ModelParams
    dist: SocialIndexDistribution

    def __post_init__(self):
        validate(self.params, analytic=True)
        # with E[S^2] infinite the integral operator is unbounded
        self.dist.require_moments(1, 2)

    @property
    def version(self) -> Version:
        return self.params.version

    def age_part(self, a, a2):
        return age_kernel(a, a2, self.params.lam, self.params.gamma)

    def index_part(self, s, s2):
        alpha = self.params.alpha
        if self.version is Version.U:
            return alpha * (np.asarray(s) + np.asarray(s2))
        return 2.0 * alpha * np.asarray(s) * np.asarray(s2) / self.dist.m1

    def sample_types(self, n, gen):
        age = gen.exponential(1.0 / self.params.lam, size=n)
        s = np.asarray(self.dist.sample(gen, n), dtype=float)
        return age, s

    def type_grid(self, m_age=200, m_index=200):
        ages, wa = exp_age_nodes(self.params.lam, m_age)
        idx, ws = index_nodes(self.dist, m_index)
        return TypeGrid(ages, wa, idx, ws)

    def scaled(self, t):
        return ModelKernel(self.params.with_(alpha=self.params.alpha * t), self.dist)


@dataclass(frozen=True)
class ConstantKernel(Kernel):
    """kappa == c; the graph is Erdos-Renyi with mean degree about c."""

    c: float

    def age_part(self, a, a2):
        return np.ones(np.broadcast(np.asarray(a), np.asarray(a2)).shape)

    def index_part(self, s, s2):
        return self.c * np.ones(np.broadcast(np.asarray(s), np.asarray(s2)).shape)

    def sample_types(self, n, gen):
        return np.zeros(n), np.ones(n)

    def type_grid(self, m_age=1, m_index=1):
        return TypeGrid(np.zeros(1), np.ones(1), np.ones(1), np.ones(1))

    def scaled(self, t):
        return ConstantKernel(self.c * t)


def kappa(x, x2, kernel: Kernel):
    """kappa((a, s), (a', s')) for scalar or array types."""
    (a, s), (a2, s2) = x, x2
    out = kernel(a, s, a2, s2)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# type grid


def exp_age_nodes(lam: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on (0, 1) pushed through the Exp(lam) quantile."""
    u, w = np.polynomial.legendre.leggauss(m)
    u = 0.5 * (u + 1.0)
    return -np.log1p(-u) / lam, 0.5 * w


def index_nodes(dist: SocialIndexDistribution, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact atoms for discrete laws, quantile-mapped Gauss-Legendre otherwise."""
    if dist.is_discrete:
        vals, probs = dist.atoms()
        return np.asarray(vals, dtype=float), np.asarray(probs, dtype=float)
    u, w = np.polynomial.legendre.leggauss(m)
    u = 0.5 * (u + 1.0)
    return np.asarray(dist.ppf(u), dtype=float), 0.5 * w


@dataclass(frozen=True)
class TypeGrid:
    """Product grid of ages and indices with probability weights."""

    ages: np.ndarray
    age_weights: np.ndarray
    indices: np.ndarray
    index_weights: np.ndarray

    def __post_init__(self):
        for w in (self.age_weights, self.index_weights):
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
                raise ValueError("grid weights must be nonnegative and sum to 1")

    @property
    def shape(self) -> tuple[int, int]:
        return self.ages.size, self.indices.size

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.age_weights, self.index_weights)


def _factors(kernel: Kernel, grid: TypeGrid) -> tuple[np.ndarray, np.ndarray]:
    a, s = grid.ages, grid.indices
    k1 = np.asarray(kernel.age_part(a[:, None], a[None, :]), dtype=float)
    k2 = np.asarray(kernel.index_part(s[:, None], s[None, :]), dtype=float)
    return k1, k2


def _apply(k1, k2, w, f):
    """(T f)(x) = sum_y kappa(x, y) f(y) w(y) on the product grid."""
    return k1 @ (w * f) @ k2.T


# ---------------------------------------------------------------------------
# survival fixed point and operator norm


@dataclass(frozen=True)
class FixedPointSolution:
    f: np.ndarray
    rho_kappa: float
    iterations: int
    residual: float
    monotone: bool
    grid: TypeGrid = field(repr=False)

    def to_dict(self) -> dict:
        return {"rho_kappa": self.rho_kappa, "iterations": self.iterations,
                "residual": self.residual, "grid_sizes": list(self.grid.shape)}


def solve_rho(kernel: Kernel, grid: TypeGrid | None = None, tolerance: float = 1e-10,
              max_iterations: int = 100_000) -> FixedPointSolution:
    """Maximal solution of f = 1 - exp(-T f) by monotone iteration from f = 1."""
    grid = grid if grid is not None else kernel.type_grid()
    k1, k2 = _factors(kernel, grid)
    w = grid.weights
    f = np.ones(grid.shape)
    monotone = True
    residual = math.inf
    for it in range(1, max_iterations + 1):
        new = -np.expm1(-_apply(k1, k2, w, f))
        if np.any(new > f + 1e-15):
            monotone = False
        residual = float(np.max(np.abs(new - f)))
        f = new
        if residual <= tolerance:
            break
    else:
        raise MaxIterations(f"fixed point not reached in {max_iterations} iterations "
                            f"(residual {residual:.3g})", residual)
    return FixedPointSolution(f, float(np.sum(f * w)), it, residual, monotone, grid)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    iterations: int
    change: float


def operator_norm(kernel: Kernel, grid: TypeGrid | None = None, tolerance: float = 1e-10,
                  max_iterations: int = 100_000) -> NormEstimate:
    """Largest eigenvalue of T by power iteration on the symmetrized matrix.

    With D = diag(w), the matrix D^{1/2} K D^{1/2} is symmetric and has the
    spectrum of T; iteration stops when successive Rayleigh quotients agree.
    """
    grid = grid if grid is not None else kernel.type_grid()
    k1, k2 = _factors(kernel, grid)
    r1 = np.sqrt(grid.age_weights)
    r2 = np.sqrt(grid.index_weights)
    b1 = r1[:, None] * k1 * r1[None, :]
    b2 = r2[:, None] * k2 * r2[None, :]
    v = np.outer(r1, r2)
    nv = np.linalg.norm(v)
    if nv == 0:
        return NormEstimate(0.0, 0, 0.0)
    v /= nv
    prev = math.inf
    change = math.inf
    for it in range(1, max_iterations + 1):
        bv = b1 @ v @ b2.T
        q = float(np.sum(v * bv))
        norm = np.linalg.norm(bv)
        if norm == 0.0:
            return NormEstimate(0.0, it, 0.0)
        v = bv / norm
        change = abs(q - prev)
        if change < tolerance * max(1.0, abs(q)):
            return NormEstimate(q, it, change)
        prev = q
    raise MaxIterations(f"power iteration did not settle in {max_iterations} steps", change)


# ---------------------------------------------------------------------------
# graph sampling


def sample_graph(n: int, kernel: Kernel, rng: RngStream, method: str = "auto",
                 dense_below: int = 4000) -> Snapshot:
    """Draw G(n, kappa): i.i.d. types, then independent edges with p = min(kappa/n, 1).

    ``method="bernoulli"`` sweeps all pairs; ``"skip"`` samples each row's
    candidates from a Binomial over an upper bound and thins them exactly.
    ``"auto"`` uses the sweep below ``dense_below`` nodes.
    """
    if n < 1:
        raise ValueError("n >= 1")
    age, s = kernel.sample_types(n, rng.substream(0).gen)
    order = np.argsort(age, kind="stable")
    a_sorted, s_sorted = age[order], s[order]
    gen = rng.substream(1).gen
    if method == "auto":
        method = "bernoulli" if n < dense_below else "skip"
    if method == "bernoulli":
        rows, cols = _bernoulli_pairs(n, kernel, a_sorted, s_sorted, gen)
    elif method == "skip":
        rows, cols = _skip_pairs(n, kernel, a_sorted, s_sorted, gen)
    else:
        raise ValueError(f"unknown method {method!r}")
    ids = np.arange(n)
    return Snapshot.from_edges(0.0, ids, age, s, order[rows], order[cols],
                               meta={"generator": "bjr", "n": n, "seed": rng.seed,
                                     "stream": rng.stream, "method": method})


def _edge_prob(kernel, n, a_i, s_i, s_j):
    return np.minimum(kernel.row_factor(a_i) * kernel.index_part(s_i, s_j) / n, 1.0)


def _bernoulli_pairs(n, kernel, a, s, gen, block: int = 256):
    rows, cols = [], []
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        i = np.arange(lo, hi)[:, None]
        j = np.arange(n)[None, :]
        p = _edge_prob(kernel, n, a[lo:hi, None], s[lo:hi, None], s[None, :])
        p = np.where(j > i, p, 0.0)
        hit = gen.random(p.shape) < p
        r, c = np.nonzero(hit)
        rows.append(r + lo)
        cols.append(c)
    return np.concatenate(rows), np.concatenate(cols)


def _skip_pairs(n, kernel, a, s, gen):
    """Exact sampler for age-sorted types.

    For j > i we have a_j >= a_i, so kappa = row_factor(a_i) * index_part(s_i, s_j)
    and q_i = min(1, row_factor(a_i) * index_part(s_i, s_max) / n) bounds row i.
    Row i proposes a uniform subset of Binomial(L_i, q_i) of its L_i = n-1-i
    candidates and keeps each with probability p_ij / q_i.  Rows with
    q_i > 1/2 are swept directly.
    """
    s_max = float(np.max(s))
    length = n - 1 - np.arange(n)
    q = np.minimum(kernel.row_factor(a) * kernel.index_part(s, s_max) / n, 1.0)
    q = np.where(length > 0, q, 0.0)
    dense = q > 0.5
    rows_out, cols_out = [], []

    for i in np.nonzero(dense)[0]:
        j = np.arange(i + 1, n)
        p = _edge_prob(kernel, n, a[i], s[i], s[j])
        keep = gen.random(j.size) < p
        rows_out.append(np.full(int(keep.sum()), i))
        cols_out.append(j[keep])

    sparse = np.nonzero(~dense & (q > 0))[0]
    counts = gen.binomial(length[sparse], q[sparse])
    rows = np.repeat(sparse, counts)
    cols = _distinct_positions(rows, length, gen)
    # thin the proposals down to the exact probabilities
    p = _edge_prob(kernel, n, a[rows], s[rows], s[cols])
    keep = gen.random(rows.size) * q[rows] < p
    rows_out.append(rows[keep])
    cols_out.append(cols[keep])
    if not rows_out:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return (np.concatenate(rows_out).astype(np.int64),
            np.concatenate(cols_out).astype(np.int64))


def _distinct_positions(rows, length, gen):
    """For each proposal row i, a column in (i, n) with no repeats within a row.

    Positions are drawn uniformly and repeats are redrawn, which by symmetry
    yields a uniform subset of the requested size for every row.
    """
    cols = rows + 1 + (gen.random(rows.size) * length[rows]).astype(np.int64)
    while True:
        key = np.stack([rows, cols], axis=1)
        order = np.lexsort((cols, rows))
        sk = key[order]
        dup = np.zeros(rows.size, dtype=bool)
        dup[order[1:]] = np.all(sk[1:] == sk[:-1], axis=1)
        if not dup.any():
            return cols
        r = rows[dup]
        cols[dup] = r + 1 + (gen.random(r.size) * length[r]).astype(np.int64)


def expected_edges(kernel: Kernel, age: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    """Mean and variance of the edge count of G(n, kappa) given the types."""
    n = age.size
    order = np.argsort(age, kind="stable")
    a, s = age[order], s[order]
    mean = 0.0
    var = 0.0
    for i in range(n - 1):
        p = _edge_prob(kernel, n, a[i], s[i], s[i + 1:])
        mean += float(p.sum())
        var += float((p * (1.0 - p)).sum())
    return mean, var
