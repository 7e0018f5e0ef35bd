"""Estimators on snapshots: components, degree assortativity, degree and age laws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .core import DynNetError
from .snapshot import Snapshot


class TooFewEdges(DynNetError, ValueError):
    pass


class UnionFind:
    """Array-backed disjoint sets with union by size and path halving."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x: int, y: int) -> int:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return rx
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]
        return rx

    def component_sizes(self) -> list[int]:
        return [self.size[i] for i in range(len(self.parent)) if self.parent[i] == i]


@dataclass(frozen=True)
class ComponentSummary:
    count: int
    largest: int
    fraction: float
    sizes: tuple

    def to_dict(self) -> dict:
        return {"count": self.count, "largest": self.largest, "fraction": self.fraction}


def largest_component(snap: Snapshot) -> ComponentSummary:
    """Exact component sizes; multiplicity is collapsed and self-loops ignored."""
    n = snap.n_nodes
    if n == 0:
        raise ValueError("empty snapshot")
    uf = UnionFind(n)
    keep = ~snap.self_loop
    ia = snap.index_of(snap.edge_a[keep]).tolist()
    ib = snap.index_of(snap.edge_b[keep]).tolist()
    for a, b in zip(ia, ib):
        uf.union(a, b)
    sizes = tuple(sorted(uf.component_sizes(), reverse=True))
    return ComponentSummary(len(sizes), sizes[0], sizes[0] / n, sizes)


# ---------------------------------------------------------------------------
# assortativity


@dataclass(frozen=True)
class AssortativityEstimate:
    """Pearson correlation of endpoint degrees over edges.

    ``r`` is None when the degree variance over edge ends is zero.
    """

    r: float | None
    n_pairs: int
    stderr: float | None

    @property
    def defined(self) -> bool:
        return self.r is not None

    def interval(self, level: float = 0.99) -> tuple[float, float]:
        if self.r is None:
            raise ValueError("assortativity undefined")
        z = stats.norm.ppf(0.5 + level / 2)
        return self.r - z * self.stderr, self.r + z * self.stderr

    def to_dict(self) -> dict:
        return {"r": self.r, "n_pairs": self.n_pairs, "stderr": self.stderr}


def edge_degree_pairs(snap: Snapshot, exclude_self_loops: bool = True,
                      count_multiplicity: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint degrees, one row per retained edge (copy).

    Degrees are those of the multigraph left after applying the policy.
    """
    a, b, m = snap.edge_a, snap.edge_b, snap.multiplicity
    if exclude_self_loops:
        keep = a != b
        a, b, m = a[keep], b[keep], m[keep]
    if not count_multiplicity:
        m = np.ones_like(m)
    ia, ib = snap.index_of(a), snap.index_of(b)
    deg = (np.bincount(ia, weights=m, minlength=snap.n_nodes)
           + np.bincount(ib, weights=m, minlength=snap.n_nodes))
    da = np.repeat(deg[ia], m)
    db = np.repeat(deg[ib], m)
    return da, db


def _symmetric_stats(du: np.ndarray, dv: np.ndarray):
    """Per-edge contributions to the symmetrized sums and the totals."""
    sx = du + dv
    sxx = du * du + dv * dv
    sxy = 2.0 * du * dv
    return sx, sxx, sxy


def _corr_from_sums(n, sx, sxx, sxy):
    mean = sx / n
    var = sxx / n - mean * mean
    cov = sxy / n - mean * mean
    return cov, var


def pearson_jackknife(du: np.ndarray, dv: np.ndarray) -> AssortativityEstimate:
    """Symmetrized Pearson r with a delete-one-edge jackknife standard error."""
    du = np.asarray(du, dtype=float)
    dv = np.asarray(dv, dtype=float)
    e = du.size
    if e < 2:
        raise TooFewEdges(f"need at least 2 edges, have {e}")
    # shift for numerical stability; r is shift invariant
    c = 0.5 * (du.mean() + dv.mean())
    du, dv = du - c, dv - c
    sx, sxx, sxy = _symmetric_stats(du, dv)
    SX, SXX, SXY = sx.sum(), sxx.sum(), sxy.sum()
    cov, var = _corr_from_sums(2 * e, SX, SXX, SXY)
    if var <= 1e-12 * max(1.0, SXX / (2 * e)):
        return AssortativityEstimate(None, 2 * e, None)
    r = cov / var
    cov_i, var_i = _corr_from_sums(2 * (e - 1), SX - sx, SXX - sxx, SXY - sxy)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_i = cov_i / var_i
    r_i = r_i[np.isfinite(r_i)]
    se = math.sqrt((e - 1) / e * np.sum((r_i - r_i.mean()) ** 2))
    return AssortativityEstimate(float(r), 2 * e, se)


def assortativity(snaps: Snapshot | Sequence[Snapshot], exclude_self_loops: bool = True,
                  count_multiplicity: bool = True) -> AssortativityEstimate:
    """Newman degree assortativity; a sequence of snapshots is pooled edge-wise."""
    if isinstance(snaps, Snapshot):
        snaps = [snaps]
    parts = [edge_degree_pairs(s, exclude_self_loops, count_multiplicity) for s in snaps]
    du = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
    dv = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)
    return pearson_jackknife(du, dv)


@dataclass(frozen=True)
class CovarianceEstimate:
    value: float
    stderr: float
    n_edges: int


def edge_degree_covariance(snaps: Snapshot | Sequence[Snapshot],
                           exclude_self_loops: bool = True) -> CovarianceEstimate:
    """Covariance of the two endpoint degrees of a uniform random edge.

    Uses the symmetrized pair list, so it estimates C(D1, D2) with D1, D2
    identically distributed.  Jackknife over edges for the standard error.
    """
    if isinstance(snaps, Snapshot):
        snaps = [snaps]
    parts = [edge_degree_pairs(s, exclude_self_loops) for s in snaps]
    du = np.concatenate([p[0] for p in parts]).astype(float)
    dv = np.concatenate([p[1] for p in parts]).astype(float)
    e = du.size
    if e < 2:
        raise TooFewEdges(f"need at least 2 edges, have {e}")
    c = 0.5 * (du.mean() + dv.mean())
    du, dv = du - c, dv - c
    sx, sxx, sxy = _symmetric_stats(du, dv)
    cov, _ = _corr_from_sums(2 * e, sx.sum(), sxx.sum(), sxy.sum())
    cov_i, _ = _corr_from_sums(2 * (e - 1), sx.sum() - sx, sxx.sum() - sxx, sxy.sum() - sxy)
    se = math.sqrt((e - 1) / e * np.sum((cov_i - cov_i.mean()) ** 2))
    return CovarianceEstimate(float(cov), se, e)


# ---------------------------------------------------------------------------
# degree and age laws


def empirical_degree_hist(snaps: Snapshot | Iterable[Snapshot]) -> np.ndarray:
    """Counts of nodes by degree; index k holds the number of degree-k nodes."""
    if isinstance(snaps, Snapshot):
        snaps = [snaps]
    degs = np.concatenate([s.degree for s in snaps])
    return np.bincount(degs.astype(np.int64))


def total_variation(hist: np.ndarray, pmf: np.ndarray) -> float:
    """TV distance between an empirical histogram and a pmf on 0..len(pmf)-1.

    Mass of the pmf beyond its table and of the histogram beyond the table
    both count toward the distance.
    """
    emp = np.asarray(hist, dtype=float)
    emp = emp / emp.sum()
    pmf = np.asarray(pmf, dtype=float)
    k = max(emp.size, pmf.size)
    e = np.zeros(k)
    p = np.zeros(k)
    e[:emp.size] = emp
    p[:pmf.size] = pmf
    tail = max(0.0, 1.0 - pmf.sum())
    return 0.5 * (np.abs(e - p).sum() + tail)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float
    n: int

    def passes(self, alpha: float = 0.01) -> bool:
        return self.pvalue > alpha

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "pvalue": self.pvalue, "n": self.n}


def empirical_age_ks(snaps: Snapshot | Iterable[Snapshot], lam: float) -> KsResult:
    """One-sample Kolmogorov-Smirnov test of node ages against Exp(lam)."""
    if isinstance(snaps, Snapshot):
        snaps = [snaps]
    ages = np.concatenate([s.age for s in snaps])
    res = stats.kstest(ages, "expon", args=(0.0, 1.0 / lam))
    return KsResult(float(res.statistic), float(res.pvalue), int(ages.size))


def loop_and_multi_fractions(snap: Snapshot) -> tuple[float, float]:
    """Fractions of edge copies that are self-loops and surplus multi-edge copies."""
    m = snap.n_edges
    if m == 0:
        return 0.0, 0.0
    return snap.n_self_loops / m, snap.n_multi_edges / m
