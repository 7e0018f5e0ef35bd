import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynnet.graphstats import (TooFewEdges, assortativity, edge_degree_covariance,
                               edge_degree_pairs, empirical_age_ks, empirical_degree_hist,
                               largest_component, pearson_jackknife, total_variation)
from dynnet.snapshot import Snapshot


def graph(n, edges, ids=None):
    ids = list(range(n)) if ids is None else ids
    a = [ids[e[0]] for e in edges]
    b = [ids[e[1]] for e in edges]
    return Snapshot.from_edges(0.0, ids, np.ones(n), np.ones(n), a, b)


edge_lists = st.integers(2, 25).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1),
                                                       st.integers(0, n - 1)), max_size=60)))


class TestComponents:
    def test_isolated(self):
        assert largest_component(graph(5, [])).fraction == 0.2

    def test_path(self):
        c = largest_component(graph(4, [(0, 1), (1, 2)]))
        assert c.largest == 3 and c.count == 2

    @given(edge_lists)
    def test_matches_networkx(self, ne):
        n, edges = ne
        g = nx.Graph()
        g.add_nodes_from(range(n))
        g.add_edges_from(edges)
        ref = sorted((len(c) for c in nx.connected_components(g)), reverse=True)
        c = largest_component(graph(n, edges))
        assert list(c.sizes) == ref
        assert sum(c.sizes) == n
        assert 0 <= c.fraction <= 1

    @given(edge_lists)
    def test_invariant_to_multiplicity_and_loops(self, ne):
        n, edges = ne
        extra = edges + edges + [(i, i) for i in range(0, n, 3)]
        assert largest_component(graph(n, edges)).sizes == largest_component(graph(n, extra)).sizes

    @given(edge_lists, edge_lists)
    def test_disjoint_union(self, g1, g2):
        (n1, e1), (n2, e2) = g1, g2
        union = graph(n1 + n2, e1 + [(a + n1, b + n1) for a, b in e2])
        expect = sorted(largest_component(graph(n1, e1)).sizes
                        + largest_component(graph(n2, e2)).sizes, reverse=True)
        assert list(largest_component(union).sizes) == expect


class TestAssortativity:
    def test_path_is_minus_one(self):
        assert assortativity(graph(3, [(0, 1), (1, 2)])).r == pytest.approx(-1.0)

    def test_triangle_undefined(self):
        est = assortativity(graph(3, [(0, 1), (1, 2), (0, 2)]))
        assert est.r is None and not est.defined
        with pytest.raises(ValueError):
            est.interval()

    def test_too_few_edges(self):
        with pytest.raises(TooFewEdges):
            assortativity(graph(3, [(0, 1), (2, 2)]))

    @settings(max_examples=60)
    @given(edge_lists)
    def test_matches_networkx_simple_graphs(self, ne):
        n, edges = ne
        edges = sorted({(min(a, b), max(a, b)) for a, b in edges if a != b})
        g = nx.Graph()
        g.add_nodes_from(range(n))
        g.add_edges_from(edges)
        if len(edges) < 2:
            return
        est = assortativity(graph(n, edges))
        degs = [d for _, d in g.degree()]
        ends = [g.degree(v) for e in edges for v in e]
        if np.var(ends) < 1e-12:
            assert est.r is None
            return
        with np.errstate(all="ignore"):
            ref = nx.degree_pearson_correlation_coefficient(g)
        assert est.r == pytest.approx(ref, abs=1e-9)

    @given(edge_lists, st.randoms(use_true_random=False))
    def test_relabeling_invariant(self, ne, rnd):
        n, edges = ne
        if len([e for e in edges if e[0] != e[1]]) < 2:
            return
        ids = list(range(100, 100 + n))
        rnd.shuffle(ids)
        a = assortativity(graph(n, edges))
        b = assortativity(graph(n, edges, ids))
        if a.r is None:
            assert b.r is None
        else:
            assert a.r == pytest.approx(b.r, abs=1e-9)

    def test_shift_invariant(self):
        gen = np.random.default_rng(0)
        du = gen.poisson(3, 500).astype(float)
        dv = du + gen.poisson(1, 500)
        assert pearson_jackknife(du, dv).r == pytest.approx(pearson_jackknife(du - 1, dv - 1).r)
        assert pearson_jackknife(du, dv).r == pytest.approx(pearson_jackknife(du + 7, dv + 7).r)

    def test_jackknife_matches_brute_force(self):
        gen = np.random.default_rng(1)
        du = gen.poisson(2, 60).astype(float) + 1
        dv = gen.poisson(2, 60).astype(float) + 1 + 0.3 * du

        def r(x, y):
            a = np.concatenate([x, y])
            b = np.concatenate([y, x])
            return np.corrcoef(a, b)[0, 1]

        est = pearson_jackknife(du, dv)
        assert est.r == pytest.approx(r(du, dv))
        loo = np.array([r(np.delete(du, i), np.delete(dv, i)) for i in range(du.size)])
        se = math.sqrt((du.size - 1) / du.size * np.sum((loo - loo.mean()) ** 2))
        assert est.stderr == pytest.approx(se, rel=1e-8)

    def test_policy_multiplicity(self):
        s = graph(4, [(0, 1), (0, 1), (1, 2), (2, 3), (3, 3)])
        du, _ = edge_degree_pairs(s)
        assert du.size == 4
        du1, _ = edge_degree_pairs(s, count_multiplicity=False)
        assert du1.size == 3
        du2, _ = edge_degree_pairs(s, exclude_self_loops=False)
        assert du2.size == 5

    def test_covariance_shift_free(self):
        s = graph(6, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 4), (0, 5), (5, 2)])
        du, dv = edge_degree_pairs(s)
        a = np.concatenate([du, dv])
        b = np.concatenate([dv, du])
        cov = np.mean(a * b) - a.mean() * b.mean()
        assert edge_degree_covariance(s).value == pytest.approx(cov)


class TestDistributions:
    def test_isolated_hist(self):
        assert empirical_degree_hist(graph(7, [])).tolist() == [7]

    def test_hist_counts(self):
        h = empirical_degree_hist(graph(4, [(0, 1), (1, 2), (3, 3)]))
        assert h.tolist() == [0, 2, 2]

    def test_ks_on_exact_exponential(self):
        n = 100_000
        ages = np.random.default_rng(3).exponential(1.0, n)
        s = Snapshot.from_edges(0.0, np.arange(n), ages, np.ones(n), [], [])
        ks = empirical_age_ks(s, 1.0)
        assert ks.statistic < 1.63 / math.sqrt(n)
        assert ks.passes(0.01)

    def test_ks_rejects_wrong_rate(self):
        n = 20_000
        ages = np.random.default_rng(3).exponential(1.0, n)
        s = Snapshot.from_edges(0.0, np.arange(n), ages, np.ones(n), [], [])
        assert not empirical_age_ks(s, 1.2).passes(0.01)

    def test_total_variation(self):
        assert total_variation(np.array([5, 5]), np.array([0.5, 0.5])) == pytest.approx(0)
        assert total_variation(np.array([10]), np.array([0.5, 0.5])) == pytest.approx(0.5)
        # pmf mass missing from the table counts as distance
        assert total_variation(np.array([10]), np.array([0.9])) == pytest.approx(0.1)
