import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynnet.core import (Constant, Discrete, Exponential, InfiniteMoment, LogNormal,
                         ModelParams, NegativeRate, Pareto, RngStream, SubcriticalPopulation,
                         TwoPoint, Version, ZeroGamma, config_from_dict, config_to_dict,
                         distribution_from_dict, moments, parse_distribution, sample_index,
                         validate)


class TestValidate:
    def test_ok(self):
        validate(ModelParams(1, 0.5, 1, 0.5))

    def test_subcritical(self):
        with pytest.raises(SubcriticalPopulation):
            ModelParams(0.5, 1, 1, 1)

    def test_equal_rates_subcritical(self):
        with pytest.raises(SubcriticalPopulation):
            ModelParams(1, 1, 1, 1)

    def test_zero_gamma_dynamics_legal(self):
        p = ModelParams(1, 0, 1, 0)
        validate(p, analytic=False)
        with pytest.raises(ZeroGamma):
            validate(p)

    def test_negative_rate(self):
        with pytest.raises(NegativeRate):
            ModelParams(1, 0.5, -1, 0.5)

    def test_gamma_accessor(self):
        p = ModelParams(2, 0.3, 1, 0.4, "P")
        assert p.gamma == pytest.approx(0.7)
        assert p.version is Version.P
        assert p.with_(beta=1.0).gamma == pytest.approx(1.3)


class TestMoments:
    def test_constant(self):
        assert moments(Constant(1)) == (1, 1, 1)

    def test_two_point(self):
        assert moments(TwoPoint(1, 2, 0.5)) == pytest.approx((1.5, 2.5, 4.5), rel=1e-15)

    def test_exponential(self):
        assert moments(Exponential(1.0)) == pytest.approx((1, 2, 6))

    def test_pareto_infinite(self):
        m1, m2, m3 = moments(Pareto(2.5, 1.0))
        assert m1 == pytest.approx(2.5 / 1.5)
        assert m2 == pytest.approx(2.5 / 0.5)
        assert math.isinf(m3)
        with pytest.raises(InfiniteMoment):
            Pareto(2.5, 1.0).require_moments(3)

    def test_lognormal(self):
        d = LogNormal(0.1, 0.3)
        for k in (1, 2, 3):
            assert d.moment(k) == pytest.approx(math.exp(k * 0.1 + k * k * 0.3 / 2))

    def test_discrete(self):
        d = Discrete((1.0, 2.0, 4.0), (0.25, 0.25, 0.5))
        assert d.m1 == pytest.approx(2.75)
        assert d.m2 == pytest.approx(0.25 + 1 + 8)

    @given(st.floats(0.01, 100))
    def test_constant_powers(self, s):
        assert moments(Constant(s)) == pytest.approx((s, s * s, s ** 3), rel=1e-12)


dist_strategy = st.one_of(
    st.builds(Constant, st.floats(0.01, 50)),
    st.builds(TwoPoint, st.floats(0.01, 5), st.floats(5.01, 20), st.floats(0.01, 0.99)),
    st.builds(Exponential, st.floats(0.05, 20)),
    st.builds(Pareto, st.floats(3.05, 10), st.floats(0.1, 5)),
    st.builds(LogNormal, st.floats(-2, 2), st.floats(0.01, 1.0)),
)


@given(dist_strategy)
def test_cauchy_schwarz(d):
    m1, m2, m3 = d.moments()
    assert m1 * m1 <= m2 * (1 + 1e-12)
    assert m2 * m2 <= m1 * m3 * (1 + 1e-12)


@given(dist_strategy, st.sampled_from(["U", "P"]))
def test_config_round_trip(d, version):
    p = ModelParams(1.5, 0.5, 0.7, 0.25, version)
    text = json.dumps(config_to_dict(p, d))
    p2, d2 = config_from_dict(json.loads(text))
    assert p2 == p
    assert d2 == d


@pytest.mark.parametrize("text,expected", [
    ("const:1", Constant(1.0)),
    ("two:1,2,0.5", TwoPoint(1.0, 2.0, 0.5)),
    ("exp:2", Exponential(2.0)),
    ("pareto:3,1", Pareto(3.0, 1.0)),
    ("lognormal:0,0.5", LogNormal(0.0, 0.5)),
    ("discrete:1@0.2,2@0.8", Discrete((1.0, 2.0), (0.2, 0.8))),
])
def test_parse_distribution(text, expected):
    assert parse_distribution(text) == expected
    assert distribution_from_dict(expected.to_dict()) == expected


class TestSampling:
    def test_constant(self):
        assert sample_index(Constant(2), RngStream(1)) == 2

    def test_two_point_frequency(self):
        x = TwoPoint(1, 2, 0.5).sample(RngStream(3).gen, 100_000)
        assert abs(np.mean(x == 1) - 0.5) < 0.01

    def test_exponential_mean(self):
        x = Exponential(1.0).sample(RngStream(4).gen, 1_000_000)
        assert abs(x.mean() - 1) < 0.005

    @pytest.mark.parametrize("d", [TwoPoint(1, 3, 0.3), Exponential(2.0), Pareto(3.5, 1.0),
                                   LogNormal(0.2, 0.4), Discrete((1.0, 5.0), (0.9, 0.1))])
    def test_mean_within_five_stderr(self, d):
        x = d.sample(RngStream(5).gen, 1_000_000)
        se = math.sqrt(d.variance / x.size)
        assert abs(x.mean() - d.m1) < 5 * se

    def test_replay_is_exact(self):
        a = RngStream(42, 3).gen.random(1000)
        b = RngStream(42, 3).gen.random(1000)
        assert a.tobytes() == b.tobytes()
        r1, r2 = RngStream(42, 3), RngStream(42, 3)
        assert [r1.uniform() for _ in range(10_000)] == [r2.uniform() for _ in range(10_000)]

    def test_streams_differ(self):
        a = RngStream(42, 3).gen.random(100)
        b = RngStream(42, 4).gen.random(100)
        c = RngStream(42, 3).substream(0).gen.random(100)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_streams_uncorrelated(self):
        a = RngStream(7, 0).gen.random(200_000)
        b = RngStream(7, 1).gen.random(200_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(a.size)
