import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from retrade.dists import Dist
from retrade.errors import DistributionError


def normal_abs_moment(sigma, k):
    return sigma ** k * 2 ** (k / 2) * math.gamma((k + 1) / 2) / math.sqrt(math.pi)


def t_abs_moment(nu, k):
    return (nu ** (k / 2) * math.gamma((k + 1) / 2) * math.gamma((nu - k) / 2)
            / (math.sqrt(math.pi) * math.gamma(nu / 2)))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.1, 8.0))
def test_normal_abs_moment_matches_closed_form(sigma, k):
    got = Dist.normal(0.0, sigma).abs_moment(k)
    assert got == pytest.approx(normal_abs_moment(sigma, k), rel=1e-9)


@pytest.mark.parametrize("s,k", [(0.5, 1), (1.5, 3), (2.0, 0.7)])
def test_uniform_abs_moment(s, k):
    assert Dist.uniform(-s, s).abs_moment(k) == pytest.approx(s ** k / (k + 1), rel=1e-10)


@pytest.mark.parametrize("nu,k", [(5, 1), (5, 3), (10, 2.5)])
def test_student_t_abs_moment(nu, k):
    assert Dist.student_t(nu).abs_moment(k) == pytest.approx(t_abs_moment(nu, k), rel=1e-8)


def test_student_t_moment_beyond_df_is_infinite():
    assert Dist.student_t(3).abs_moment(3) == math.inf


def test_discrete_moments_exact():
    assert Dist.two_point(0.25, 2.0, 0.5).abs_moment(2) == (0.0625 + 4.0) / 2
    assert Dist.degenerate(-3.0).abs_moment(2) == 9.0
    assert Dist.normal(0.7, 0.0).abs_moment(1) == 0.7


def test_mean_log_abs():
    # E log|Z| = -(euler_gamma + log 2) / 2 for a standard normal
    assert Dist.normal().mean_log_abs() == pytest.approx(-(np.euler_gamma + math.log(2)) / 2, rel=1e-9)
    assert Dist.degenerate(0.0).mean_log_abs() == -math.inf
    assert Dist.two_point(-2.0, 2.0).mean_log_abs() == pytest.approx(math.log(2))


def test_round_trip_and_validation():
    for d in (Dist.normal(1, 2), Dist.uniform(-1, 1), Dist.student_t(4, 0, 1), Dist.two_point(0, 1, 0.3),
              Dist.degenerate(2)):
        assert Dist.from_dict(d.to_dict()) == d
    with pytest.raises(DistributionError):
        Dist("cauchy", {})
    with pytest.raises(DistributionError):
        Dist("normal", {"loc": 0})
    with pytest.raises(DistributionError):
        Dist.from_dict({"loc": 0, "scale": 1})
    with pytest.raises(DistributionError):
        Dist.uniform(1, 0)


def test_sampling_moments():
    rng = np.random.default_rng(0)
    x = Dist.normal(1.0, 2.0).sample(rng, 200_000)
    assert x.mean() == pytest.approx(1.0, abs=0.02)
    assert x.std() == pytest.approx(2.0, abs=0.02)
    y = Dist.two_point(-1.0, 3.0, 0.25).sample(rng, 200_000)
    assert set(np.unique(y)) == {-1.0, 3.0}
    assert np.mean(y == 3.0) == pytest.approx(0.25, abs=0.005)
