import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from retrade.errors import Empty, NonPositivePrice, TailTooSmall, TooShort, ZeroMagnitudes, ZeroVariance
from retrade.series import ReturnSeries
from retrade.tails import (
    AcfReport,
    TailFit,
    acf,
    acf_report,
    ccdf,
    fit_powerlaw,
    hill,
    hill_scan,
    returns_from_prices,
)


def pareto(alpha, n, seed, xmin=1.0):
    u = np.random.default_rng(seed).random(n)
    return xmin * (1.0 - u) ** (-1.0 / alpha)


def hill_oracle(x, k):
    x = sorted(x)
    n = len(x)
    return k / sum(math.log(x[n - i] / x[n - k - 1]) for i in range(1, k + 1))


def acf_oracle(x, lag):
    x = np.asarray(x, float)
    d = x - x.mean()
    return float(np.dot(d[:-lag], d[lag:]) / np.dot(d, d))


# ---------------------------------------------------------------------------
# returns


def test_returns_from_prices_examples():
    np.testing.assert_allclose(returns_from_prices([100, 110]).returns, [0.1])
    assert np.all(returns_from_prices([5, 5, 5]).returns == 0)
    assert returns_from_prices([100, 50, 100]).returns.tolist() == [-0.5, 1.0]
    with pytest.raises(NonPositivePrice):
        returns_from_prices([100, 0, 3])
    with pytest.raises(TooShort):
        returns_from_prices([100])


def test_with_prices_floors_and_reconstructs():
    s = ReturnSeries([0.1, -2.0, 0.5]).with_prices(100.0)
    assert s.n_truncated == 1
    assert s.returns[1] == -0.99
    assert s.prices[-1] == pytest.approx(100 * 1.1 * 0.01 * 1.5)


# ---------------------------------------------------------------------------
# ccdf


def test_ccdf_examples():
    c = ccdf([1.0, -2.0, 3.0])
    assert c.x.tolist() == [1.0, 2.0, 3.0]
    np.testing.assert_allclose(c.prob, [1, 2 / 3, 1 / 3])
    c = ccdf([2.0] * 5)
    assert c.x.tolist() == [2.0] and c.prob.tolist() == [1.0]
    with pytest.raises(Empty):
        ccdf([])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60), st.randoms())
def test_ccdf_permutation_invariant_and_monotone(xs, rnd):
    shuffled = list(xs)
    rnd.shuffle(shuffled)
    a, b = ccdf(xs), ccdf(shuffled)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.prob, b.prob)
    assert a.prob[0] == 1.0
    assert np.all(np.diff(a.prob) < 0)


def test_pareto_ccdf_slope_top_decade():
    c = ccdf(pareto(3.0, 1_000_000, 1))
    assert c.tail_slope() == pytest.approx(-3.0, abs=0.15)


# ---------------------------------------------------------------------------
# Hill


def test_hill_matches_oracle_on_random_sample():
    x = np.random.default_rng(2).lognormal(size=500)
    for k in (10, 37, 200):
        a, se = hill(x, k)
        assert a == pytest.approx(hill_oracle(x, k), rel=1e-12)
        assert se == pytest.approx(a / math.sqrt(k))


def test_hill_geometric_sequence_closed_form():
    # x_i = 2^i, i = 1..20, k = 10: threshold 2^10, log-excesses 1..10 times log 2
    x = 2.0 ** np.arange(1, 21)
    a, _ = hill(x, 10)
    assert a == pytest.approx(10 / (55 * math.log(2)), rel=1e-12)


def test_hill_refuses_small_tails():
    x = 2.0 ** np.arange(1, 11)
    with pytest.raises(TailTooSmall):
        hill(x, 5)
    with pytest.raises(TailTooSmall):
        hill(np.arange(1.0, 20.0), 19)
    with pytest.raises(ZeroMagnitudes):
        hill(np.r_[np.zeros(50), np.arange(1.0, 11.0)], 10)


def test_hill_default_is_top_percent():
    x = pareto(3.0, 50_000, 4)
    assert hill(x) == hill(x, 500)
    assert hill(x[:500]) == hill(x[:500], 10)


def test_hill_pareto_accuracy():
    a, _ = hill(pareto(3.0, 1_000_000, 5))
    assert a == pytest.approx(3.0, abs=0.1)


def test_hill_consistency_error_shrinks_with_k():
    x = pareto(3.0, 1_000_000, 6)
    errs = [abs(hill(x, k)[0] - 3.0) for k in (100, 1000, 10_000, 100_000)]
    # allow one non-monotone step from sampling noise, but the trend must be down
    assert errs[-1] < errs[0]
    assert errs[-1] < 0.03


def test_hill_scan_flags_exponential_drift():
    x = np.random.default_rng(7).exponential(size=1_000_000)
    scan = hill_scan(x)
    assert not scan.stable
    assert scan.alpha[-1] < scan.alpha[0]  # alpha grows as k shrinks
    assert hill_scan(pareto(3.0, 1_000_000, 7)).stable


# ---------------------------------------------------------------------------
# KS-selected fit


def test_fit_powerlaw_pareto():
    # The KS curve is nearly flat on an exact power law, so a single cutoff is
    # noisy; its typical location over seeds is what must sit in the bottom decile.
    quantiles = []
    for seed in range(9):
        x = pareto(3.0, 100_000, seed)
        fit = fit_powerlaw(x)
        assert fit.alpha == pytest.approx(3.0, abs=0.15)
        assert fit.alpha == hill(x, fit.n_tail)[0]
        assert not fit.poor_fit
        quantiles.append(np.mean(x < fit.xmin))
    assert np.median(quantiles) <= 0.1


def test_fit_powerlaw_gaussian_is_flagged():
    fit = fit_powerlaw(np.random.default_rng(9).normal(size=200_000))
    assert fit.poor_fit


def test_fit_powerlaw_mixture():
    rng = np.random.default_rng(10)
    n = 200_000
    body = np.abs(rng.normal(size=n))
    top = rng.random(n) < 0.1
    x = np.where(top, 2.5 * pareto(3.0, n, 11), body)
    fit = fit_powerlaw(x)
    assert fit.alpha == pytest.approx(3.0, abs=0.3)
    # cutoff sits where the Pareto component takes over from the normal body
    assert 2.5 <= fit.xmin <= 6.0


def test_fit_powerlaw_errors_and_validation():
    with pytest.raises(TooShort):
        fit_powerlaw(np.arange(1.0, 50.0))
    with pytest.raises(Exception):
        TailFit(alpha=-1.0, xmin=1.0, ks_stat=0.1, n_tail=20, stderr=0.1)


# ---------------------------------------------------------------------------
# autocorrelation


def test_acf_matches_direct_sum():
    x = np.random.default_rng(12).normal(size=3000)
    got = acf(x, 20)
    np.testing.assert_allclose(got, [acf_oracle(x, k) for k in range(1, 21)], rtol=1e-10, atol=1e-13)


def test_acf_alternating_series():
    T = 1000
    x = np.tile([1.0, -1.0], T // 2)
    assert acf(x, 1)[0] == pytest.approx(-(T - 1) / T, abs=1e-12)


def test_acf_errors():
    with pytest.raises(ZeroVariance):
        acf(np.full(100, 3.0), 5)
    with pytest.raises(TooShort):
        acf(np.arange(5.0), 5)
    with pytest.raises(ZeroVariance):
        acf_report(np.zeros(10))
    with pytest.raises(TooShort):
        acf_report(np.arange(400.0), 50)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(-100, 100))
def test_acf_affine_invariant_and_bounded(seed, a, b):
    x = np.random.default_rng(seed).standard_t(3, size=600)
    r1 = acf(x, 10)
    r2 = acf(a * x + b, 10)
    np.testing.assert_allclose(r1, r2, atol=1e-9)
    assert np.all(np.abs(r1) <= 1)


def test_white_noise_inside_band():
    rep = acf_report(np.random.default_rng(13).normal(size=100_000), 50)
    assert isinstance(rep, AcfReport)
    assert rep.band == pytest.approx(1.96 / math.sqrt(100_000))
    assert 1 - rep.frac_outside("raw") >= 0.9
    assert not rep.heavy_tail_warning


def test_heavy_tail_warning():
    rep = acf_report(np.random.default_rng(14).normal(size=1000), 10, tail_alpha=1.8)
    assert rep.heavy_tail_warning and rep.notes
