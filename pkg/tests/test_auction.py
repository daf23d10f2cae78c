import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from retrade.auction import (
    BASELINE_POPULATION,
    DaConfig,
    DaSession,
    RetradeConfig,
    reseed,
    run_da_session,
    run_retrade_session,
)
from retrade.dists import Dist
from retrade.errors import ConfigError, NoTraders
from retrade.market import TraderPopulation, equilibrium_interval, surplus_trajectory
from retrade.speculative import TrendRule


def test_single_pair_trades_once_inside_band():
    pop = TraderPopulation((10,), (5,))
    log = run_da_session(DaConfig(periods=1, steps_per_period=100, bounds=(1, 20)), pop)
    assert len(log) == 1
    assert 5 <= log.prices[0] <= 10


def test_disjoint_supports_give_empty_log():
    pop = TraderPopulation((3, 4), (8, 9))
    assert len(run_da_session(DaConfig(periods=3, bounds=(1, 20)), pop)) == 0


def test_validation_errors():
    with pytest.raises(NoTraders):
        run_da_session(DaConfig(), TraderPopulation((10,), ()))
    with pytest.raises(ConfigError):
        run_da_session(DaConfig(steps_per_period=3), BASELINE_POPULATION)
    with pytest.raises(ConfigError):
        run_da_session(DaConfig(bounds=(100, 1000)), BASELINE_POPULATION)
    with pytest.raises(ConfigError):
        DaConfig(initial_shade=1.0)
    with pytest.raises(ConfigError):
        RetradeConfig(cash_endowment=-1)


def test_no_loss_and_unit_limits():
    pop = BASELINE_POPULATION
    for seed in range(20):
        session = DaSession(DaConfig(seed=seed), pop)
        log = session.run()
        for c in log:
            buyer, seller = session.agents[c.buyer], session.agents[c.seller]
            assert seller.reservation <= c.price <= buyer.reservation
        per_period = {}
        for c in log:
            per_period.setdefault((c.period, c.buyer), 0)
            per_period[(c.period, c.buyer)] += 1
            per_period.setdefault((c.period, c.seller), 0)
            per_period[(c.period, c.seller)] += 1
        assert max(per_period.values()) <= 1


def test_reproducible():
    cfg = RetradeConfig(DaConfig(seed=5), cash_endowment=300)
    a = run_retrade_session(cfg, BASELINE_POPULATION)
    b = run_retrade_session(cfg, BASELINE_POPULATION)
    assert a.entries == b.entries
    assert run_da_session(DaConfig(seed=5), BASELINE_POPULATION).entries == \
        run_da_session(DaConfig(seed=5), BASELINE_POPULATION).entries


def test_zero_cash_equals_plain_double_auction():
    for seed in range(10):
        da = run_da_session(DaConfig(seed=seed), BASELINE_POPULATION)
        rt = run_retrade_session(RetradeConfig(DaConfig(seed=seed), 0), BASELINE_POPULATION)
        assert da.entries == rt.entries


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 1500), st.floats(0.0, 1.2), st.floats(0.0, 0.05))
def test_budget_and_conservation_hold_every_step(seed, cash, trend, noise):
    cfg = RetradeConfig(DaConfig(seed=seed, periods=4), cash, TrendRule((Dist.normal(trend, 0.4),), noise))
    session = DaSession(cfg.base, BASELINE_POPULATION, cfg, audit=True)
    session.run()  # audit mode checks after every contract
    session.check_invariants()
    for a in session.agents:
        assert a.cash >= 0
        assert a.spec_spent <= cash + a.resale_income


def test_retrade_sessions_mark_speculative_contracts():
    log = run_retrade_session(RetradeConfig(DaConfig(seed=1), 1000), BASELINE_POPULATION)
    assert any(c.retrade for c in log)
    assert not any(c.retrade for c in run_da_session(DaConfig(seed=1), BASELINE_POPULATION))


def test_baseline_last_period_mean_near_interval():
    pop = BASELINE_POPULATION
    iv = equilibrium_interval(pop)
    hits = 0
    for seed in range(200):
        log = run_da_session(DaConfig(seed=seed), pop)
        last = log.period_prices(max(c.period for c in log))
        m = float(np.mean(last))
        hits += iv.low - 2 <= m <= iv.high + 2
    assert hits >= 190


def test_zero_trend_retrade_converges_like_baseline():
    pop = BASELINE_POPULATION
    base, flat = [], []
    for seed in range(100):
        base.append(surplus_trajectory(run_da_session(DaConfig(seed=seed), pop), pop).violation_fraction)
        cfg = RetradeConfig(DaConfig(seed=seed), 400, TrendRule.zero())
        flat.append(surplus_trajectory(run_retrade_session(cfg, pop), pop).violation_fraction)
    assert np.mean(flat) <= 0.05
    assert abs(np.mean(flat) - np.mean(base)) <= 0.02


def test_more_cash_more_price_variance():
    pop = BASELINE_POPULATION
    moderate, high = [], []
    for seed in range(200):
        moderate.append(np.var(run_retrade_session(RetradeConfig(DaConfig(seed=seed), 150), pop).prices))
        high.append(np.var(run_retrade_session(RetradeConfig(DaConfig(seed=seed), 600), pop).prices))
    assert np.mean(high) > np.mean(moderate)


def test_reseed_handles_both_configs():
    assert reseed(DaConfig(seed=1), 9).seed == 9
    r = reseed(RetradeConfig(DaConfig(seed=1), 5), 9)
    assert r.base.seed == 9 and r.cash_endowment == 5
