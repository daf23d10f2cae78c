"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) and then
asserts, so a failing criterion both prints and fails.
"""

import time

import numpy as np
from scipy import stats

from retrade import cli
from retrade.auction import BASELINE_POPULATION, DaConfig, RetradeConfig, run_da_session, run_retrade_session
from retrade.config import build_news, build_rule, resolve
from retrade.dists import Dist
from retrade.market import TraderPopulation, equilibrium_interval, potential_surplus, surplus_trajectory
from retrade.noarb import (
    BinomialTreeSpec,
    IidDividendSpec,
    LinearUtility,
    PowerUtility,
    TradingStrategy,
    buy_and_hold,
    generate_martingale_market,
    jensen_check,
    momentum,
    test_no_retrade_advantage as no_retrade_advantage,
    wealth_path,
)
from retrade.speculative import (
    KestenParams,
    NewsProcess,
    calibrated_coefficients,
    simulate_kesten,
    simulate_speculative_market,
    tail_exponent_oracle,
)
from retrade.tails import acf_report, hill


def test_c1_equilibrium_matches_brute_force(criterion):
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        n_b = int(rng.integers(0, 26))
        n_s = int(rng.integers(0 if n_b else 1, 26))
        pop = TraderPopulation(tuple(rng.integers(0, 1001, n_b).tolist()),
                               tuple(rng.integers(0, 1001, n_s).tolist()))
        iv = equilibrium_interval(pop, (0, 1000))
        # independent oracle: evaluate V directly on every grid point
        grid = np.arange(0, 1001)
        v = np.zeros(grid.size, dtype=np.int64)
        for b in pop.values:
            v += np.maximum(b - grid, 0)
        for c in pop.costs:
            v += np.maximum(grid - c, 0)
        hits = grid[v == v.min()]
        mismatches += (iv.low, iv.high) != (int(hits[0]), int(hits[-1]))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    criterion(1, ok, f"{mismatches} mismatches in 1000 populations, {elapsed:.1f}s")
    assert ok


def test_c2_baseline_sessions_follow_surplus_descent(criterion):
    pop = BASELINE_POPULATION
    v_min = potential_surplus(equilibrium_interval(pop).low, pop)
    t0 = time.perf_counter()
    fracs, close = [], []
    for seed in range(200):
        log = run_da_session(DaConfig(seed=seed), pop)
        fracs.append(surplus_trajectory(log, pop).violation_fraction)
        last = log.period_prices(max(c.period for c in log))
        close.append(abs(potential_surplus(last[-1], pop) - v_min) <= 0.1 * v_min)
    elapsed = time.perf_counter() - t0
    mean_frac = float(np.mean(fracs))
    ok = mean_frac <= 0.05 and all(close) and elapsed < 30
    criterion(2, ok, f"mean violation {mean_frac:.4f}, final V within 10% in {np.mean(close):.0%}, "
                     f"{elapsed:.1f}s")
    assert ok


def test_c3_retrade_raises_price_variance(criterion):
    pop = BASELINE_POPULATION
    seeds = range(200)
    base = [run_da_session(DaConfig(seed=s), pop).prices for s in seeds]
    low = [run_retrade_session(RetradeConfig(DaConfig(seed=s), 120), pop).prices for s in seeds]
    high = [run_retrade_session(RetradeConfig(DaConfig(seed=s), 1200), pop).prices for s in seeds]
    var = {k: [float(np.var(p)) for p in v] for k, v in (("base", base), ("low", low), ("high", high))}
    p1 = stats.mannwhitneyu(var["low"], var["base"], alternative="greater").pvalue
    p2 = stats.mannwhitneyu(var["high"], var["low"], alternative="greater").pvalue
    pooled = [float(np.var(np.concatenate(v))) for v in (base, low, high)]
    ok = p1 < 0.01 and p2 < 0.01 and pooled[0] < pooled[1] < pooled[2]
    criterion(3, ok, f"pooled variance {pooled[0]:.1f} < {pooled[1]:.1f} < {pooled[2]:.1f}, "
                     f"rank p {p1:.1e}, {p2:.1e}")
    assert ok


def test_c4_inverse_cubic_tail(criterion):
    t0 = time.perf_counter()
    coef = calibrated_coefficients(3.0)
    series = simulate_kesten(KestenParams((coef,), T=1_000_000, seed=1))
    a_kesten, _ = hill(series)
    u = np.random.default_rng(2).random(1_000_000)
    a_pareto, _ = hill((1.0 - u) ** (-1.0 / 3.0))
    elapsed = time.perf_counter() - t0
    ok = abs(a_kesten - 3) <= 0.3 and abs(a_pareto - 3) <= 0.1 and elapsed < 60
    criterion(4, ok, f"Kesten Hill {a_kesten:.3f}, Pareto Hill {a_pareto:.3f}, {elapsed:.1f}s")
    assert ok


def test_c5_oracle_self_consistency(criterion):
    # stratified inverse-CDF sampling: one draw per probability stratum
    n = 10_000_000
    rng = np.random.default_rng(5)
    results = []
    for scale in (0.75, 0.8557429192, 1.0):
        kappa = tail_exponent_oracle(Dist.normal(0.0, scale))
        u = (np.arange(n) + rng.random(n)) / n
        a = np.abs(stats.norm.ppf(u, scale=scale))
        results.append((scale, kappa, float(np.mean(a ** kappa))))
    ok = all(abs(m - 1) <= 1e-3 for _, _, m in results)
    criterion(5, ok, ", ".join(f"s={s:.3f} k={k:.3f} E={m:.5f}" for s, k, m in results))
    assert ok


def test_c6_clustering_dichotomy(criterion):
    cfg = resolve("simulate-spec")
    rule, news = build_rule(cfg["rule"]), build_news(cfg["news"])
    t0 = time.perf_counter()
    on = acf_report(simulate_speculative_market(rule, news, cfg["n_agents"], 100_000, 1))
    flat = NewsProcess.constant(news.scale_turbulent)
    off = acf_report(simulate_speculative_market(rule, flat, cfg["n_agents"], 100_000, 1))
    elapsed = time.perf_counter() - t0
    raw_in = 1 - on.frac_outside("raw")
    abs_on, abs_off = on.frac_above("absolute"), off.frac_above("absolute")
    ok = raw_in >= 0.9 and abs_on >= 0.6 and abs_off <= 0.1 and elapsed < 30
    criterion(6, ok, f"regimes on: raw inside {raw_in:.2f}, abs above {abs_on:.2f}; "
                     f"off: abs above {abs_off:.2f}, {elapsed:.1f}s")
    assert ok


def test_c7_no_retrade_advantage(criterion):
    t0 = time.perf_counter()
    fair = no_retrade_advantage(BinomialTreeSpec.multiplicative(10), momentum(), 100_000, seed=7)
    drift = no_retrade_advantage(BinomialTreeSpec.multiplicative(10, drift=0.05), momentum(), 100_000, seed=7)
    panel = generate_martingale_market(BinomialTreeSpec.multiplicative(10), n_paths=100_000, seed=7)
    R = wealth_path(panel, buy_and_hold()).R
    elapsed = time.perf_counter() - t0
    zero = bool(np.all(R == 0.0))
    ok = abs(fair.pooled_z) < 3 and drift.pooled_z > 3 and zero and elapsed < 60
    criterion(7, ok, f"martingale z {fair.pooled_z:+.2f}, drifting z {drift.pooled_z:+.1f}, "
                     f"zero trades R==0 {zero}, {elapsed:.1f}s")
    assert ok


def test_c8_jensen_no_trade(criterion):
    spec = BinomialTreeSpec.multiplicative(10)
    power = jensen_check(PowerUtility(2.0), spec, momentum(), 100_000, seed=8, initial_cash=200.0)
    linear = jensen_check(LinearUtility(), spec, momentum(), 100_000, seed=8)
    ok = power.diff <= 3 * power.stderr and abs(linear.diff) <= 3 * linear.stderr
    criterion(8, ok, f"power diff {power.diff:+.3e} (se {power.stderr:.1e}), "
                     f"linear diff {linear.diff:+.3e} (se {linear.stderr:.1e})")
    assert ok


def test_c9_identity_audit(criterion):
    rng = np.random.default_rng(9)
    random_trades = TradingStrategy(lambda p, d: rng.normal(0, 5, size=(p.shape[0], p.shape[2])), (1.0, -2.0))
    runs = [
        (BinomialTreeSpec.multiplicative(10), momentum(), 1),
        (BinomialTreeSpec.multiplicative(10, drift=0.05), momentum(sell_on_down=True), 1),
        (BinomialTreeSpec.coin_dividend(12, 0.5, 0.95), random_trades, 2),
        (IidDividendSpec((0.0, 1.0, 4.0), (0.5, 0.3, 0.2), 0.9), random_trades, 2),
    ]
    worst = 0.0
    for spec, strat, m in runs:
        panel = generate_martingale_market(spec, T=8 if isinstance(spec, IidDividendSpec) else None,
                                           n_assets=m, seed=3, n_paths=20_000)
        wp = wealth_path(panel, strat)  # raises on any violation
        p, d, dH, H = panel.prices, panel.dividends, wp.trades, wp.holdings
        rhs = ((p[:, 1:] - p[:, :-1] + d[:, 1:]) * dH[:, 1:]).sum(axis=2)
        lhs = wp.W[:, 1:] - wp.W_hold[:, 1:]
        scale = np.maximum((np.abs(p[:, 1:] * H[:, 1:]) + np.abs(dH[:, 1:] * p[:, :-1])
                            + np.abs(d[:, 1:] * H[:, 1:])).sum(axis=2) + np.abs(wp.W_hold[:, 1:]), 1.0)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    ok = worst <= 1e-12
    criterion(9, ok, f"worst relative identity error {worst:.2e} over {len(runs)} runs")
    assert ok


def test_c10_cli_reproducible(criterion, tmp_path, capsys):
    series = tmp_path / "returns.csv"
    argvs = {
        "simulate-da": ["--sessions", "3"],
        "simulate-retrade": ["--sessions", "2"],
        "simulate-spec": ["--steps", "5000"],
        "simulate-kesten": ["--steps", "5000"],
        "analyze-tails": ["--input", str(series)],
        "analyze-acf": ["--input", str(series)],
        "noarb-check": ["--paths", "2000"],
        "jensen-check": ["--paths", "2000"],
        "equilibrium": ["--values", "10 8 7", "--costs", "3 9"],
    }
    differing = []
    for name, extra in argvs.items():
        outputs = []
        for rep in ("a", "b"):
            out = tmp_path / name / rep
            seed = ["--seed", "4"] if "--input" not in extra and name != "equilibrium" else []
            code = cli.main([name, *extra, *seed, "--out", str(out)])
            assert code == 0, name
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
            if name == "simulate-kesten" and rep == "a":
                series.write_bytes((out / "returns.csv").read_bytes())
        capsys.readouterr()
        if outputs[0] != outputs[1]:
            differing.append(name)
    ok = not differing
    criterion(10, ok, f"{len(argvs)} subcommands rerun, differing: {differing or 'none'}")
    assert ok
