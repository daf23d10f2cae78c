"""Command-line front end.

Every subcommand resolves a parameter tree (defaults, ``--config`` file,
``--set key=value`` overrides, then dedicated flags), runs one experiment and
writes CSV tables plus ``summary.json`` and the resolved ``config.yaml`` to
the output directory. Exit codes: 0 success, 1 usage error, 2 data error,
3 failed ``--assert`` check.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import auction, files, market, noarb, speculative, tails
from . import config as cfgmod
from .dists import Dist
from .errors import ConfigError, DataError, IdentityViolation, NoValidTail

OUT_ENV = "RETRADE_OUT"
DEFAULT_OUT = "retrade-out"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ASSERT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class Run:
    """Output sink for one invocation; all files are written at the end."""

    def __init__(self, command: str, cfg: dict, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.prov = files.provenance(command, cfg, cfg.get("seed"))
        self.tables: list = []
        self.summary: dict = {"command": command}
        self.checks: dict = {}

    def table(self, name, header, rows):
        self.tables.append((name, header, list(rows)))

    def series(self, name, values, column):
        self.tables.append((name, column, np.asarray(values, dtype=float)))

    def check(self, name: str, ok: bool):
        self.checks[name] = bool(ok)

    def flush(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        for name, header, rows in self.tables:
            if isinstance(header, str):
                files.write_series(self.out / name, rows, header, self.prov)
            else:
                files.write_table(self.out / name, header, rows, self.prov)
        (self.out / "config.yaml").write_text(cfgmod.dump_config(self.cfg))
        if self.checks:
            self.summary["checks"] = self.checks
        files.write_summary(self.out / "summary.json", self.summary, self.prov)


# ---------------------------------------------------------------------------
# subcommands


def _session_rows(k: int, log, traj):
    for c, (v, bad) in zip(log, traj):
        yield (k, c.time, c.period, c.price, c.buyer, c.seller, c.retrade, v, bad)


def _sessions(run: Run, retrade: bool):
    cfg = run.cfg
    pop = cfgmod.build_population(cfg)
    base = cfgmod.build_retrade(cfg) if retrade else cfgmod.build_da(cfg)
    n = int(cfg["sessions"])
    if n < 1:
        raise ConfigError("sessions must be >= 1")
    interval = market.equilibrium_interval(pop)
    v_min = market.potential_surplus(interval.low, pop)
    detail, per = [], []
    variances = []
    for k in range(n):
        c = auction.reseed(base, int(cfg["seed"]) + k)
        log = auction.run_retrade_session(c, pop) if retrade else auction.run_da_session(c, pop)
        if not len(log):
            per.append((k, 0, "nan", "nan", "nan"))
            variances.append(0.0)
            continue
        traj = market.surplus_trajectory(log, pop)
        detail.extend(_session_rows(k, log, traj))
        last = log.period_prices(max(e.period for e in log))
        v_last = market.potential_surplus(last[-1], pop)
        var = float(np.var(log.prices))
        variances.append(var)
        per.append((k, len(log), traj.violation_fraction, v_last, var))
        if k == 0:
            run.series("prices.csv", log.prices, "price")
    run.table("contracts.csv", ("session", "time", "period", "price", "buyer", "seller", "retrade",
                                "surplus", "violation"), detail)
    run.table("sessions.csv", ("session", "n_contracts", "violation_fraction", "final_surplus",
                               "price_variance"), per)
    fracs = [r[2] for r in per if r[1]]
    finals = [r[3] for r in per if r[1]]
    run.summary.update({
        "interval": [interval.low, interval.high],
        "min_surplus": v_min,
        "sessions": n,
        "mean_violation_fraction": float(np.mean(fracs)) if fracs else None,
        "mean_price_variance": float(np.mean(variances)),
        "final_within_10pct": float(np.mean([abs(f - v_min) <= 0.1 * v_min for f in finals])) if finals else 0.0,
    })
    return pop, variances


def cmd_simulate_da(run: Run) -> None:
    _sessions(run, retrade=False)
    s = run.summary
    run.check("pmi_violations_le_5pct", s["mean_violation_fraction"] is not None
              and s["mean_violation_fraction"] <= 0.05)
    run.check("final_surplus_within_10pct", s["final_within_10pct"] == 1.0)


def cmd_simulate_retrade(run: Run) -> None:
    pop, var = _sessions(run, retrade=True)
    base = cfgmod.build_da(run.cfg)
    ref = [float(np.var(auction.run_da_session(auction.reseed(base, int(run.cfg["seed"]) + k), pop).prices))
           for k in range(int(run.cfg["sessions"]))]
    p = float(stats.mannwhitneyu(var, ref, alternative="greater").pvalue) if len(var) > 1 else 1.0
    run.summary.update({"baseline_mean_price_variance": float(np.mean(ref)), "rank_test_p_greater": p})
    run.check("variance_above_no_retrade_p_lt_0.01", p < 0.01)


def cmd_simulate_spec(run: Run) -> None:
    cfg = run.cfg
    cap = cfg["cash_cap"]
    series = speculative.simulate_speculative_market(
        cfgmod.build_rule(cfg["rule"]), cfgmod.build_news(cfg["news"]), int(cfg["n_agents"]), int(cfg["T"]),
        int(cfg["seed"]), float(cfg["p0"]), None if cap is None else float(cap))
    run.series("returns.csv", series.returns, "return")
    run.series("prices.csv", series.prices, "price")
    run.summary.update({
        "n": len(series), "n_truncated": series.n_truncated,
        "return_std": float(np.std(series.returns)),
        "turbulent_fraction": float(np.mean(series.meta["regimes"])),
    })
    run.check("no_truncation", series.n_truncated == 0)


def cmd_simulate_kesten(run: Run) -> None:
    cfg = run.cfg
    if cfg["coef_dist"] is not None:
        coef = Dist.from_dict(cfg["coef_dist"])
    else:
        if cfg["target_kappa"] is None:
            raise ConfigError("set either target_kappa or coef_dist")
        scale = speculative.calibrate_coefficient_scale(float(cfg["target_kappa"]), cfg["family"])
        coef = {"normal": lambda s: Dist.normal(0.0, s), "uniform": lambda s: Dist.uniform(-s, s),
                "student_t": lambda s: Dist.student_t(5.0, 0.0, s)}[cfg["family"]](scale)
    kappa = speculative.tail_exponent_oracle(coef)
    series = speculative.simulate_kesten(cfgmod.build_kesten(cfg, coef))
    alpha, se = tails.hill(series)
    run.series("returns.csv", series.returns, "return")
    run.summary.update({"coef_dist": coef.to_dict(), "kappa": kappa, "n": len(series),
                        "hill_alpha": alpha, "hill_stderr": se})
    run.check("hill_within_0.3_of_kappa", abs(alpha - kappa) <= 0.3)


def _input(cfg: dict):
    if not cfg.get("input"):
        raise ConfigError("an input file is required (--input)")
    path = Path(cfg["input"])
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    return files.load_series(path)


def cmd_analyze_tails(run: Run) -> None:
    cfg = run.cfg
    series = _input(cfg)
    k = tails.default_tail_count(len(series), float(cfg["tail_fraction"]))
    alpha, se = tails.hill(series, k)
    fit = tails.fit_powerlaw(series, int(cfg["k_candidates"]), int(cfg["min_tail"]))
    curve = tails.ccdf(series)
    scan = tails.hill_scan(series)
    try:
        slope: Optional[float] = curve.tail_slope()
    except NoValidTail:
        slope = None
    run.table("ccdf.csv", ("x", "prob"), zip(curve.x.tolist(), curve.prob.tolist()))
    run.table("hill_scan.csv", ("k", "alpha", "stderr"), zip(scan.k.tolist(), scan.alpha.tolist(), scan.stderr.tolist()))
    run.summary.update({
        "n": len(series), "hill_k": k, "hill_alpha": alpha, "hill_stderr": se,
        "fit": {"alpha": fit.alpha, "xmin": fit.xmin, "ks_stat": fit.ks_stat, "n_tail": fit.n_tail,
                "stderr": fit.stderr, "flags": list(fit.flags)},
        "ccdf_tail_slope": slope, "hill_scan_stable": scan.stable,
    })
    if cfg["expect_alpha"] is None:
        run.check("fit_not_flagged", not fit.poor_fit)
    else:
        target, tol = float(cfg["expect_alpha"]), float(cfg["tolerance"])
        run.check("fit_alpha_within_tolerance", abs(fit.alpha - target) <= tol)
        run.check("hill_alpha_within_tolerance", abs(alpha - target) <= tol)


def cmd_analyze_acf(run: Run) -> None:
    cfg = run.cfg
    series = _input(cfg)
    rep = tails.acf_report(series, int(cfg["max_lag"]))
    run.table("acf.csv", ("lag", "raw", "absolute"), zip(rep.lags.tolist(), rep.raw.tolist(), rep.absolute.tolist()))
    raw_in = 1.0 - rep.frac_outside("raw")
    abs_above = rep.frac_above("absolute")
    run.summary.update({"n": len(series), "band": rep.band, "raw_inside_fraction": raw_in,
                        "abs_above_fraction": abs_above, "notes": list(rep.notes)})
    run.check("raw_inside_ge_0.9", raw_in >= 0.9)
    run.check("abs_above_ge_0.6", abs_above >= 0.6)


def _noarb_inputs(cfg):
    spec, T = cfgmod.build_market(cfg["market"])
    return spec, T, cfgmod.build_strategy(cfg["strategy"])


def cmd_noarb_check(run: Run) -> None:
    cfg = run.cfg
    spec, T, strat = _noarb_inputs(cfg)
    rep = noarb.test_no_retrade_advantage(spec, strat, int(cfg["n_paths"]), int(cfg["seed"]), T, int(cfg["n_assets"]))
    run.table("advantage.csv", ("t", "mean", "stderr", "z"),
              ((t + 1, m, s, z) for t, (m, s, z) in enumerate(zip(rep.mean.tolist(), rep.stderr.tolist(), rep.z.tolist()))))
    run.summary.update({"pooled_mean": rep.pooled_mean, "pooled_stderr": rep.pooled_stderr,
                        "pooled_z": rep.pooled_z, "max_abs_z": float(np.max(np.abs(rep.z))),
                        "n_paths": rep.n_paths, "discounted": rep.discounted, "identity_audit": "passed"})
    run.check("no_retrade_advantage", rep.passed)


def cmd_jensen_check(run: Run) -> None:
    cfg = run.cfg
    spec, T, strat = _noarb_inputs(cfg)
    u = cfgmod.build_utility(cfg["utility"])
    rep = noarb.jensen_check(u, spec, strat, int(cfg["n_paths"]), int(cfg["seed"]), T, int(cfg["n_assets"]),
                             float(cfg["initial_cash"]))
    run.summary.update({"eu_trade": rep.eu_trade, "eu_hold": rep.eu_hold, "diff": rep.diff,
                        "stderr": rep.stderr, "n_paths": rep.n_paths, "identity_audit": "passed"})
    run.check("jensen", rep.passed)


def cmd_equilibrium(run: Run) -> None:
    cfg = run.cfg
    tick = str(cfg["tick"])
    try:
        values = tuple(market.to_ticks(v, tick) for v in cfg["values"] or ())
        costs = tuple(market.to_ticks(c, tick) for c in cfg["costs"] or ())
        bounds = None if cfg["bounds"] is None else tuple(market.to_ticks(b, tick) for b in cfg["bounds"])
    except (ArithmeticError, ValueError):
        raise ConfigError("values, costs and bounds must be decimal numbers") from None
    pop = market.TraderPopulation(values, costs)
    iv = market.equilibrium_interval(pop, bounds)
    v = market.potential_surplus(iv.low, pop)
    lo, hi, vs = (market.format_money(x, tick) for x in (iv.low, iv.high, v))
    print(f"interval: [{lo}, {hi}]")
    print(f"V: {vs}")
    run.summary.update({"interval": [lo, hi], "V": vs, "tick": tick})


COMMANDS = {
    "simulate-da": (cmd_simulate_da, "baseline double-auction sessions"),
    "simulate-retrade": (cmd_simulate_retrade, "double-auction sessions with re-trade"),
    "simulate-spec": (cmd_simulate_spec, "trend-following speculative market with news regimes"),
    "simulate-kesten": (cmd_simulate_kesten, "random-coefficient autoregression"),
    "analyze-tails": (cmd_analyze_tails, "tail index estimates for a series file"),
    "analyze-acf": (cmd_analyze_acf, "autocorrelation of returns and absolute returns"),
    "noarb-check": (cmd_noarb_check, "Monte Carlo test of zero mean re-trade advantage"),
    "jensen-check": (cmd_jensen_check, "expected utility of trading versus holding"),
    "equilibrium": (cmd_equilibrium, "competitive equilibrium interval of a population"),
}


# ---------------------------------------------------------------------------
# argument parsing


def _number_list(text: str) -> list:
    return [x for x in text.replace(",", " ").split() if x]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="retrade", description="Market simulation and heavy-tail statistics workbench.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry (repeatable)")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--assert", dest="check", action="store_true",
                        help="exit 3 when the run's acceptance checks fail")
        sp.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
        if "seed" in cfgmod.DEFAULTS[name]:
            sp.add_argument("--seed", type=int)
        if name in ("simulate-da", "simulate-retrade"):
            sp.add_argument("--sessions", type=int)
        if name == "simulate-retrade":
            sp.add_argument("--cash", dest="cash_endowment", type=int)
        if name in ("simulate-kesten", "simulate-spec"):
            sp.add_argument("--steps", dest="T", type=int)
        if name == "simulate-kesten":
            sp.add_argument("--target-kappa", type=float)
        if name.startswith("analyze-"):
            sp.add_argument("--input")
        if name == "analyze-acf":
            sp.add_argument("--max-lag", type=int)
        if name in ("noarb-check", "jensen-check"):
            sp.add_argument("--paths", dest="n_paths", type=int)
        if name == "equilibrium":
            sp.add_argument("--values", type=_number_list, default=None, help="buyer values, e.g. '10 8'")
            sp.add_argument("--costs", type=_number_list, default=None, help="seller costs")
            sp.add_argument("--tick", help="price grid step (default 1)")
    return p


_FLAG_KEYS = ("seed", "sessions", "cash_endowment", "T", "target_kappa", "input", "max_lag", "n_paths",
              "values", "costs", "tick")


def _resolve(args) -> dict:
    file_cfg = cfgmod.load_config(args.config) if args.config else None
    cfg = cfgmod.resolve(args.command, file_cfg, args.overrides)
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        cfg = _resolve(args)
        if args.dump_config:
            sys.stdout.write(cfgmod.dump_config(cfg))
            return EXIT_OK
        out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
        run = Run(args.command, cfg, out)
        COMMANDS[args.command][0](run)
        run.flush()
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except IdentityViolation as e:
        print(f"identity audit failed: {e}", file=sys.stderr)
        return EXIT_ASSERT
    except DataError as e:
        print(f"data error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_DATA
    if args.check:
        failed = [k for k, ok in run.checks.items() if not ok]
        for k, ok in run.checks.items():
            print(f"{'PASS' if ok else 'FAIL'} {k}", file=sys.stderr)
        if failed:
            return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
