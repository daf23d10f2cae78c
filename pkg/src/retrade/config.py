"""Experiment configuration: YAML files, ``key=value`` overrides and builders.

Each subcommand has a default parameter tree. A config file may set any
subset of it; unknown keys are rejected so typos do not pass silently.
Overrides use dotted paths (``news.stay_calm=0.99``) with YAML-parsed values.
"""

from __future__ import annotations

import copy
from typing import Any, Sequence

import yaml

from .auction import BASELINE_POPULATION, DaConfig, RetradeConfig
from .dists import Dist
from .errors import ConfigError
from .market import TraderPopulation
from .noarb import BinomialTreeSpec, IidDividendSpec, TradingStrategy, buy_and_hold, momentum, utility_from_dict
from .speculative import KestenParams, NewsProcess, TrendRule

_DA = {
    "seed": 0,
    "sessions": 1,
    "periods": 10,
    "steps_per_period": 200,
    "tick": 1,
    "bounds": [1, 1000],
    "improvement_rule": True,
    "initial_shade": 0.2,
    "max_increment": 1,
    "units": 1,
    "population": {"values": list(BASELINE_POPULATION.values), "costs": list(BASELINE_POPULATION.costs)},
}

_RULE = {"weights": [{"family": "normal", "loc": 0.8, "scale": 0.4}], "noise_scale": 0.01}

_MARKET = {"kind": "multiplicative", "T": 10, "p0": 100.0, "up": 1.1, "down": 0.9, "beta": 1.0, "drift": 0.0}

_STRATEGY = {"kind": "momentum", "size": 1.0, "sell_on_down": False, "initial_holdings": [0.0]}

DEFAULTS: dict[str, dict] = {
    "simulate-da": _DA,
    "simulate-retrade": {**_DA, "cash_endowment": 400, "expectation_rule": _RULE},
    "simulate-spec": {
        "seed": 0,
        "T": 100_000,
        "n_agents": 25,
        "p0": 100.0,
        "cash_cap": None,
        "rule": {"weights": [{"family": "normal", "loc": 0.0, "scale": 0.3}], "noise_scale": 0.0},
        "news": {"stay_calm": 0.995, "stay_turbulent": 0.995, "scale_calm": 0.008, "scale_turbulent": 0.01},
    },
    "simulate-kesten": {
        "seed": 0,
        "T": 100_000,
        "target_kappa": 3.0,
        "family": "normal",
        "coef_dist": None,
        "shock_dist": {"family": "normal", "loc": 0.0, "scale": 1.0},
    },
    "analyze-tails": {"input": None, "tail_fraction": 0.01, "k_candidates": 200, "min_tail": 50,
                      "expect_alpha": None, "tolerance": 0.3},
    "analyze-acf": {"input": None, "max_lag": 50},
    "noarb-check": {"seed": 0, "n_paths": 100_000, "n_assets": 1, "market": _MARKET, "strategy": _STRATEGY},
    "jensen-check": {
        "seed": 0, "n_paths": 100_000, "n_assets": 1, "market": _MARKET, "strategy": _STRATEGY,
        "utility": {"family": "power", "gamma": 2.0}, "initial_cash": 200.0,
    },
    "equilibrium": {"values": [], "costs": [], "tick": "1", "bounds": None},
}

# keys whose value is a free-form tree (no key checking below them)
_OPEN = {"population", "weights", "coef_dist", "shock_dist", "market", "strategy", "utility", "bounds",
         "values", "costs", "initial_holdings", "probs", "sampling_probs"}


def defaults(command: str) -> dict:
    try:
        return copy.deepcopy(DEFAULTS[command])
    except KeyError:
        raise ConfigError(f"unknown command {command!r}") from None


def _merge(base: dict, update: dict, path: str = "") -> dict:
    for k, v in update.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in _OPEN:
            _merge(base[k], v, where + ".")
        else:
            base[k] = v
    return base


def load_config_text(text: str) -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return load_config_text(fh.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None


def dump_config(config: dict) -> str:
    return yaml.safe_dump(config, sort_keys=True, default_flow_style=False)


def parse_override(item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"bad override key {key!r}")
    value: Any = load_config_text(f"v: {raw}")["v"] if raw.strip() else None
    out: dict = {}
    cur = out
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = value
    return out


def resolve(command: str, file_config: dict | None = None, overrides: Sequence[str] = ()) -> dict:
    """Defaults, then the file, then each override in order."""
    cfg = defaults(command)
    if file_config:
        _merge(cfg, file_config)
    for item in overrides:
        ov = parse_override(item)
        _set_path(cfg, ov)
    return cfg


def _set_path(cfg: dict, ov: dict, path: str = "") -> None:
    for k, v in ov.items():
        where = f"{path}{k}"
        if k not in cfg and path.rstrip(".").split(".")[-1] not in _OPEN:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            _set_path(cfg[k], v, where + ".")
        else:
            cfg[k] = v


# ---------------------------------------------------------------------------
# builders


def _get(cfg: dict, key: str, kind):
    try:
        return kind(cfg[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be {kind.__name__}, got {cfg[key]!r}") from None


def build_population(cfg: dict) -> TraderPopulation:
    pop = cfg["population"]
    try:
        return TraderPopulation(tuple(int(v) for v in pop["values"]), tuple(int(c) for c in pop["costs"]))
    except (KeyError, TypeError, ValueError):
        raise ConfigError("population needs integer 'values' and 'costs' lists") from None


def build_da(cfg: dict) -> DaConfig:
    try:
        return DaConfig(
            periods=_get(cfg, "periods", int), steps_per_period=_get(cfg, "steps_per_period", int),
            tick=_get(cfg, "tick", int), bounds=tuple(cfg["bounds"]),
            improvement_rule=bool(cfg["improvement_rule"]), seed=_get(cfg, "seed", int),
            initial_shade=_get(cfg, "initial_shade", float), max_increment=_get(cfg, "max_increment", int),
            units=_get(cfg, "units", int))
    except TypeError as e:
        raise ConfigError(str(e)) from None


def build_rule(d: dict) -> TrendRule:
    try:
        return TrendRule(tuple(Dist.from_dict(w) for w in d["weights"]), float(d.get("noise_scale", 0.0)))
    except (KeyError, TypeError):
        raise ConfigError("a trend rule needs a 'weights' list of distributions") from None


def build_retrade(cfg: dict) -> RetradeConfig:
    return RetradeConfig(build_da(cfg), _get(cfg, "cash_endowment", int), build_rule(cfg["expectation_rule"]))


def build_news(d: dict) -> NewsProcess:
    try:
        return NewsProcess(**{k: float(v) for k, v in d.items()})
    except TypeError as e:
        raise ConfigError(f"bad news process: {e}") from None


def build_kesten(cfg: dict, coef: Dist) -> KestenParams:
    return KestenParams((coef,), Dist.from_dict(cfg["shock_dist"]), _get(cfg, "T", int), _get(cfg, "seed", int))


def build_market(d: dict):
    """``(generator spec, T)``; ``T`` is None for trees, which carry their own depth."""
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "multiplicative":
            return BinomialTreeSpec.multiplicative(**d), None
        if kind == "coin_dividend":
            return BinomialTreeSpec.coin_dividend(**d), None
        if kind == "tree":
            return BinomialTreeSpec(**d), None
        if kind == "iid":
            T = d.pop("T")
            return IidDividendSpec(**d), int(T)
    except (TypeError, KeyError) as e:
        raise ConfigError(f"bad market spec: {e}") from None
    raise ConfigError(f"unknown market kind {kind!r}")


def build_strategy(d: dict) -> TradingStrategy:
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "momentum":
            return momentum(**d)
        if kind == "buy_and_hold":
            return buy_and_hold(**d)
    except TypeError as e:
        raise ConfigError(f"bad strategy spec: {e}") from None
    raise ConfigError(f"unknown strategy kind {kind!r}")


def build_utility(d: dict):
    try:
        return utility_from_dict(d)
    except TypeError as e:
        raise ConfigError(f"bad utility spec: {e}") from None
