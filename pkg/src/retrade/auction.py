"""Continuous double-auction sessions with and without re-trade.

Protocol: discrete time, one randomly chosen agent acts per step. It either
accepts the opposite standing quote or posts an improving quote of its own.
A buyer's limit is its value shaded by a concession schedule that relaxes
linearly to zero over the period (sellers mirror this above cost). Quotes
open at the last contract price, the market's public information, and move
away from it only through buyer-buyer outbidding and seller-seller
underselling by a few ticks, never past the agent's limit. Contracts
execute at the standing quote and clear the book.

In re-trade sessions every agent may also buy units for resale. Its
speculative reservation is ``min(expected resale price, cash left)``, with
the expectation extrapolated from recent contract prices by a
:class:`~retrade.speculative.TrendRule`. Speculative quotes sit at that
reservation directly (bids rounded down, asks for held units rounded up):
an agent that expects a higher price is willing to pay up to it now, which
is what lets trend-following feed back into prices. An agent quotes the
more aggressive of its use-value and speculative prices. Units bought for
resale persist across periods and can be sold to anyone. Without cash or
inventory the speculative side is inactive and a session reproduces the
plain double auction draw for draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dists import Dist
from .errors import ConfigError, NoTraders
from .market import Contract, TraderPopulation, TransactionLog
from .speculative import TrendRule


@dataclass(frozen=True)
class DaConfig:
    periods: int = 10
    steps_per_period: int = 200
    tick: int = 1
    bounds: tuple = (1, 1000)
    improvement_rule: bool = True
    seed: int = 0
    initial_shade: float = 0.2
    max_increment: int = 1  # outbid / undersell step, in ticks
    units: int = 1          # units per trader per period

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple(int(b) for b in self.bounds))
        if self.periods < 1 or self.steps_per_period < 1:
            raise ConfigError("periods and steps_per_period must be positive")
        if self.tick < 1 or self.max_increment < 1 or self.units < 1:
            raise ConfigError("tick, max_increment and units must be positive")
        if not 0.0 <= self.initial_shade < 1.0:
            raise ConfigError("initial_shade must lie in [0, 1)")
        lo, hi = self.bounds
        if not 0 < lo <= hi:
            raise ConfigError(f"bounds must satisfy 0 < low <= high, got {self.bounds}")


@dataclass(frozen=True)
class RetradeConfig:
    base: DaConfig = field(default_factory=DaConfig)
    cash_endowment: int = 0
    expectation_rule: TrendRule = field(
        default_factory=lambda: TrendRule((Dist.normal(0.8, 0.4),), 0.01))

    def __post_init__(self):
        if self.cash_endowment < 0:
            raise ConfigError("cash_endowment must be non-negative")


@dataclass
class DaAgent:
    id: int
    side: str            # "buyer" or "seller"
    reservation: int     # value or cost, in ticks
    units: int = 1
    concession_rate: float = 0.0  # shade given up per step
    # state
    units_left: int = 0
    cash: int = 0
    inventory: int = 0
    consumed: int = 0
    produced: int = 0
    spec_spent: int = 0
    resale_income: int = 0

    def shade(self, initial: float, step: int) -> float:
        return max(initial - self.concession_rate * step, 0.0)


def make_agents(pop: TraderPopulation, config: DaConfig) -> list:
    rate = config.initial_shade / config.steps_per_period
    agents = [DaAgent(i, "buyer", v, config.units, rate) for i, v in enumerate(pop.values)]
    nb = len(agents)
    agents += [DaAgent(nb + j, "seller", c, config.units, rate) for j, c in enumerate(pop.costs)]
    return agents


def _validate(config: DaConfig, pop: TraderPopulation) -> None:
    if not pop.values or not pop.costs:
        raise NoTraders("a session needs at least one buyer and one seller")
    n = len(pop.values) + len(pop.costs)
    if config.steps_per_period < n:
        raise ConfigError(f"steps_per_period ({config.steps_per_period}) < number of traders ({n})")
    lo, hi = config.bounds
    res = pop.reservations()
    if min(res) < lo or max(res) > hi:
        raise ConfigError(f"bounds {config.bounds} exclude reservations in [{min(res)}, {max(res)}]")


class DaSession:
    """One double-auction session. Call :meth:`run` once; state stays inspectable."""

    def __init__(self, config: DaConfig, pop: TraderPopulation,
                 retrade: Optional[RetradeConfig] = None, audit: bool = False):
        _validate(config, pop)
        self.config = config
        self.pop = pop
        self.retrade = retrade
        self.audit = audit
        self.agents = make_agents(pop, config)
        for a in self.agents:
            a.cash = retrade.cash_endowment if retrade else 0
        self.log = TransactionLog()
        seq = np.random.SeedSequence(config.seed)
        arrival_seq, spec_seq = seq.spawn(2)
        self._rng = np.random.default_rng(arrival_seq)
        self._spec_rng = np.random.default_rng(spec_seq)
        self._anchor: Optional[int] = None
        self._returns: list = []  # contract-to-contract returns, most recent last

    # -- limits -----------------------------------------------------------

    def _floor(self, x: float) -> int:
        t = self.config.tick
        return int(math.floor(x / t)) * t

    def _ceil(self, x: float) -> int:
        t = self.config.tick
        return int(math.ceil(x / t)) * t

    def _expectation(self) -> Optional[float]:
        if self.retrade is None or self._anchor is None:
            return None
        rule = self.retrade.expectation_rule
        recent = self._returns[::-1][: rule.H]
        return self._anchor * (1.0 + float(rule.expected_return(self._spec_rng, recent, 1)[0]))

    def _use_buy_limit(self, a: DaAgent, shade: float):
        if a.side == "buyer" and a.units_left > 0:
            return self._floor(a.reservation * (1.0 - shade))
        return None

    def _use_sell_limit(self, a: DaAgent, shade: float):
        if a.side == "seller" and a.units_left > 0:
            return self._ceil(a.reservation * (1.0 + shade))
        return None

    def _spec_bid(self, a: DaAgent, pe: Optional[float]):
        if pe is None or a.cash <= 0:
            return None
        q = self._floor(min(pe, a.cash))
        return q if q >= self.config.bounds[0] else None

    def _spec_ask(self, a: DaAgent, pe: Optional[float]):
        if pe is None or a.inventory <= 0:
            return None
        return self._ceil(pe)

    # -- protocol ---------------------------------------------------------

    def run(self) -> TransactionLog:
        cfg = self.config
        lo, hi = cfg.bounds
        n = len(self.agents)
        clock = 0
        for period in range(cfg.periods):
            for a in self.agents:
                a.units_left = a.units
            bid = ask = None  # (price, agent id)
            for step in range(cfg.steps_per_period):
                clock += 1
                i = int(self._rng.integers(n))
                inc = cfg.tick * int(self._rng.integers(1, cfg.max_increment + 1))
                a = self.agents[i]
                shade = a.shade(cfg.initial_shade, step)
                pe = self._expectation()
                b_lim = self._use_buy_limit(a, shade)
                s_lim = self._use_sell_limit(a, shade)
                spec_bid = self._spec_bid(a, pe)
                spec_ask = self._spec_ask(a, pe)
                if b_lim is None and s_lim is None and spec_bid is None and spec_ask is None:
                    continue
                A = self._anchor

                q_buy = None
                if b_lim is not None:
                    q_buy = min(b_lim, A) if A is not None else b_lim
                    if cfg.improvement_rule and bid is not None and bid[1] != i and q_buy <= bid[0]:
                        q_buy = min(bid[0] + inc, b_lim)
                if spec_bid is not None and (q_buy is None or spec_bid > q_buy):
                    q_buy = spec_bid
                if q_buy is not None:
                    q_buy = min(max(q_buy, lo), hi)
                q_sell = None
                if s_lim is not None:
                    q_sell = max(s_lim, A) if A is not None else s_lim
                    if cfg.improvement_rule and ask is not None and ask[1] != i and q_sell >= ask[0]:
                        q_sell = max(ask[0] - inc, s_lim)
                if spec_ask is not None and (q_sell is None or spec_ask < q_sell):
                    q_sell = spec_ask
                if q_sell is not None:
                    q_sell = min(max(q_sell, lo), hi)

                if q_buy is not None and ask is not None and ask[1] != i and ask[0] <= q_buy:
                    self._contract(clock, period, ask[0], i, ask[1])
                    bid = ask = None
                    continue
                if q_sell is not None and bid is not None and bid[1] != i and bid[0] >= q_sell:
                    self._contract(clock, period, bid[0], bid[1], i)
                    bid = ask = None
                    continue

                side = None
                if q_buy is not None and q_sell is not None:
                    # holds inventory and could buy more: act on the expected direction
                    side = "buy" if (pe is not None and A is not None and pe > A) else "sell"
                elif q_buy is not None:
                    side = "buy"
                else:
                    side = "sell"
                if side == "buy":
                    if bid is None or bid[1] == i or q_buy > bid[0] or not cfg.improvement_rule:
                        bid = (q_buy, i)
                else:
                    if ask is None or ask[1] == i or q_sell < ask[0] or not cfg.improvement_rule:
                        ask = (q_sell, i)
        return self.log

    def _contract(self, clock: int, period: int, price: int, buyer_id: int, seller_id: int) -> None:
        b, s = self.agents[buyer_id], self.agents[seller_id]
        spec_leg = False
        if b.side == "buyer" and b.units_left > 0 and price <= b.reservation:
            b.units_left -= 1
            b.consumed += 1
        else:
            assert price <= b.cash, "speculative purchase exceeds cash"
            b.cash -= price
            b.spec_spent += price
            b.inventory += 1
            spec_leg = True
        if s.side == "seller" and s.units_left > 0 and price >= s.reservation:
            s.units_left -= 1
            s.produced += 1
        else:
            assert s.inventory > 0, "resale without inventory"
            s.inventory -= 1
            s.cash += price
            s.resale_income += price
            spec_leg = True
        if self._anchor is not None:
            self._returns.append(price / self._anchor - 1.0)
        self._anchor = price
        self.log.append(Contract(clock, price, buyer_id, seller_id, period, spec_leg))
        if self.audit:
            self.check_invariants()

    # -- invariants -------------------------------------------------------

    def check_invariants(self) -> None:
        produced = sum(a.produced for a in self.agents)
        consumed = sum(a.consumed for a in self.agents)
        held = sum(a.inventory for a in self.agents)
        if produced != consumed + held:
            raise AssertionError(f"unit conservation broken: {produced} != {consumed} + {held}")
        endow = self.retrade.cash_endowment if self.retrade else 0
        for a in self.agents:
            if a.spec_spent > endow + a.resale_income or a.cash < 0:
                raise AssertionError(f"agent {a.id} exceeded its budget")


def run_da_session(config: DaConfig, pop: TraderPopulation) -> TransactionLog:
    """Perishable-good session: units are consumed and never resold."""
    return DaSession(config, pop).run()


def run_retrade_session(config: RetradeConfig, pop: TraderPopulation) -> TransactionLog:
    """Re-trade session: any agent may also buy units to resell them later."""
    return DaSession(config.base, pop, config).run()


def reseed(config, seed: int):
    """Copy of a DaConfig or RetradeConfig with another seed."""
    if isinstance(config, RetradeConfig):
        return replace(config, base=replace(config.base, seed=seed))
    return replace(config, seed=seed)


# Symmetric 6 x 6 design with a ten-tick competitive interval [95, 105].
BASELINE_POPULATION = TraderPopulation(values=(130, 125, 120, 115, 110, 105),
                                       costs=(70, 75, 80, 85, 90, 95))
