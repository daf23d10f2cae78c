"""Potential-surplus functions and the competitive equilibrium interval.

All prices are integer ticks (``int``), so every quantity here is exact.
Use :func:`to_ticks` / :func:`from_ticks` to convert currency amounts.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Iterator, Optional, Sequence

from .errors import ConfigError, EmptyLog, EmptyPopulation

DEFAULT_TICK = Decimal("0.01")


def to_ticks(amount, tick=DEFAULT_TICK) -> int:
    """Convert a currency amount to an integer number of ticks.

    Raises ConfigError if ``amount`` is not a whole multiple of ``tick``.
    """
    q = Decimal(str(amount)) / Decimal(str(tick))
    if q != q.to_integral_value():
        raise ConfigError(f"{amount} is not a multiple of the tick size {tick}")
    return int(q)


def from_ticks(ticks: int, tick=DEFAULT_TICK) -> Decimal:
    return Decimal(ticks) * Decimal(str(tick))


def format_money(ticks: int, tick=DEFAULT_TICK) -> str:
    """Plain decimal string with trailing zeros dropped, e.g. ``1000 -> '10'``."""
    return format(from_ticks(ticks, tick).normalize(), "f")


@dataclass(frozen=True)
class TraderPopulation:
    """Buyer values and seller costs, one unit per entry, in ticks."""

    values: tuple = ()
    costs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(sorted(int(v) for v in self.values)))
        object.__setattr__(self, "costs", tuple(sorted(int(c) for c in self.costs)))

    @property
    def is_empty(self) -> bool:
        return not self.values and not self.costs

    def reservations(self) -> tuple:
        return self.values + self.costs

    def default_bounds(self) -> tuple[int, int]:
        """Grid bounds used when none are given: zero up to the largest reservation."""
        res = self.reservations()
        return 0, max(res) if res else 0

    def scaled(self, lam: int) -> "TraderPopulation":
        return TraderPopulation([lam * v for v in self.values], [lam * c for c in self.costs])

    def shifted(self, k: int) -> "TraderPopulation":
        return TraderPopulation([v + k for v in self.values], [c + k for c in self.costs])


@dataclass(frozen=True)
class ExpectationSet:
    """Anticipated resale prices with optional per-trader cash caps.

    ``caps[i]`` is either ``None`` or the most trader ``i`` can pay.
    """

    resale_prices: tuple = ()
    caps: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "resale_prices", tuple(int(x) for x in self.resale_prices))
        if self.caps is not None:
            caps = tuple(None if c is None else int(c) for c in self.caps)
            if len(caps) != len(self.resale_prices):
                raise ConfigError("caps must align with resale_prices")
            object.__setattr__(self, "caps", caps)

    def effective(self) -> tuple:
        """Reservation prices after clipping each expectation at its cash cap."""
        if self.caps is None:
            return self.resale_prices
        return tuple(pe if cap is None else min(pe, cap)
                     for pe, cap in zip(self.resale_prices, self.caps))


@dataclass(frozen=True)
class PriceInterval:
    low: int
    high: int

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError(f"empty interval [{self.low}, {self.high}]")

    @property
    def point(self) -> int:
        """Canonical point estimate: the midpoint rounded down."""
        return (self.low + self.high) // 2

    @property
    def width(self) -> int:
        return self.high - self.low

    def __contains__(self, p) -> bool:
        return self.low <= p <= self.high

    def distance(self, p) -> float:
        """Distance from ``p`` to the nearest point of the interval (0 inside)."""
        if p < self.low:
            return self.low - p
        if p > self.high:
            return p - self.high
        return 0


@dataclass(frozen=True)
class Contract:
    time: int
    price: int
    buyer: int
    seller: int
    period: int = 0
    retrade: bool = False  # at least one side bought for, or sold from, resale inventory


@dataclass
class TransactionLog:
    """Time-ordered contracts. Times strictly increase; prices are positive."""

    entries: list = field(default_factory=list)

    def __post_init__(self):
        entries = list(self.entries)
        self.entries = []
        for e in entries:
            self.append(e)

    def append(self, contract: Contract) -> None:
        if self.entries and contract.time <= self.entries[-1].time:
            raise ValueError("contract times must be strictly increasing")
        if contract.price <= 0:
            raise ValueError(f"contract price must be positive, got {contract.price}")
        self.entries.append(contract)

    @property
    def prices(self) -> list:
        return [e.price for e in self.entries]

    def period_prices(self, period: int) -> list:
        return [e.price for e in self.entries if e.period == period]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Contract]:
        return iter(self.entries)

    @classmethod
    def from_prices(cls, prices: Iterable[int]) -> "TransactionLog":
        return cls([Contract(t, int(p), -1, -1) for t, p in enumerate(prices, start=1)])


def potential_surplus(p: int, pop: TraderPopulation) -> int:
    """Total unrealized gains from trade at standing price ``p``.

    Sums ``v - p`` over values at or above ``p`` and ``p - c`` over costs at
    or below ``p``.
    """
    values, costs = pop.values, pop.costs
    # Sorted inputs, so only the qualifying tails are summed.
    i = bisect_left(values, p)
    j = bisect_right(costs, p)
    return (sum(values[i:]) - p * (len(values) - i)) + (p * j - sum(costs[:j]))


def speculative_surplus(p: int, exp: ExpectationSet) -> int:
    return sum(abs(pe - p) for pe in exp.effective())


def surplus_slope(p: int, pop: TraderPopulation) -> int:
    """Forward difference ``V(p + 1) - V(p)``: supply count minus demand count."""
    return bisect_right(pop.costs, p) - (len(pop.values) - bisect_left(pop.values, p + 1))


def equilibrium_interval(pop: TraderPopulation, bounds: Optional[Sequence[int]] = None) -> PriceInterval:
    """Argmin set of :func:`potential_surplus` over the integer grid ``bounds``.

    ``V`` is convex and piecewise linear, so its forward difference is
    non-decreasing in ``p`` and the minimizers form an interval: from the
    first price where the slope turns non-negative to the last price reached
    with a non-positive slope. Empty-side populations give half-lines clipped
    to ``bounds``.
    """
    if pop.is_empty:
        raise EmptyPopulation("population has neither values nor costs")
    lo, hi = pop.default_bounds() if bounds is None else (int(bounds[0]), int(bounds[1]))
    if lo > hi:
        raise ConfigError(f"invalid grid bounds ({lo}, {hi})")

    # low: first p in [lo, hi] with slope(p) >= 0, else hi
    a, b = lo, hi
    while a < b:
        m = (a + b) // 2
        if surplus_slope(m, pop) >= 0:
            b = m
        else:
            a = m + 1
    low = a

    # high: last p in [lo, hi] with p == lo or slope(p - 1) <= 0
    a, b = lo, hi
    while a < b:
        m = (a + b + 1) // 2
        if surplus_slope(m - 1, pop) <= 0:
            a = m
        else:
            b = m - 1
    return PriceInterval(low, a)


def speculative_interval(exp: ExpectationSet) -> PriceInterval:
    """Argmin set of :func:`speculative_surplus`: the interval of medians."""
    x = sorted(exp.effective())
    if not x:
        raise EmptyPopulation("no expectations")
    n = len(x)
    return PriceInterval(x[(n - 1) // 2], x[n // 2])


@dataclass(frozen=True)
class SurplusTrajectory:
    surplus: tuple
    violations: tuple  # violations[i] is True when surplus[i] > surplus[i - 1]; violations[0] is False

    @property
    def n_pairs(self) -> int:
        return max(len(self.surplus) - 1, 0)

    @property
    def violation_fraction(self) -> float:
        return sum(self.violations) / self.n_pairs if self.n_pairs else 0.0

    def __iter__(self):
        return iter(zip(self.surplus, self.violations))


def surplus_trajectory(log, pop: TraderPopulation) -> SurplusTrajectory:
    """Evaluate ``V`` along a contract-price sequence and flag every increase.

    ``log`` may be a :class:`TransactionLog` or a plain sequence of prices.
    """
    prices = log.prices if isinstance(log, TransactionLog) else list(log)
    if not prices:
        raise EmptyLog("transaction log is empty")
    vs = tuple(potential_surplus(p, pop) for p in prices)
    flags = (False,) + tuple(b > a for a, b in zip(vs, vs[1:]))
    return SurplusTrajectory(vs, flags)


def max_extractable_surplus(pop: TraderPopulation) -> int:
    total = 0
    for v, c in zip(reversed(pop.values), pop.costs):
        if v < c:
            break
        total += v - c
    return total


def realized_surplus(log: TransactionLog, values: dict, costs: dict) -> int:
    """Gains from trade actually captured, given per-trader reservations."""
    return sum(values[e.buyer] - costs[e.seller] for e in log)


def efficiency(log: TransactionLog, pop: TraderPopulation, values: dict, costs: dict) -> float:
    best = max_extractable_surplus(pop)
    return realized_surplus(log, values, costs) / best if best else float("nan")
