"""Arbitrage-free market generation, trading wealth and the re-trade advantage.

Markets are finite binomial trees (or i.i.d. dividend models) priced by
backward induction, so ``p_t = beta * E[p_{t+1} + d_{t+1} | node]`` holds by
construction under the pricing probability. Paths may be sampled under a
different probability to produce a drifting, non-martingale market.

All panels are batches of paths with shape ``(n_paths, T + 1, n_assets)``.
Dividends at ``t = 0`` are zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DimensionMismatch, IdentityViolation, SpecError, UtilityDomain

IDENTITY_RTOL = 1e-12
MIN_PATHS = 1000


@dataclass(frozen=True)
class AssetPanel:
    prices: np.ndarray     # (paths, T+1, assets)
    dividends: np.ndarray  # (paths, T+1, assets), zero at t = 0
    beta: float = 1.0
    certificate: Optional[dict] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float)
        d = np.asarray(self.dividends, dtype=float)
        if p.ndim == 2:
            p, d = p[None], d[None]
        if p.ndim != 3 or p.shape != d.shape:
            raise DimensionMismatch(f"prices {p.shape} and dividends {d.shape} must match")
        if p.shape[1] < 2:
            raise DimensionMismatch("a panel needs at least two dates")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(d))):
            raise ConfigError("prices and dividends must be finite")
        if np.any(p < 0):
            raise ConfigError("prices must be non-negative")
        if not 0 < self.beta <= 1:
            raise ConfigError(f"discount factor must lie in (0, 1], got {self.beta}")
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "dividends", d)

    @property
    def n_paths(self) -> int:
        return self.prices.shape[0]

    @property
    def T(self) -> int:
        return self.prices.shape[1] - 1

    @property
    def n_assets(self) -> int:
        return self.prices.shape[2]


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class BinomialTreeSpec:
    """Recombining binomial tree, one independent tree per asset.

    ``terminal`` gives the price at each of the ``T + 1`` terminal nodes
    (indexed by the number of up-moves). ``div_up`` / ``div_down`` are the
    dividends paid on the up / down edge leaving a node; scalars or arrays of
    shape ``(T, T + 1)`` indexed ``[t, k]`` for the edge from ``(t, k)``.
    ``q`` is the pricing probability of an up-move and ``sampling_prob``
    the probability used to draw paths (defaults to ``q``).
    """

    terminal: tuple
    q: float = 0.5
    beta: float = 1.0
    div_up: object = 0.0
    div_down: object = 0.0
    sampling_prob: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "terminal", tuple(float(x) for x in self.terminal))
        if len(self.terminal) < 2:
            raise SpecError("terminal payoff needs at least two nodes (T >= 1)")
        if not 0 < self.q < 1:
            raise SpecError(f"pricing probability must lie in (0, 1), got {self.q}")
        if not 0 < self.beta <= 1:
            raise SpecError(f"discount factor must lie in (0, 1], got {self.beta}")
        if self.sampling_prob is not None and not 0 <= self.sampling_prob <= 1:
            raise SpecError("sampling probability must lie in [0, 1]")
        for name in ("div_up", "div_down"):
            v = getattr(self, name)
            if not np.isscalar(v):
                arr = np.asarray(v, dtype=float)
                if arr.shape != (self.T, self.T + 1):
                    raise SpecError(f"{name} must be a scalar or shape {(self.T, self.T + 1)}")
                object.__setattr__(self, name, tuple(map(tuple, arr)))
            else:
                object.__setattr__(self, name, float(v))

    @property
    def T(self) -> int:
        return len(self.terminal) - 1

    @property
    def p_sample(self) -> float:
        return self.q if self.sampling_prob is None else self.sampling_prob

    def _edge(self, v) -> np.ndarray:
        if isinstance(v, float):
            return np.full((self.T, self.T + 1), v)
        return np.asarray(v, dtype=float)

    @classmethod
    def multiplicative(cls, T: int, p0: float = 100.0, up: float = 1.1, down: float = 0.9,
                       beta: float = 1.0, drift: float = 0.0) -> "BinomialTreeSpec":
        """Price moves by ``up`` or ``down`` per period, no dividends.

        The risk-neutral ``q = (1/beta - down) / (up - down)``. A nonzero
        ``drift`` samples up-moves with probability ``q + drift``.
        """
        if T < 1:
            raise SpecError("T must be at least 1")
        if not 0 < down < 1 / beta < up:
            raise SpecError("need 0 < down < 1/beta < up for a valid tree")
        q = (1 / beta - down) / (up - down)
        terminal = [p0 * beta ** -T * up ** k * down ** (T - k) for k in range(T + 1)]
        ps = None if drift == 0 else q + drift
        return cls(tuple(terminal), q, beta, 0.0, 0.0, ps)

    @classmethod
    def coin_dividend(cls, T: int, delta: float, beta: float = 1.0,
                      terminal_price: float = 0.0) -> "BinomialTreeSpec":
        """Dividend 0 or ``2 * delta`` with equal odds every period."""
        return cls(tuple([terminal_price] * (T + 1)), 0.5, beta, 2.0 * delta, 0.0)


@dataclass(frozen=True)
class IidDividendSpec:
    """Each period pays one of ``values`` with ``probs``, independently.

    Prices are deterministic: ``p_t = beta * (p_{t+1} + E d)``. ``sampling_probs``
    draws dividends under another law to break the pricing relation.
    """

    values: tuple
    probs: tuple
    beta: float = 1.0
    terminal_price: float = 0.0
    sampling_probs: Optional[tuple] = None

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        p = tuple(float(x) for x in self.probs)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)
        if not v or len(v) != len(p):
            raise SpecError("values and probs must be non-empty and aligned")
        if any(x < 0 for x in p) or not math.isclose(sum(p), 1.0, abs_tol=1e-12):
            raise SpecError("probs must be non-negative and sum to 1")
        if not 0 < self.beta <= 1:
            raise SpecError(f"discount factor must lie in (0, 1], got {self.beta}")
        if self.sampling_probs is not None:
            s = tuple(float(x) for x in self.sampling_probs)
            if len(s) != len(v) or any(x < 0 for x in s) or not math.isclose(sum(s), 1.0, abs_tol=1e-12):
                raise SpecError("sampling_probs must align with values and sum to 1")
            object.__setattr__(self, "sampling_probs", s)

    @property
    def mean_dividend(self) -> float:
        return float(np.dot(self.values, self.probs))


def _tree_prices(spec: BinomialTreeSpec) -> tuple[list, np.ndarray, np.ndarray]:
    T, q, b = spec.T, spec.q, spec.beta
    du, dd = spec._edge(spec.div_up), spec._edge(spec.div_down)
    levels = [None] * (T + 1)
    levels[T] = np.asarray(spec.terminal)
    for t in range(T - 1, -1, -1):
        nxt = levels[t + 1]
        k = np.arange(t + 1)
        levels[t] = b * (q * (nxt[k + 1] + du[t, k]) + (1 - q) * (nxt[k] + dd[t, k]))
    return levels, du, dd


def generate_martingale_market(spec, T: Optional[int] = None, n_assets: int = 1, seed: int = 0,
                               n_paths: int = 1) -> AssetPanel:
    """Sample ``n_paths`` panels from an arbitrage-free generator.

    ``T`` must match a tree spec's depth (it may be omitted there). The
    panel's ``certificate`` holds the node prices and, for every node, the
    discounted conditional expectation of next price plus dividend.
    """
    if n_assets < 1 or n_paths < 1:
        raise SpecError("n_assets and n_paths must be positive")
    rng = np.random.default_rng(seed)
    if isinstance(spec, BinomialTreeSpec):
        if T is not None and T != spec.T:
            raise SpecError(f"T={T} does not match the tree depth {spec.T}")
        T = spec.T
        levels, du, dd = _tree_prices(spec)
        ups = rng.random((n_paths, T, n_assets)) < spec.p_sample
        k = np.concatenate([np.zeros((n_paths, 1, n_assets), int), np.cumsum(ups, axis=1)], axis=1)
        prices = np.empty((n_paths, T + 1, n_assets))
        divs = np.zeros((n_paths, T + 1, n_assets))
        for t in range(T + 1):
            prices[:, t] = levels[t][k[:, t]]
        for t in range(T):
            kt = k[:, t]
            divs[:, t + 1] = np.where(ups[:, t], du[t][kt], dd[t][kt])
        cert = {"levels": levels,
                "expectation": [spec.beta * (spec.q * (levels[t + 1][1:] + du[t, : t + 1])
                                             + (1 - spec.q) * (levels[t + 1][:-1] + dd[t, : t + 1]))
                                for t in range(T)]}
        return AssetPanel(prices, divs, spec.beta, cert)
    if isinstance(spec, IidDividendSpec):
        if T is None or T < 1:
            raise SpecError("an i.i.d. dividend model needs T >= 1")
        path_prices = np.empty(T + 1)
        path_prices[T] = spec.terminal_price
        for t in range(T - 1, -1, -1):
            path_prices[t] = spec.beta * (path_prices[t + 1] + spec.mean_dividend)
        probs = spec.sampling_probs or spec.probs
        draws = rng.choice(len(spec.values), size=(n_paths, T, n_assets), p=probs)
        divs = np.zeros((n_paths, T + 1, n_assets))
        divs[:, 1:] = np.asarray(spec.values)[draws]
        prices = np.broadcast_to(path_prices[None, :, None], (n_paths, T + 1, n_assets)).copy()
        cert = {"levels": [path_prices[t : t + 1] for t in range(T + 1)],
                "expectation": [np.array([spec.beta * (path_prices[t + 1] + spec.mean_dividend)])
                                for t in range(T)]}
        return AssetPanel(prices, divs, spec.beta, cert)
    raise SpecError(f"unsupported generator spec {type(spec).__name__}")


def audit_panel(panel: AssetPanel) -> bool:
    """True iff every certified node expectation equals the node price bit for bit."""
    cert = panel.certificate
    if not cert:
        raise SpecError("panel has no construction certificate")
    return all(np.array_equal(e, lv) for e, lv in zip(cert["expectation"], cert["levels"][:-1]))


# ---------------------------------------------------------------------------
# strategies and wealth


@dataclass(frozen=True)
class TradingStrategy:
    """Predictable trading rule.

    ``rule(prices, dividends)`` receives read-only arrays of shape
    ``(paths, t, assets)`` holding dates ``0..t-1`` and returns ``dH_t`` with
    shape ``(paths, assets)``; the trade executes at ``p_{t-1}``.
    """

    rule: Callable
    initial_holdings: tuple = (0.0,)
    name: str = "custom"

    def holdings0(self, n_assets: int) -> np.ndarray:
        h = np.asarray(self.initial_holdings, dtype=float)
        if h.size == 1:
            h = np.full(n_assets, float(h.item()))
        if h.shape != (n_assets,):
            raise DimensionMismatch(f"initial holdings {h.shape} vs {n_assets} assets")
        return h


def buy_and_hold(initial_holdings=(1.0,)) -> TradingStrategy:
    return TradingStrategy(lambda p, d: np.zeros((p.shape[0], p.shape[2])), tuple(initial_holdings),
                           "buy_and_hold")


def momentum(size: float = 1.0, sell_on_down: bool = False, initial_holdings=(0.0,)) -> TradingStrategy:
    """Buy ``size`` units after an up-move (and sell after a down-move if asked)."""
    def rule(p, d):
        if p.shape[1] < 2:
            return np.zeros((p.shape[0], p.shape[2]))
        move = p[:, -1] + d[:, -1] - p[:, -2]
        out = np.where(move > 0, size, 0.0)
        if sell_on_down:
            out = np.where(move < 0, -size, out)
        return out
    return TradingStrategy(rule, tuple(initial_holdings), "momentum")


@dataclass(frozen=True)
class WealthPath:
    W: np.ndarray        # (paths, T+1), W[:, 0] = p_0 . H_0
    W_hold: np.ndarray   # (paths, T+1), buy-and-hold wealth W*
    R: np.ndarray        # (paths, T+1), R[:, 0] = 0
    holdings: np.ndarray  # (paths, T+1, assets)
    trades: np.ndarray   # (paths, T+1, assets), trades[:, 0] = 0


def _readonly(a: np.ndarray) -> np.ndarray:
    v = a.view()
    v.flags.writeable = False
    return v


def wealth_path(panel: AssetPanel, strategy: TradingStrategy, rtol: float = IDENTITY_RTOL) -> WealthPath:
    """Wealth from trading, buy-and-hold wealth and the re-trade advantage.

    ``W_t = p_t.H_t - dH_t.p_{t-1} + d_t.H_t`` and ``W*_t = p_t.H_{t-1} + d_t.H_{t-1}``.
    ``R_t`` is computed as ``(p_t - p_{t-1} + d_t).dH_t`` and checked against
    ``W_t - W*_t`` at every step; a mismatch beyond ``rtol`` raises
    :class:`IdentityViolation`.
    """
    p, d = panel.prices, panel.dividends
    n, T1, m = p.shape
    H = np.empty((n, T1, m))
    dH = np.zeros((n, T1, m))
    H[:, 0] = strategy.holdings0(m)
    ro_p, ro_d = _readonly(p), _readonly(d)
    for t in range(1, T1):
        step = np.asarray(strategy.rule(ro_p[:, :t], ro_d[:, :t]), dtype=float)
        if step.shape != (n, m):
            raise DimensionMismatch(f"strategy returned shape {step.shape}, expected {(n, m)}")
        dH[:, t] = step
        H[:, t] = H[:, t - 1] + step
    W = np.empty((n, T1))
    Ws = np.empty((n, T1))
    R = np.zeros((n, T1))
    W[:, 0] = Ws[:, 0] = (p[:, 0] * H[:, 0]).sum(axis=1)
    for t in range(1, T1):
        a = (p[:, t] * H[:, t]).sum(axis=1)
        b = (dH[:, t] * p[:, t - 1]).sum(axis=1)
        c = (d[:, t] * H[:, t]).sum(axis=1)
        W[:, t] = a - b + c
        Ws[:, t] = (p[:, t] * H[:, t - 1]).sum(axis=1) + (d[:, t] * H[:, t - 1]).sum(axis=1)
        R[:, t] = ((p[:, t] - p[:, t - 1] + d[:, t]) * dH[:, t]).sum(axis=1)
        scale = np.abs(a) + np.abs(b) + np.abs(c) + np.abs(Ws[:, t])
        err = np.abs(W[:, t] - Ws[:, t] - R[:, t])
        bad = err > rtol * np.maximum(scale, 1.0)
        if bad.any():
            i = int(np.argmax(bad))
            raise IdentityViolation(
                f"t={t} path={i}: W - W* = {W[i, t] - Ws[i, t]!r} but advantage = {R[i, t]!r}")
    return WealthPath(W, Ws, R, H, dH)


# ---------------------------------------------------------------------------
# Monte Carlo checks


@dataclass(frozen=True)
class AdvantageReport:
    mean: np.ndarray     # per t = 1..T
    stderr: np.ndarray
    z: np.ndarray
    pooled_mean: float
    pooled_stderr: float
    pooled_z: float
    n_paths: int
    discounted: bool

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.z) < 3.0) and abs(self.pooled_z) < 3.0)


def _z(mean, se):
    mean, se = np.asarray(mean, float), np.asarray(se, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, mean / se, np.where(mean == 0, 0.0, np.sign(mean) * np.inf))
    return z


def _mean_se(x: np.ndarray):
    n = x.shape[0]
    return x.mean(axis=0), x.std(axis=0, ddof=1) / math.sqrt(n)


def test_no_retrade_advantage(spec, strategy: TradingStrategy, n_paths: int = 100_000, seed: int = 0,
                              T: Optional[int] = None, n_assets: int = 1) -> AdvantageReport:
    """Monte Carlo mean of the re-trade advantage per date and pooled over dates.

    With ``beta < 1`` the undiscounted advantage has nonzero conditional mean
    even in an arbitrage-free market, so the discounted version
    ``(beta (p_t + d_t) - p_{t-1}).dH_t`` is tested instead. The pooled
    statistic uses each path's sum over dates.
    """
    if n_paths < MIN_PATHS:
        raise ConfigError(f"n_paths must be at least {MIN_PATHS}")
    panel = generate_martingale_market(spec, T, n_assets, seed, n_paths)
    wp = wealth_path(panel, strategy)
    discounted = panel.beta < 1
    if discounted:
        p, d = panel.prices, panel.dividends
        R = ((panel.beta * (p[:, 1:] + d[:, 1:]) - p[:, :-1]) * wp.trades[:, 1:]).sum(axis=2)
    else:
        R = wp.R[:, 1:]
    m, se = _mean_se(R)
    pm, pse = _mean_se(R.sum(axis=1))
    return AdvantageReport(m, se, _z(m, se), float(pm), float(pse), float(_z(pm, pse)), n_paths, discounted)


# ---------------------------------------------------------------------------
# utilities and the Jensen check


@dataclass(frozen=True)
class PowerUtility:
    """CRRA utility ``w^(1-gamma)/(1-gamma)``; ``gamma = 1`` is log."""
    gamma: float = 2.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError("power utility needs gamma > 0")

    def __call__(self, w: np.ndarray) -> np.ndarray:
        if np.any(w <= 0):
            raise UtilityDomain("power utility requires positive wealth; raise initial_cash")
        if self.gamma == 1:
            return np.log(w)
        return w ** (1 - self.gamma) / (1 - self.gamma)


@dataclass(frozen=True)
class ExponentialUtility:
    """CARA utility ``-exp(-a w)``."""
    a: float = 0.01

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigError("exponential utility needs a > 0")

    def __call__(self, w):
        return -np.exp(-self.a * w)


@dataclass(frozen=True)
class LinearUtility:
    def __call__(self, w):
        return np.asarray(w, dtype=float)


def utility_from_dict(d: dict):
    kind = d.get("family")
    params = {k: v for k, v in d.items() if k != "family"}
    try:
        cls = {"power": PowerUtility, "exponential": ExponentialUtility, "linear": LinearUtility}[kind]
    except KeyError:
        raise ConfigError(f"unknown utility family {kind!r}") from None
    return cls(**params)


@dataclass(frozen=True)
class JensenReport:
    eu_trade: float
    eu_hold: float
    diff: float
    stderr: float
    n_paths: int
    risk_neutral: bool

    @property
    def passed(self) -> bool:
        if self.risk_neutral:
            return abs(self.diff) <= 3.0 * self.stderr
        return self.diff <= 3.0 * self.stderr


def jensen_check(utility, spec, strategy: TradingStrategy, n_paths: int = 100_000, seed: int = 0,
                 T: Optional[int] = None, n_assets: int = 1, initial_cash: float = 0.0) -> JensenReport:
    """Compare expected utility of terminal wealth from trading and from holding.

    Wealth is ``initial_cash + W_T`` and ``initial_cash + W*_T``. Passes when
    the trading minus holding difference is at most 3 standard errors above
    zero (two-sided for linear utility).
    """
    if n_paths < MIN_PATHS:
        raise ConfigError(f"n_paths must be at least {MIN_PATHS}")
    panel = generate_martingale_market(spec, T, n_assets, seed, n_paths)
    wp = wealth_path(panel, strategy)
    ut = utility(initial_cash + wp.W[:, -1])
    uh = utility(initial_cash + wp.W_hold[:, -1])
    diff = ut - uh
    return JensenReport(float(ut.mean()), float(uh.mean()), float(diff.mean()),
                        float(diff.std(ddof=1) / math.sqrt(n_paths)), n_paths,
                        isinstance(utility, LinearUtility))


test_no_retrade_advantage.__test__ = False  # not a pytest test
