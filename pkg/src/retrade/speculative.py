"""Speculative return dynamics.

* :func:`simulate_kesten` -- the random-coefficient autoregression
  ``r_t = sum_h a_ht r_{t-h} + e_t`` with fresh coefficients every step.
* :func:`tail_exponent_oracle` -- the tail index ``k`` solving ``E|a|^k = 1``
  for the one-lag case.
* :func:`simulate_speculative_market` -- trend-following agents whose price is
  the median of their resale-price expectations.
* :func:`generate_news` -- two-state Markov volatility regimes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .dists import Dist
from .errors import ConfigError, DegeneratePrice, DistributionError, NoRoot, NonStationary
from .series import RETURN_FLOOR, ReturnSeries

BURN_IN_PER_LAG = 10


def _as_dist(d) -> Dist:
    if isinstance(d, Dist):
        return d
    if isinstance(d, dict):
        return Dist.from_dict(d)
    raise DistributionError(f"not a distribution spec: {d!r}")


@dataclass(frozen=True)
class KestenParams:
    """One coefficient distribution per lag, a shock distribution, horizon and seed."""

    coef_dist: tuple
    shock_dist: Dist = field(default_factory=Dist.normal)
    T: int = 100_000
    seed: int = 0

    def __post_init__(self):
        coefs = self.coef_dist
        if isinstance(coefs, (Dist, dict)):
            coefs = (coefs,)
        coefs = tuple(_as_dist(c) for c in coefs)
        if not coefs:
            raise ConfigError("need at least one lag (H >= 1)")
        object.__setattr__(self, "coef_dist", coefs)
        object.__setattr__(self, "shock_dist", _as_dist(self.shock_dist))
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if self.H == 1:
            elog = coefs[0].mean_log_abs()
            if elog >= 0:
                warnings.warn(f"E log|a| = {elog:.4g} >= 0: the process is not stationary",
                              RuntimeWarning, stacklevel=3)

    @property
    def H(self) -> int:
        return len(self.coef_dist)

    @property
    def burn_in(self) -> int:
        return BURN_IN_PER_LAG * self.H


def kesten_recursion(coefs: np.ndarray, shocks: np.ndarray) -> np.ndarray:
    """Run ``r_t = sum_h coefs[t, h-1] * r_{t-h} + shocks[t]`` from a zero start."""
    n, H = coefs.shape
    if H == 1:
        a = coefs[:, 0].tolist()
        e = shocks.tolist()
        out = [0.0] * n
        prev = 0.0
        for t in range(n):
            prev = a[t] * prev + e[t]
            out[t] = prev
        return np.array(out)
    out = np.zeros(n + H)
    for t in range(n):
        # out[t:t + H] holds r_{t-H} .. r_{t-1}; reversed it matches lag order 1..H
        out[t + H] = float(coefs[t] @ out[t:t + H][::-1]) + shocks[t]
    return out[H:]


def simulate_kesten(params: KestenParams, shocks: Optional[np.ndarray] = None) -> ReturnSeries:
    """Simulate the random-coefficient autoregression.

    Coefficients are drawn i.i.d. per lag and per step. The first
    ``10 * H`` steps are burn-in and are dropped. ``shocks`` overrides the
    shock draws (length ``burn_in + T``), which lets callers share a shock
    stream between generators.
    """
    n = params.burn_in + params.T
    rng = np.random.default_rng(params.seed)
    coef_rng, shock_rng = rng.spawn(2)
    coefs = np.column_stack([d.sample(coef_rng, n) for d in params.coef_dist])
    if shocks is None:
        shocks = params.shock_dist.sample(shock_rng, n)
    else:
        shocks = np.asarray(shocks, dtype=float)
        if shocks.shape != (n,):
            raise ConfigError(f"need {n} shocks (burn-in included), got {shocks.shape}")
    r = kesten_recursion(coefs, shocks)[params.burn_in:]
    return ReturnSeries(r, meta={"generator": "kesten", "H": params.H, "seed": params.seed})


# ---------------------------------------------------------------------------
# tail exponent


def tail_exponent_oracle(coef_dist, kappa_max: float = 200.0, tol: float = 1e-6) -> float:
    """Tail index of the one-lag process: the positive root of ``E|a|^k = 1``.

    ``m(k) = E|a|^k`` is log-convex with ``m(0) = 1`` and slope ``E log|a|``
    at zero, so a positive root exists only when that slope is negative and
    ``m`` climbs back above one. The root is bracketed on a geometric grid and
    polished with Brent's method on ``log m``.
    """
    dist = _as_dist(coef_dist)
    elog = dist.mean_log_abs()
    if elog >= 0:
        raise NonStationary(f"E log|a| = {elog:.6g} >= 0")

    def log_m(k):
        m = dist.abs_moment(k)
        return math.inf if m == math.inf else (math.log(m) if m > 0 else -math.inf)

    grid = np.geomspace(1e-3, kappa_max, 400)
    lo = None
    for k in grid:
        val = log_m(k)
        if val > 0:
            if lo is None:
                # m exceeded one before dipping: cannot happen when E log|a| < 0
                raise NoRoot("moment function never falls below one")
            break
        lo = k
    else:
        raise NoRoot(f"E|a|^k < 1 for all k up to {kappa_max}")
    hi = k
    if val == math.inf:
        # moment blows up (Student t at k >= df): shrink the upper bracket
        while log_m(hi) == math.inf:
            hi = 0.5 * (lo + hi)
            if hi - lo < 1e-12:
                raise NoRoot("moment explodes before reaching one")
        if log_m(hi) <= 0:
            raise NoRoot("moment explodes before reaching one")
    kappa = optimize.brentq(log_m, lo, hi, xtol=1e-12, rtol=1e-14, maxiter=200)
    if abs(dist.abs_moment(kappa) - 1.0) > tol:
        raise NoRoot(f"root polish failed: E|a|^k = {dist.abs_moment(kappa)}")
    return float(kappa)


def calibrate_coefficient_scale(kappa: float, family: str = "normal", df: float = 5.0) -> float:
    """Scale ``s`` of a zero-centred coefficient law with ``E|a|^kappa = 1``.

    Solved numerically on quadrature moments; ``family`` is ``"normal"``,
    ``"uniform"`` (on ``[-s, s]``) or ``"student_t"`` (needs ``kappa < df``).
    """
    if kappa <= 0:
        raise ConfigError("kappa must be positive")

    def make(s):
        if family == "normal":
            return Dist.normal(0.0, s)
        if family == "uniform":
            return Dist.uniform(-s, s)
        if family == "student_t":
            if kappa >= df:
                raise ConfigError("student_t needs kappa < df")
            return Dist.student_t(df, 0.0, s)
        raise ConfigError(f"unsupported family {family!r}")

    f = lambda s: math.log(make(s).abs_moment(kappa))  # noqa: E731
    lo, hi = 1e-3, 1.0
    while f(hi) < 0:
        hi *= 2.0
    s = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15)
    return float(s)


def calibrated_coefficients(kappa: float = 3.0) -> Dist:
    """Zero-mean normal coefficient law whose one-lag tail index is ``kappa``."""
    return Dist.normal(0.0, calibrate_coefficient_scale(kappa, "normal"))


# ---------------------------------------------------------------------------
# news


@dataclass(frozen=True)
class NewsProcess:
    """Two-state (calm / turbulent) Markov chain modulating the news-shock scale."""

    stay_calm: float = 0.995
    stay_turbulent: float = 0.995
    scale_calm: float = 0.008
    scale_turbulent: float = 0.01

    def __post_init__(self):
        for name in ("stay_calm", "stay_turbulent"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        for name in ("scale_calm", "scale_turbulent"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @classmethod
    def constant(cls, scale: float) -> "NewsProcess":
        """Regimes switched off: both states share one shock scale."""
        return cls(0.5, 0.5, scale, scale)

    @property
    def stationary_turbulent(self) -> float:
        a, b = 1.0 - self.stay_calm, 1.0 - self.stay_turbulent
        return a / (a + b)


@dataclass(frozen=True)
class NewsPath:
    regimes: np.ndarray  # 0 calm, 1 turbulent
    scales: np.ndarray
    shocks: np.ndarray


def _regime_path(news: NewsProcess, T: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(T).tolist()
    state = int(u[0] < news.stationary_turbulent)
    stay = (news.stay_calm, news.stay_turbulent)
    out = np.empty(T, dtype=np.int8)
    out[0] = state
    for t in range(1, T):
        if u[t] >= stay[state]:
            state = 1 - state
        out[t] = state
    return out


def generate_news(news: NewsProcess, T: int, seed) -> NewsPath:
    """Sample a regime path and Gaussian news shocks scaled by the regime."""
    rng = np.random.default_rng(seed)
    regime_rng, shock_rng = rng.spawn(2)
    regimes = _regime_path(news, T, regime_rng)
    scales = np.where(regimes == 1, news.scale_turbulent, news.scale_calm)
    shocks = scales * shock_rng.standard_normal(T)
    return NewsPath(regimes, scales, shocks)


# ---------------------------------------------------------------------------
# trend-following agents


@dataclass(frozen=True)
class TrendRule:
    """Resale-price expectations extrapolated from recent returns.

    An agent expects ``p_last * (1 + sum_h a_h r_{t-h} + news + noise)``,
    with ``a_h`` drawn from ``weights[h-1]`` on every decision and
    ``noise ~ N(0, noise_scale)``.
    """

    weights: tuple = (Dist.normal(0.0, 0.5),)
    noise_scale: float = 0.0

    def __post_init__(self):
        w = self.weights
        if isinstance(w, (Dist, dict)):
            w = (w,)
        w = tuple(_as_dist(x) for x in w)
        if not w:
            raise ConfigError("TrendRule needs H >= 1 lags")
        for d in w:
            if d.family == "student_t" and d.params["df"] <= 2 and not d.is_degenerate:
                raise ConfigError("trend weights must have finite variance")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be non-negative")
        object.__setattr__(self, "weights", w)

    @property
    def H(self) -> int:
        return len(self.weights)

    @classmethod
    def zero(cls, H: int = 1) -> "TrendRule":
        return cls(tuple(Dist.degenerate(0.0) for _ in range(H)), 0.0)

    def draw_weights(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """(n, H) matrix of weights, one row per agent."""
        return np.column_stack([d.sample(rng, n) for d in self.weights])

    def expected_return(self, rng: np.random.Generator, recent: Sequence[float], n: int = 1) -> np.ndarray:
        """Expected next return for ``n`` agents given ``recent = (r_{t-1}, r_{t-2}, ...)``."""
        lagged = np.zeros(self.H)
        k = min(len(recent), self.H)
        lagged[:k] = recent[:k]
        a = self.draw_weights(rng, n)
        out = a @ lagged
        if self.noise_scale > 0:
            out = out + self.noise_scale * rng.standard_normal(n)
        return out


def simulate_speculative_market(rule: TrendRule, news: NewsProcess, n_agents: int, T: int, seed,
                                p0: float = 100.0, cash_cap: Optional[float] = None,
                                news_shocks: Optional[np.ndarray] = None,
                                strict: bool = False) -> ReturnSeries:
    """Market of trend-following speculators cleared at the median expectation.

    Each step every agent draws fresh trend weights, so the market return is
    the median over agents of ``sum_h a_ih r_{t-h} + news_t + noise_it``. The
    first ``10 * H`` steps are burn-in. ``news_shocks`` (length
    ``10 * H + T``) replaces the generated news stream. Returns at or below
    -100% are floored at -99% and counted, unless ``strict`` is set, in which
    case :class:`DegeneratePrice` is raised.
    """
    if n_agents < 1:
        raise ConfigError("n_agents must be >= 1")
    H = rule.H
    burn = BURN_IN_PER_LAG * H
    n = burn + T
    rng = np.random.default_rng(seed)
    news_rng, agent_rng = rng.spawn(2)
    if news_shocks is None:
        path = generate_news(news, n, news_rng)
        news_shocks, regimes = path.shocks, path.regimes
    else:
        news_shocks = np.asarray(news_shocks, dtype=float)
        if news_shocks.shape != (n,):
            raise ConfigError(f"need {n} news shocks (burn-in included)")
        regimes = None

    prices = np.empty(n + 1)
    prices[0] = p0
    r = np.zeros(n + H)  # r[t + H] is the return of step t
    truncated = 0
    deterministic = all(d.is_degenerate for d in rule.weights) and rule.noise_scale == 0
    fixed_w = rule.draw_weights(agent_rng, 1)[0] if deterministic else None
    for t in range(n):
        lagged = r[t:t + H][::-1]
        if deterministic:
            # every agent agrees, the median is the common expectation
            ret = float(fixed_w @ lagged) + news_shocks[t]
        else:
            a = rule.draw_weights(agent_rng, n_agents)
            exp_ret = a @ lagged + news_shocks[t]
            if rule.noise_scale > 0:
                exp_ret = exp_ret + rule.noise_scale * agent_rng.standard_normal(n_agents)
            if cash_cap is not None:
                exp_ret = np.minimum(exp_ret, cash_cap / prices[t] - 1.0)
            ret = float(np.median(exp_ret))
        if deterministic and cash_cap is not None:
            ret = min(ret, cash_cap / prices[t] - 1.0)
        if not math.isfinite(ret):
            raise DegeneratePrice(f"non-finite return at step {t}")
        if 1.0 + ret <= 0.0:
            if strict:
                raise DegeneratePrice(f"price would fall to {prices[t] * (1 + ret):.6g} at step {t}")
            ret = RETURN_FLOOR
            truncated += 1
        r[t + H] = ret
        prices[t + 1] = prices[t] * (1.0 + ret)
    returns = r[H + burn:]
    meta = {"generator": "speculative_market", "n_agents": n_agents, "seed": seed}
    if regimes is not None:
        meta["regimes"] = regimes[burn:]
    return ReturnSeries(returns, prices[burn:], truncated, meta)


def fit_random_coefficient_ar1(returns) -> dict:
    """Detect a time-varying lag-one coefficient.

    Fits ``r_t = b r_{t-1} + e_t`` by OLS, then regresses the squared
    residuals on ``r_{t-1}^2``. For a random coefficient with variance
    ``s2`` the slope estimates ``s2``; ``t_stat`` uses White standard errors.
    """
    r = np.asarray(returns, dtype=float)
    x, y = r[:-1], r[1:]
    b = float(x @ y / (x @ x))
    u2 = (y - b * x) ** 2
    X = np.column_stack([np.ones_like(x), x ** 2])
    beta, *_ = np.linalg.lstsq(X, u2, rcond=None)
    resid = u2 - X @ beta
    xtx_inv = np.linalg.inv(X.T @ X)
    meat = (X * resid[:, None] ** 2).T @ X
    cov = xtx_inv @ meat @ xtx_inv
    se = float(np.sqrt(cov[1, 1]))
    return {"ar1": b, "coef_variance": float(beta[1]), "shock_variance": float(beta[0]),
            "t_stat": float(beta[1] / se) if se > 0 else math.inf}
