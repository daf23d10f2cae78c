"""Heavy-tail and autocorrelation estimators for return series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    Empty, NonPositivePrice, NoValidTail, TailTooSmall, TooShort, ZeroMagnitudes, ZeroVariance,
)
from .series import ReturnSeries

MIN_TAIL = 10
DEFAULT_TAIL_FRACTION = 0.01
MIN_DECADES = 0.5  # a fitted tail must span at least this many decades


def _values(series) -> np.ndarray:
    if isinstance(series, ReturnSeries):
        return series.returns
    return np.asarray(series, dtype=float).ravel()


def returns_from_prices(prices) -> ReturnSeries:
    p = np.asarray(prices, dtype=float).ravel()
    if len(p) < 2:
        raise TooShort("need at least two prices")
    if not np.all(p > 0):
        raise NonPositivePrice(f"non-positive price at index {int(np.argmax(~(p > 0)))}")
    return ReturnSeries(np.diff(p) / p[:-1], p)


# ---------------------------------------------------------------------------
# survival function


@dataclass(frozen=True)
class CcdfCurve:
    x: np.ndarray     # distinct magnitudes, ascending
    prob: np.ndarray  # empirical prob{|r| >= x}

    def slope(self, x_lo: float, x_hi: float) -> float:
        """Least-squares slope of log prob against log x over ``[x_lo, x_hi]``."""
        m = (self.x >= x_lo) & (self.x <= x_hi) & (self.x > 0)
        if m.sum() < 2:
            raise NoValidTail("fewer than two CCDF points in range")
        return float(np.polyfit(np.log(self.x[m]), np.log(self.prob[m]), 1)[0])

    def tail_slope(self, p_hi: float = 1e-2, p_lo: float = 1e-3) -> float:
        """Log-log slope over the points whose survival probability lies in ``[p_lo, p_hi]``."""
        m = (self.prob >= p_lo) & (self.prob <= p_hi)
        if m.sum() < 2:
            raise NoValidTail("fewer than two CCDF points in the probability decade")
        return self.slope(self.x[m][0], self.x[m][-1])


def ccdf(series) -> CcdfCurve:
    mags = np.abs(_values(series))
    if mags.size == 0:
        raise Empty("empty series")
    xs, counts = np.unique(mags, return_counts=True)
    # number of observations >= each distinct value
    at_least = counts[::-1].cumsum()[::-1]
    return CcdfCurve(xs, at_least / mags.size)


# ---------------------------------------------------------------------------
# Hill estimator


def _sorted_magnitudes(series) -> np.ndarray:
    return np.sort(np.abs(_values(series)))


def _hill_sorted(x: np.ndarray, k: int) -> tuple[float, float]:
    n = len(x)
    if k < MIN_TAIL or k >= n:
        raise TailTooSmall(f"need {MIN_TAIL} <= k < n, got k={k}, n={n}")
    threshold = x[n - k - 1]
    if threshold <= 0:
        raise ZeroMagnitudes("order statistic at the tail threshold is zero")
    alpha = k / float(np.sum(np.log(x[n - k:] / threshold)))
    return alpha, alpha / math.sqrt(k)


def default_tail_count(n: int, fraction: float = DEFAULT_TAIL_FRACTION) -> int:
    return max(MIN_TAIL, int(round(fraction * n)))


def hill(series, k: Optional[int] = None) -> tuple[float, float]:
    """Hill tail-index estimate from the ``k`` largest magnitudes.

    Returns ``(alpha, stderr)`` with ``stderr = alpha / sqrt(k)``. ``k``
    defaults to the top 1% (at least 10 points).
    """
    x = _sorted_magnitudes(series)
    if k is None:
        k = default_tail_count(len(x))
    return _hill_sorted(x, int(k))


@dataclass(frozen=True)
class HillScan:
    k: np.ndarray
    alpha: np.ndarray
    stderr: np.ndarray
    stable: bool


def hill_scan(series, ks=None) -> HillScan:
    """Hill estimates over a range of tail counts, with a plateau check.

    The scan is flagged unstable when the estimates at the smallest and
    largest ``k`` differ by more than three combined standard errors.
    """
    x = _sorted_magnitudes(series)
    n = len(x)
    if ks is None:
        k_lo = default_tail_count(n, 0.001)
        k_hi = max(k_lo + 1, min(n - 1, int(0.05 * n)))
        ks = np.unique(np.geomspace(k_lo, k_hi, 20).astype(int))
    ks = np.asarray(ks, dtype=int)
    est = np.array([_hill_sorted(x, int(k)) for k in ks])
    a, se = est[:, 0], est[:, 1]
    stable = bool(abs(a[0] - a[-1]) <= 3.0 * math.hypot(se[0], se[-1]))
    return HillScan(ks, a, se, stable)


# ---------------------------------------------------------------------------
# KS-selected cutoff


@dataclass(frozen=True)
class TailFit:
    alpha: float
    xmin: float
    ks_stat: float
    n_tail: int
    stderr: float
    flags: tuple = ()

    def __post_init__(self):
        if not (self.alpha > 0 and self.xmin > 0 and self.n_tail >= MIN_TAIL):
            raise NoValidTail(f"invalid tail fit {self}")

    @property
    def poor_fit(self) -> bool:
        return bool(self.flags)


def _ks_distance(tail: np.ndarray, threshold: float, alpha: float) -> float:
    """KS distance between the empirical tail above ``threshold`` and a Pareto law."""
    k = len(tail)
    model = 1.0 - (tail / threshold) ** (-alpha)
    emp_hi = np.arange(1, k + 1) / k
    emp_lo = np.arange(0, k) / k
    return float(max(np.max(emp_hi - model), np.max(model - emp_lo)))


def fit_tail_at(x_sorted: np.ndarray, k: int) -> tuple[float, float, float]:
    """(alpha, threshold, KS distance) for the top ``k`` points of sorted magnitudes."""
    alpha, _ = _hill_sorted(x_sorted, k)
    n = len(x_sorted)
    threshold = x_sorted[n - k - 1]
    return alpha, threshold, _ks_distance(x_sorted[n - k:], threshold, alpha)


def fit_powerlaw(series, k_candidates: int = 200, min_tail: int = 50) -> TailFit:
    """Power-law tail fit with the cutoff chosen by minimum KS distance.

    Candidate cutoffs are the order statistics ``x_(n-k)`` for tail counts
    ``k`` on a geometric grid; at each one alpha is the Hill estimate on the
    ``k`` points above the cutoff, so ``fit.alpha == hill(series, fit.n_tail)[0]``.
    Flags: ``"small_tail"`` when fewer than ``min_tail`` points survive,
    ``"tail_collapse"`` when the tail holds under 0.1% of the sample,
    ``"ks_reject"`` when the KS distance exceeds the 5% critical value
    ``1.36 / sqrt(n_tail)``, ``"narrow_range"`` when the tail spans less than
    half a decade (a thin tail can mimic a steep power law locally),
    ``"hill_unstable"`` when Hill estimates drift across tail sizes.
    """
    x = _sorted_magnitudes(series)
    n = len(x)
    if n < 100:
        raise TooShort(f"need at least 100 observations, got {n}")
    positive = int(np.count_nonzero(x > 0))
    k_max = min(n - 1, positive - 1)
    if k_max < MIN_TAIL:
        raise NoValidTail("fewer than 10 positive magnitudes")
    ks = np.unique(np.geomspace(MIN_TAIL, k_max, k_candidates).astype(int))
    best = None
    for k in ks:
        alpha, threshold, d = fit_tail_at(x, int(k))
        if best is None or d < best[0]:
            best = (d, int(k), alpha, threshold)
    d, k, alpha, threshold = best
    flags = []
    if k < min_tail:
        flags.append("small_tail")
    if k < 0.001 * n:
        flags.append("tail_collapse")
    if d > 1.36 / math.sqrt(k):
        flags.append("ks_reject")
    if math.log10(x[-1] / threshold) < MIN_DECADES:
        flags.append("narrow_range")
    if k >= 2 * MIN_TAIL:
        scan = hill_scan(x, np.unique(np.geomspace(MIN_TAIL, k, 12).astype(int)))
        if not scan.stable:
            flags.append("hill_unstable")
    return TailFit(alpha, float(threshold), d, k, alpha / math.sqrt(k), tuple(flags))


# ---------------------------------------------------------------------------
# autocorrelation


def acf(x, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation (divides by T) at lags ``1..max_lag``."""
    x = np.asarray(x, dtype=float).ravel()
    T = len(x)
    if max_lag < 1 or T <= max_lag:
        raise TooShort(f"series of length {T} too short for max_lag={max_lag}")
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0 or not np.isfinite(denom) or np.ptp(x) == 0:
        raise ZeroVariance("series has zero variance")
    n_fft = 1 << (2 * T - 1).bit_length()
    f = np.fft.rfft(d, n_fft)
    full = np.fft.irfft(f * np.conj(f), n_fft)[: max_lag + 1]
    return np.clip(full[1:] / full[0], -1.0, 1.0)


@dataclass(frozen=True)
class AcfReport:
    lags: np.ndarray
    raw: np.ndarray
    absolute: np.ndarray
    band: float
    heavy_tail_warning: bool = False
    notes: tuple = field(default=())

    def frac_outside(self, which: str = "raw") -> float:
        v = self.raw if which == "raw" else self.absolute
        return float(np.mean(np.abs(v) > self.band))

    def frac_above(self, which: str = "absolute") -> float:
        v = self.raw if which == "raw" else self.absolute
        return float(np.mean(v > self.band))


def acf_report(series, max_lag: int = 50, tail_alpha: Optional[float] = None) -> AcfReport:
    """ACF of returns and of absolute returns with the white-noise band ``1.96/sqrt(T)``.

    Requires ``T > 10 * max_lag``. If ``tail_alpha`` (a fitted tail index)
    is 2 or less the variance is infinite and the report carries a warning.
    """
    r = _values(series)
    T = len(r)
    if T > 0 and np.ptp(r) == 0:
        raise ZeroVariance("series has zero variance")
    if T <= 10 * max_lag:
        raise TooShort(f"need T > 10 * max_lag = {10 * max_lag}, got {T}")
    raw = acf(r, max_lag)
    absolute = acf(np.abs(r), max_lag)
    warn = tail_alpha is not None and tail_alpha <= 2.0
    notes = ("tail index <= 2: infinite variance, autocorrelations are not well defined",) if warn else ()
    return AcfReport(np.arange(1, max_lag + 1), raw, absolute, 1.96 / math.sqrt(T), warn, notes)
