from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# Percent returns at or below this are floored so prices stay positive.
RETURN_FLOOR = -0.99


@dataclass(eq=False)
class ReturnSeries:
    """Percent returns ``r_t = (p_t - p_{t-1}) / p_{t-1}``, optionally with prices.

    When ``prices`` is present it has one more element than ``returns`` and
    ``prices[t] = prices[0] * prod(1 + returns[:t])`` up to rounding.
    ``n_truncated`` counts returns that were floored at ``RETURN_FLOOR``.
    """

    returns: np.ndarray
    prices: Optional[np.ndarray] = None
    n_truncated: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        if self.returns.ndim != 1:
            raise ValueError("returns must be one-dimensional")
        if self.prices is not None:
            self.prices = np.asarray(self.prices, dtype=float)
            if self.prices.shape != (len(self.returns) + 1,):
                raise ValueError("prices must have exactly one more element than returns")

    def __len__(self) -> int:
        return len(self.returns)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReturnSeries):
            return NotImplemented
        same_prices = (self.prices is None and other.prices is None) or (
            self.prices is not None and other.prices is not None
            and np.array_equal(self.prices, other.prices))
        return np.array_equal(self.returns, other.returns) and same_prices

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.returns)

    def with_prices(self, p0: float = 100.0) -> "ReturnSeries":
        """Materialize a price path, flooring returns at ``RETURN_FLOOR``."""
        r = self.returns.copy()
        bad = 1.0 + r <= 0.0
        r[bad] = RETURN_FLOOR
        prices = p0 * np.concatenate(([1.0], np.cumprod(1.0 + r)))
        return ReturnSeries(r, prices, int(bad.sum()) + self.n_truncated, dict(self.meta))
