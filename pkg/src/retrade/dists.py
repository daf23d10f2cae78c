"""Small serializable distribution specs.

A :class:`Dist` is a family name plus parameters. It can sample with a numpy
``Generator``, report absolute moments ``E|X|^k`` (by quadrature for the
continuous families, exactly for the discrete ones) and ``E log|X|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DistributionError

# family -> required parameter names
FAMILIES = {
    "degenerate": ("value",),
    "normal": ("loc", "scale"),
    "uniform": ("low", "high"),
    "student_t": ("df", "loc", "scale"),
    "two_point": ("low", "high", "p_high"),
}


@dataclass(frozen=True)
class Dist:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DistributionError(f"unknown distribution family {self.family!r}")
        need = FAMILIES[self.family]
        missing = [k for k in need if k not in self.params]
        extra = [k for k in self.params if k not in need]
        if missing or extra:
            raise DistributionError(
                f"{self.family} needs parameters {need}, got {sorted(self.params)}")
        params = {k: float(self.params[k]) for k in need}
        if not all(math.isfinite(v) for v in params.values()):
            raise DistributionError(f"non-finite parameter in {params}")
        object.__setattr__(self, "params", params)
        p = params
        if self.family in ("normal", "student_t") and p["scale"] < 0:
            raise DistributionError("scale must be non-negative")
        if self.family == "student_t" and p["df"] <= 0:
            raise DistributionError("df must be positive")
        if self.family == "uniform" and p["low"] > p["high"]:
            raise DistributionError("uniform low > high")
        if self.family == "two_point" and not 0.0 <= p["p_high"] <= 1.0:
            raise DistributionError("p_high must be in [0, 1]")

    # constructors
    @classmethod
    def degenerate(cls, value: float) -> "Dist":
        return cls("degenerate", {"value": value})

    @classmethod
    def normal(cls, loc: float = 0.0, scale: float = 1.0) -> "Dist":
        return cls("normal", {"loc": loc, "scale": scale})

    @classmethod
    def uniform(cls, low: float, high: float) -> "Dist":
        return cls("uniform", {"low": low, "high": high})

    @classmethod
    def student_t(cls, df: float, loc: float = 0.0, scale: float = 1.0) -> "Dist":
        return cls("student_t", {"df": df, "loc": loc, "scale": scale})

    @classmethod
    def two_point(cls, low: float, high: float, p_high: float = 0.5) -> "Dist":
        return cls("two_point", {"low": low, "high": high, "p_high": p_high})

    @classmethod
    def from_dict(cls, d: dict) -> "Dist":
        d = dict(d)
        try:
            family = d.pop("family")
        except KeyError:
            raise DistributionError("distribution spec needs a 'family' key") from None
        return cls(family, d)

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}

    @property
    def is_degenerate(self) -> bool:
        p = self.params
        return (self.family == "degenerate"
                or (self.family in ("normal", "student_t") and p["scale"] == 0)
                or (self.family == "uniform" and p["low"] == p["high"])
                or (self.family == "two_point" and (p["low"] == p["high"] or p["p_high"] in (0.0, 1.0))))

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        p = self.params
        f = self.family
        if f == "degenerate":
            return np.full(size if size is not None else (), p["value"])
        if f == "normal":
            return p["loc"] + p["scale"] * rng.standard_normal(size)
        if f == "uniform":
            return rng.uniform(p["low"], p["high"], size)
        if f == "student_t":
            return p["loc"] + p["scale"] * rng.standard_t(p["df"], size)
        u = rng.random(size)
        return np.where(u < p["p_high"], p["high"], p["low"])

    def _atoms(self):
        """(values, probabilities) for discrete families, else None."""
        p = self.params
        if self.family == "degenerate":
            return [p["value"]], [1.0]
        if self.family == "two_point":
            return [p["low"], p["high"]], [1.0 - p["p_high"], p["p_high"]]
        if self.family in ("normal", "student_t") and p["scale"] == 0:
            return [p["loc"]], [1.0]
        if self.family == "uniform" and p["low"] == p["high"]:
            return [p["low"]], [1.0]
        return None

    def _density(self):
        """(scalar pdf, support) for the continuous families."""
        p = self.params
        if self.family == "normal":
            m, sd = p["loc"], p["scale"]
            c = 1.0 / (sd * math.sqrt(2.0 * math.pi))
            return (lambda x: c * math.exp(-0.5 * ((x - m) / sd) ** 2)), (-math.inf, math.inf)
        if self.family == "uniform":
            a, b = p["low"], p["high"]
            c = 1.0 / (b - a)
            return (lambda x: c), (a, b)
        nu, m, sd = p["df"], p["loc"], p["scale"]
        logc = math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2) - 0.5 * math.log(nu * math.pi) - math.log(sd)
        c, e = math.exp(logc), -(nu + 1) / 2
        return (lambda x: c * (1.0 + ((x - m) / sd) ** 2 / nu) ** e), (-math.inf, math.inf)

    def _expect_abs(self, g) -> float:
        """E[g(|X|)] by adaptive quadrature, split at the kink at zero."""
        atoms = self._atoms()
        if atoms is not None:
            vals, probs = atoms
            return float(sum(pr * g(abs(v)) for v, pr in zip(vals, probs) if pr > 0))
        pdf, (lo, hi) = self._density()
        total = 0.0
        for a, b in ((lo, min(hi, 0.0)), (max(lo, 0.0), hi)):
            if a < b:
                val, _ = integrate.quad(lambda x: g(abs(x)) * pdf(x), a, b,
                                        limit=200, epsabs=1e-13, epsrel=1e-12)
                total += val
        return total

    def abs_moment(self, k: float) -> float:
        """``E|X|^k``; ``inf`` when the moment does not exist."""
        if self.family == "student_t" and not self._atoms() and k >= self.params["df"]:
            return math.inf
        if k == 0:
            return 1.0

        def g(x):
            return 0.0 if x == 0.0 else x ** k
        return self._expect_abs(g)

    def mean_log_abs(self) -> float:
        """``E log|X|``; ``-inf`` if ``X`` has an atom at zero."""
        atoms = self._atoms()
        if atoms is not None:
            vals, probs = atoms
            if any(v == 0 and pr > 0 for v, pr in zip(vals, probs)):
                return -math.inf
            return float(sum(pr * math.log(abs(v)) for v, pr in zip(vals, probs) if pr > 0))
        return self._expect_abs(lambda x: math.log(x) if x > 0 else 0.0)
