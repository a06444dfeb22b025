"""Inverse demand functions: net quantities sold -> prices in the numéraire.

Every family is bounded in ``[lower, upper]``, continuous and nonincreasing.
Asset 0 is the numéraire for the two-asset and ratio-form constructions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

ALPHA_TOL = 1e-12


class InverseDemand:
    """Base class.  Subclasses implement ``__call__`` and ``to_config``."""

    lower: np.ndarray
    upper: np.ndarray

    @property
    def m(self) -> int:
        return len(self.lower)

    def __call__(self, z) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def unshocked(self) -> np.ndarray:
        return self(np.zeros(self.m))

    def shock_for_price(self, q0) -> np.ndarray:
        """Some ``gamma0`` with ``F(gamma0) == q0`` (componentwise search, diagonal families)."""
        q0 = np.asarray(q0, dtype=float)
        if np.any(q0 < self.lower - 1e-12) or np.any(q0 > self.upper + 1e-12):
            raise ValueError(f"initial price {q0} outside [{self.lower}, {self.upper}]")
        gamma = np.zeros(self.m)
        for k in range(self.m):
            gamma[k] = _invert_component(self, k, q0[k])
        return gamma

    def to_config(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError


def _invert_component(F: InverseDemand, k: int, target: float) -> float:
    def price(t):
        z = np.zeros(F.m)
        z[k] = t
        return F(z)[k]

    p0 = price(0.0)
    if abs(p0 - target) <= 1e-15 * max(1.0, abs(target)):
        return 0.0
    # selling lowers the price
    direction = 1.0 if target < p0 else -1.0
    hi = 1.0
    while (price(direction * hi) - target) * direction > 0:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError(f"price {target} not attained by asset {k}")
    lo = 0.0
    # the price may be flat at the target (bounds); return the smallest-magnitude shock
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if (price(direction * mid) - target) * direction > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return direction * hi


@dataclass(frozen=True, eq=False)
class Constant(InverseDemand):
    """Frictionless market: prices never move."""

    prices: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float)
        if np.any(p <= 0):
            raise ValueError("prices must be strictly positive")
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "lower", p.copy())
        object.__setattr__(self, "upper", p.copy())

    def __call__(self, z) -> np.ndarray:
        return self.prices.copy()

    def shock_for_price(self, q0) -> np.ndarray:
        q0 = np.asarray(q0, dtype=float)
        if not np.allclose(q0, self.prices):
            raise ValueError("a constant inverse demand only attains its own price")
        return np.zeros(self.m)

    def to_config(self) -> dict:
        return {"family": "constant", "prices": self.prices.tolist()}


@dataclass(frozen=True, eq=False)
class CappedLinear(InverseDemand):
    """``F_k(z) = lower_k ∨ (intercept_k - slope_k z_k) ∧ upper_k``."""

    intercept: np.ndarray
    slope: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        for name in ("intercept", "slope", "lower", "upper"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if np.any(self.slope < 0):
            raise ValueError("slopes must be nonnegative")
        if np.any(self.lower <= 0) or np.any(self.lower > self.upper):
            raise ValueError("need 0 < lower <= upper")

    @classmethod
    def two_asset(cls, b: float, lower: float, upper: float) -> "CappedLinear":
        """Numéraire first asset and ``F_2(z) = lower ∨ (1 - b z_2) ∧ upper``."""
        return cls([1.0, 1.0], [0.0, b], [1.0, lower], [1.0, upper])

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.clip(self.intercept - self.slope * z, self.lower, self.upper)

    def shock_for_price(self, q0) -> np.ndarray:
        q0 = np.asarray(q0, dtype=float)
        if np.any(q0 < self.lower - 1e-12) or np.any(q0 > self.upper + 1e-12):
            raise ValueError(f"initial price {q0} outside bounds")
        gamma = np.zeros(self.m)
        moving = self.slope > 0
        gamma[moving] = (self.intercept[moving] - q0[moving]) / self.slope[moving]
        if np.any(~moving & ~np.isclose(q0, np.clip(self.intercept, self.lower, self.upper))):
            raise ValueError("initial price not attainable for a zero-slope asset")
        return gamma

    def to_config(self) -> dict:
        return {
            "family": "capped_linear",
            "intercept": self.intercept.tolist(),
            "slope": self.slope.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }


@dataclass(frozen=True)
class ArctanImpact:
    """``f(z) = (amplitude·atan(-impact·z) + offset·π) / (offset·π)``; falls from 1 to ``1 - amplitude/(2·offset)``."""

    amplitude: float = 3.0
    offset: float = 2.0
    impact: float = 1.0

    def __post_init__(self):
        if self.impact < 0:
            raise ValueError("impact parameter must be nonnegative")
        if not 0 < self.amplitude < 2 * self.offset:
            raise ValueError("need 0 < amplitude < 2*offset for a positive floor")

    @property
    def floor(self) -> float:
        return 1.0 - self.amplitude / (2.0 * self.offset)

    def __call__(self, z):
        return (self.amplitude * np.arctan(-self.impact * np.asarray(z, dtype=float)) + self.offset * math.pi) / (
            self.offset * math.pi
        )


def _grid_increasing(values: np.ndarray) -> bool:
    return bool(np.all(np.diff(values) > 0))


_VALIDATION_GRID = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 4000)])


@dataclass(frozen=True, eq=False)
class SymmetricTwoAsset(InverseDemand):
    """Two assets, asset 0 numéraire; sales use ``f``, purchases the reciprocal branch.

    ``F_2(z) = f(z_2)`` for ``z_2 >= 0`` and ``1 / f(alpha^{-1}(-z_2))`` otherwise,
    with ``alpha(z) = z f(z)`` the numéraire value of selling ``z`` units.
    """

    f: Callable[[float], float]
    floor: float
    lower: np.ndarray = field(init=False)
    upper: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0 < self.floor <= 1:
            raise ValueError("floor of f must lie in (0, 1]")
        object.__setattr__(self, "lower", np.array([1.0, self.floor]))
        object.__setattr__(self, "upper", np.array([1.0, 1.0 / self.floor]))

    def alpha(self, z):
        z = np.asarray(z, dtype=float)
        return z * self.f(z)

    def alpha_inv(self, w: float) -> float:
        """Units of the second asset whose sale raises ``w`` units of the numéraire."""
        if w <= 0:
            return 0.0
        lo, hi = 0.0, 2.0 * w / self.floor
        while self.alpha(hi) < w:
            hi *= 2.0
        return brentq(lambda t: float(self.alpha(t)) - w, lo, hi, xtol=ALPHA_TOL * 1e-2, rtol=4 * np.finfo(float).eps)

    def price(self, z2: float) -> float:
        if z2 >= 0:
            return float(np.clip(self.f(z2), self.floor, 1.0 / self.floor))
        return float(np.clip(1.0 / self.f(self.alpha_inv(-z2)), self.floor, 1.0 / self.floor))

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.array([1.0, self.price(float(z[1]))])

    def shock_for_price(self, q0) -> np.ndarray:
        q0 = np.asarray(q0, dtype=float)
        if not math.isclose(q0[0], 1.0):
            raise ValueError("asset 0 is the numéraire; its price is 1")
        target = q0[1]
        if target < self.floor - 1e-12 or target > 1.0 / self.floor + 1e-12:
            raise ValueError(f"price {target} outside [{self.floor}, {1 / self.floor}]")
        if target == 1.0:
            return np.zeros(2)
        if target < 1.0:
            return np.array([0.0, _invert_component(self, 1, target)])
        # buying: F_2 = 1/f(u) with z_2 = -alpha(u)
        u = _invert_scalar(self.f, 1.0 / target)
        return np.array([0.0, -float(self.alpha(u))])

    def to_config(self) -> dict:
        if isinstance(self.f, ArctanImpact):
            return {
                "family": "arctan_symmetric",
                "amplitude": self.f.amplitude,
                "offset": self.f.offset,
                "impact": self.f.impact,
                "lower": self.lower.tolist(),
                "upper": self.upper.tolist(),
            }
        raise TypeError("only arctan-based symmetric families are serializable")


def _invert_scalar(f, target: float) -> float:
    """Smallest ``z >= 0`` with ``f(z) <= target`` for nonincreasing ``f``."""
    if f(0.0) <= target:
        return 0.0
    hi = 1.0
    while f(hi) > target:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError(f"level {target} not attained")
    return brentq(lambda t: float(f(t)) - target, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def make_symmetric_two_asset(f: Callable, floor: float | None = None) -> SymmetricTwoAsset:
    """Build the reciprocal-symmetric two-asset inverse demand from a one-sided ``f``.

    ``f`` must satisfy ``f(0) == 1`` (continuity at zero) and ``z -> z f(z)``
    must be strictly increasing; both are checked on a validation grid.
    """
    if floor is None:
        floor = getattr(f, "floor", None)
        if floor is None:
            floor = float(f(_VALIDATION_GRID[-1]))
    if not math.isclose(float(f(0.0)), 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"f(0) must equal 1 for a continuous symmetric construction, got {f(0.0)}")
    vals = np.asarray(f(_VALIDATION_GRID), dtype=float)
    if np.any(np.diff(vals) > 1e-15):
        raise ValueError("f must be nonincreasing")
    if not _grid_increasing(_VALIDATION_GRID * vals):
        raise ValueError("z -> z f(z) is not strictly increasing on the validation grid")
    F = SymmetricTwoAsset(f, floor)
    check_liquidation_value(F)
    return F


def arctan_symmetric(amplitude: float = 3.0, offset: float = 2.0, impact: float = 1.0) -> SymmetricTwoAsset:
    """Symmetric two-asset arctan family (``impact = 0`` is frictionless)."""
    return make_symmetric_two_asset(ArctanImpact(amplitude, offset, impact))


@dataclass(frozen=True)
class ClippedExp:
    """``g(z) = clip(exp(-rate z), lower, upper)``."""

    rate: float = 1.0
    lower: float = 0.5
    upper: float = 2.0

    def __call__(self, z):
        with np.errstate(over="ignore"):  # inf is clipped to the upper bound
            return np.clip(np.exp(-self.rate * np.asarray(z, dtype=float)), self.lower, self.upper)


@dataclass(frozen=True, eq=False)
class RatioForm(InverseDemand):
    """``F_k(z) = g(z_k) / g(z_0)`` for a scalar ``g`` with range ``[g_lower, g_upper]``."""

    g: Callable
    m_assets: int
    g_lower: float
    g_upper: float
    lower: np.ndarray = field(init=False)
    upper: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.g_lower <= 0:
            raise ValueError("g must take strictly positive values")
        if self.g_lower > self.g_upper:
            raise ValueError("need g_lower <= g_upper")
        lo = np.full(self.m_assets, self.g_lower / self.g_upper)
        hi = np.full(self.m_assets, self.g_upper / self.g_lower)
        lo[0] = hi[0] = 1.0
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __call__(self, z) -> np.ndarray:
        gz = np.asarray(self.g(np.asarray(z, dtype=float)), dtype=float)
        if np.any(gz <= 0):
            raise ValueError("g produced a nonpositive value")
        out = gz / gz[0]
        out[0] = 1.0
        return np.clip(out, self.lower, self.upper)

    def shock_for_price(self, q0) -> np.ndarray:
        """Shock reaching ``q0``; asset 0 stays unshocked unless the ratios need a different ``g(z_0)``."""
        q0 = np.asarray(q0, dtype=float)
        if not math.isclose(q0[0], 1.0):
            raise ValueError("asset 0 is the numéraire; its price is 1")
        lo = max(self.g_lower, float(np.max(self.g_lower / q0)))
        hi = min(self.g_upper, float(np.min(self.g_upper / q0)))
        if lo > hi * (1 + 1e-12):
            raise ValueError(f"price {q0.tolist()} not attainable")
        g0 = float(np.clip(self.g(0.0), lo, hi))
        gamma = np.zeros(self.m_assets)
        gamma[0] = _invert_g(self.g, g0)
        for k in range(1, self.m_assets):
            gamma[k] = _invert_g(self.g, float(np.clip(q0[k] * g0, self.g_lower, self.g_upper)))
        return gamma

    def to_config(self) -> dict:
        if isinstance(self.g, ClippedExp):
            return {
                "family": "ratio_form",
                "m": self.m_assets,
                "g": {"kind": "clipped_exp", "rate": self.g.rate, "lower": self.g.lower, "upper": self.g.upper},
                "lower": self.lower.tolist(),
                "upper": self.upper.tolist(),
            }
        raise TypeError("only clipped-exponential ratio forms are serializable")


def _invert_g(g, target: float) -> float:
    g0 = float(g(0.0))
    if math.isclose(g0, target, rel_tol=1e-15, abs_tol=0):
        return 0.0
    sign = 1.0 if target < g0 else -1.0
    hi = 1.0
    while (float(g(sign * hi)) - target) * sign > 0:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("target not attained")
    return sign * brentq(lambda t: float(g(sign * t)) - target, 0.0, hi, xtol=1e-15)


def make_ratio_form(g: Callable, m: int, g_lower: float | None = None, g_upper: float | None = None) -> RatioForm:
    if g_lower is None:
        g_lower = getattr(g, "lower")
    if g_upper is None:
        g_upper = getattr(g, "upper")
    return RatioForm(g, m, float(g_lower), float(g_upper))


def check_liquidation_value(F: InverseDemand, n_samples: int = 2000, seed: int = 0) -> bool:
    """Warn if ``z -> zᵀF(z)`` fails to increase along random coordinate moves."""
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(n_samples):
        z = rng.normal(scale=5.0, size=F.m)
        k = rng.integers(F.m)
        dz = np.zeros(F.m)
        dz[k] = abs(rng.normal()) + 1e-3
        if (z + dz) @ F(z + dz) <= z @ F(z):
            ok = False
            break
    if not ok:
        warnings.warn("liquidation value z -> z·F(z) is not strictly increasing", stacklevel=2)
    return ok


def from_config(spec: dict) -> InverseDemand:
    family = spec.get("family")
    if family == "constant":
        return Constant(spec["prices"])
    if family == "capped_linear":
        if "b" in spec:
            return CappedLinear.two_asset(spec["b"], spec["lower"], spec["upper"])
        return CappedLinear(spec["intercept"], spec["slope"], spec["lower"], spec["upper"])
    if family == "arctan_symmetric":
        return arctan_symmetric(spec.get("amplitude", 3.0), spec.get("offset", 2.0), spec.get("impact", 1.0))
    if family == "ratio_form":
        g = spec["g"]
        if g.get("kind") != "clipped_exp":
            raise ValueError(f"unsupported ratio-form g kind {g.get('kind')!r}")
        return make_ratio_form(ClippedExp(g.get("rate", 1.0), g["lower"], g["upper"]), int(spec["m"]))
    raise ValueError(f"unknown inverse demand family {family!r}")
