"""Payment utility functions and the per-firm payment problem.

Both shipped rules are diagonal quadratics ``h(p) = -1/2 Σ d_k (c_k - p_k)^2``
with a center ``c`` above the obligation cap, so the maximizer over the box
``[0, pbar]`` with budget ``q·p <= w`` is ``clip(c - lam q / d, 0, pbar)`` for
the smallest ``lam >= 0`` that fits the budget.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ._waterfill import clipped_level
from .network import MultiLayerNetwork, RelativeLiabilities, realized_inflow

DEFAULT_DELTA_SCALE = 1e-3


def _delta(delta, delta_scale, pbar, e):
    if delta is not None:
        return np.broadcast_to(np.asarray(delta, dtype=float), pbar.shape)
    return delta_scale * (1.0 + np.maximum(pbar, e))


@dataclass(frozen=True)
class Surplus:
    """Transfer between assets only out of surplus holdings."""

    delta_scale: float = DEFAULT_DELTA_SCALE
    delta: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.delta is not None and np.any(np.asarray(self.delta) <= 0):
            raise ValueError("delta must be strictly positive")
        if self.delta_scale <= 0:
            raise ValueError("delta_scale must be strictly positive")

    def center_and_weights(self, pbar, e, q):
        pbar, e = np.atleast_2d(pbar), np.atleast_2d(e)
        c = np.maximum(pbar, e) + _delta(self.delta, self.delta_scale, pbar, e)
        denom = c - e
        assert np.all(denom > 0)
        return c, np.asarray(q) / denom

    def to_config(self) -> dict:
        out = {"payment_rule": "surplus", "delta_scale": self.delta_scale}
        if self.delta is not None:
            out["delta"] = list(self.delta)
        return out


@dataclass(frozen=True)
class PriorityProportional:
    """Pay the first ``mu`` assets of ``order`` in sequence, the rest pro rata.

    ``mu = 0`` is purely proportional, ``mu = m`` a strict seniority ordering.
    ``order`` is a permutation of asset indices (default: natural order).
    """

    mu: int
    delta_scale: float = DEFAULT_DELTA_SCALE
    delta: tuple[float, ...] | None = None
    order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.order is not None:
            object.__setattr__(self, "order", tuple(int(k) for k in self.order))
            if sorted(self.order) != list(range(len(self.order))):
                raise ValueError(f"order must be a permutation, got {self.order}")
            if self.mu > len(self.order):
                raise ValueError("mu exceeds number of assets")
        if self.delta is not None and np.any(np.asarray(self.delta) <= 0):
            raise ValueError("delta must be strictly positive")

    def _perm(self, m):
        if self.mu > m:
            raise ValueError(f"mu={self.mu} exceeds m={m}")
        if self.order is None:
            return np.arange(m)
        if len(self.order) != m:
            raise ValueError(f"order has {len(self.order)} entries for m={m} assets")
        return np.asarray(self.order)

    def fill_levels(self, pbar, e, q):
        """Sequential fill levels ``s`` (first ``mu`` assets, in priority order) and pro-rata share ``pi``."""
        pbar, e = np.atleast_2d(pbar).astype(float), np.atleast_2d(e).astype(float)
        q = np.asarray(q, dtype=float)
        perm = self._perm(pbar.shape[1])
        pb, qq = pbar[:, perm], q[perm]
        wealth = e @ q
        s = np.zeros((pbar.shape[0], self.mu))
        spent = np.zeros(pbar.shape[0])
        for k in range(self.mu):
            s[:, k] = np.minimum(pb[:, k], np.maximum(wealth - spent, 0.0) / qq[k])
            spent = spent + qq[k] * s[:, k]
        owed = pb @ qq
        num = np.minimum(owed, wealth) - spent
        den = owed - spent
        with np.errstate(divide="ignore", invalid="ignore"):
            pi = np.where(den > 0, num / den, 1.0)
        return s, np.clip(pi, 0.0, 1.0)

    def center_and_weights(self, pbar, e, q):
        pbar, e = np.atleast_2d(pbar).astype(float), np.atleast_2d(e).astype(float)
        q = np.asarray(q, dtype=float)
        perm = self._perm(pbar.shape[1])
        c = pbar + _delta(self.delta, self.delta_scale, pbar, e)
        s, pi = self.fill_levels(pbar, e, q)
        target = pi[:, None] * pbar
        target[:, perm[: self.mu]] = s
        denom = c - target
        assert np.all(denom > 0)
        return c, q / denom

    def to_config(self) -> dict:
        out = {"payment_rule": "priority", "mu": self.mu, "delta_scale": self.delta_scale}
        if self.delta is not None:
            out["delta"] = list(self.delta)
        if self.order is not None:
            out["order"] = list(self.order)
        return out


PaymentRule = Union[Surplus, PriorityProportional]


def center_and_weights(rule: PaymentRule, pbar, e, q):
    c, d = rule.center_and_weights(pbar, e, q)
    if np.ndim(pbar) == 1:
        return c[0], d[0]
    return c, d


def payment_utility(rule: PaymentRule, p, pbar, e, q) -> np.ndarray:
    """Value of ``h`` at payment(s) ``p``; the center/weights depend on ``(pbar, e, q)``."""
    c, d = rule.center_and_weights(pbar, e, q)
    p = np.atleast_2d(p)
    return -0.5 * np.sum(d * (c - p) ** 2, axis=-1)


def solve_payments(rule: PaymentRule, pbar, e, q) -> np.ndarray:
    """Row-wise argmax of ``h`` over ``[0, pbar]`` with budget ``q·p <= q·e``."""
    pbar = np.atleast_2d(np.asarray(pbar, dtype=float))
    e = np.atleast_2d(np.asarray(e, dtype=float))
    q = np.asarray(q, dtype=float)
    if isinstance(rule, PriorityProportional):
        rule._perm(pbar.shape[1])  # reject mu/order that do not fit m, even when nothing is solved
    out = np.zeros_like(pbar)
    owing = np.any(pbar > 0, axis=1)
    if not np.any(owing):
        return out
    pb, ee = pbar[owing], e[owing]
    w = ee @ q
    solvent = pb @ q <= w
    res = pb.copy()
    if not np.all(solvent):
        idx = ~solvent
        c, d = rule.center_and_weights(pb[idx], ee[idx], q)
        res[idx], _ = clipped_level(c, q / d, np.zeros_like(c), pb[idx], q, w[idx])
    out[owing] = res
    return out


def solve_payment(rule: PaymentRule, pbar, e, q) -> np.ndarray:
    """Single-firm payment vector."""
    return solve_payments(rule, np.asarray(pbar, dtype=float)[None, :], np.asarray(e, dtype=float)[None, :], q)[0]


RuleSpec = Union[PaymentRule, Sequence[PaymentRule]]


def per_firm(rules, n: int) -> list:
    if isinstance(rules, (list, tuple)):
        if len(rules) != n:
            raise ValueError(f"expected {n} per-firm rules, got {len(rules)}")
        return list(rules)
    return [rules] * n


def group_rows(rules: list) -> dict:
    """Map each distinct rule to the row indices using it."""
    groups: dict = {}
    for i, r in enumerate(rules):
        groups.setdefault(r, []).append(i)
    return {r: np.asarray(ix) for r, ix in groups.items()}


def payments_from_inflow(rules: RuleSpec, pbar, inflow, q) -> np.ndarray:
    n = pbar.shape[0]
    out = np.zeros_like(pbar, dtype=float)
    for rule, ix in group_rows(per_firm(rules, n)).items():
        out[ix] = solve_payments(rule, pbar[ix], inflow[ix], q)
    return out


def payment_map(rules: RuleSpec, net: MultiLayerNetwork, rel: RelativeLiabilities, y, q) -> np.ndarray:
    """``P(y, q)``: every firm's payment given the others' holdings ``y``."""
    return payments_from_inflow(rules, rel.pbar, realized_inflow(net, rel, y), q)


def rule_from_config(spec: dict) -> PaymentRule:
    kind = spec.get("payment_rule", "surplus")
    common = {"delta_scale": float(spec.get("delta_scale", DEFAULT_DELTA_SCALE))}
    if spec.get("delta") is not None:
        common["delta"] = tuple(float(v) for v in spec["delta"])
    if kind == "surplus":
        return Surplus(**common)
    if kind in ("priority", "proportional"):
        mu = int(spec.get("mu", 0 if kind == "proportional" else 1))
        order = spec.get("order")
        return PriorityProportional(mu, order=tuple(order) if order is not None else None, **common)
    raise ValueError(f"unknown payment rule {kind!r}")
