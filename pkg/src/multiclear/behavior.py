"""Firm utilities and the holdings problem given the payment floor.

Every rule spends exactly the firm's mark-to-market wealth ``w = q·e``; the
freedom to discard wealth is never used.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from ._waterfill import clipped_level
from .network import MultiLayerNetwork, RelativeLiabilities, realized_inflow
from .payment_rules import PaymentRule, Surplus, group_rows, payments_from_inflow, per_firm, rule_from_config

FLOOR_ROUNDING = 1e-9


class InfeasibleFloor(ValueError):
    """The payment floor costs more than the firm's wealth."""


def _check_floor(P, e, q):
    w = e @ q
    cost = P @ q
    over = cost > w
    if np.any(cost > w * (1 + FLOOR_ROUNDING) + FLOOR_ROUNDING):
        raise InfeasibleFloor(f"payment floor exceeds wealth: cost {cost[over]}, wealth {w[over]}")
    if np.any(over):
        P = P.copy()
        P[over] *= (w[over] / cost[over])[:, None]
    return P, w


@dataclass(frozen=True)
class MinTrading:
    """Closest (Euclidean) portfolio to the inflow that covers the payment floor."""

    def solve(self, P, e, q):
        P, w = _check_floor(P, e, q)
        if np.all(e >= P):
            return e.copy()
        y, _ = clipped_level(e, np.broadcast_to(q, e.shape), P, np.full_like(e, np.inf), q, w)
        return y

    def to_config(self) -> dict:
        return {"utility": "min_trading"}


@dataclass(frozen=True)
class AssetMax:
    """Put all residual wealth into asset ``k_star``."""

    k_star: int

    def solve(self, P, e, q):
        if not 0 <= self.k_star < e.shape[1]:
            raise ValueError(f"k_star={self.k_star} out of range for m={e.shape[1]}")
        P, w = _check_floor(P, e, q)
        y = P.copy()
        y[:, self.k_star] += (w - P @ q) / q[self.k_star]
        return y

    def to_config(self) -> dict:
        return {"utility": "asset_max", "k_star": self.k_star}


TIE_RELATIVE = 1e-12


@dataclass(frozen=True)
class ValueMax:
    """Maximize pre-crisis value: residual wealth buys the asset cheapest relative to ``reference_price``.

    When several assets tie, ``tie_break="lowest"`` gives everything to the
    lowest index and ``"spread"`` splits the residual value equally among them.
    """

    reference_price: tuple[float, ...]
    tie_break: str = "lowest"

    def __post_init__(self):
        object.__setattr__(self, "reference_price", tuple(float(v) for v in self.reference_price))
        if any(v <= 0 for v in self.reference_price):
            raise ValueError("reference price must be strictly positive")
        if self.tie_break not in ("lowest", "spread"):
            raise ValueError(f"unknown tie_break {self.tie_break!r}")

    def solve(self, P, e, q):
        P, w = _check_floor(P, e, q)
        ratio = np.asarray(self.reference_price) / q
        best = ratio >= ratio.max() * (1 - TIE_RELATIVE)
        residual = np.maximum(w - P @ q, 0.0)
        y = P.copy()
        if self.tie_break == "lowest":
            k = int(np.argmax(best))
            y[:, k] += residual / q[k]
        else:
            ks = np.flatnonzero(best)
            y[:, ks] += residual[:, None] / (len(ks) * q[ks])
        return y

    def to_config(self) -> dict:
        return {"utility": "value_max", "reference_price": list(self.reference_price), "tie_break": self.tie_break}


BehaviorRule = Union[MinTrading, AssetMax, ValueMax]


def solve_holdings(rule: BehaviorRule, floor, inflow, q) -> np.ndarray:
    """Single-firm holdings given payment floor and inflow."""
    q = np.asarray(q, dtype=float)
    P = np.asarray(floor, dtype=float)[None, :]
    e = np.asarray(inflow, dtype=float)[None, :]
    return rule.solve(P, e, q)[0]


@dataclass(frozen=True)
class RuleBook:
    """Payment rule and utility for every firm (a single rule applies to all)."""

    payment: PaymentRule | Sequence[PaymentRule] = field(default_factory=Surplus)
    behavior: BehaviorRule | Sequence[BehaviorRule] = field(default_factory=MinTrading)

    def __post_init__(self):
        for name in ("payment", "behavior"):
            v = getattr(self, name)
            if isinstance(v, list):
                object.__setattr__(self, name, tuple(v))

    def payments(self, n):
        return per_firm(self.payment, n)

    def behaviors(self, n):
        return per_firm(self.behavior, n)


def evaluate(rules: RuleBook, net: MultiLayerNetwork, rel: RelativeLiabilities, y, q):
    """One pass of the clearing mechanism: ``(inflow, payments, holdings)``."""
    q = np.asarray(q, dtype=float)
    inflow = realized_inflow(net, rel, y)
    P = payments_from_inflow(rules.payments(net.n), rel.pbar, inflow, q)
    Y = np.empty_like(inflow)
    for rule, ix in group_rows(rules.behaviors(net.n)).items():
        Y[ix] = rule.solve(P[ix], inflow[ix], q)
    return inflow, P, Y


def holdings_map(rules: RuleBook, net: MultiLayerNetwork, rel: RelativeLiabilities, y, q) -> np.ndarray:
    """``Y(y, q)``."""
    return evaluate(rules, net, rel, y, q)[2]


def behavior_from_config(spec: dict, m: int | None = None, reference_price=None) -> BehaviorRule:
    kind = spec.get("utility", "min_trading")
    if kind == "min_trading":
        return MinTrading()
    if kind == "asset_max":
        return AssetMax(int(spec["k_star"]))
    if kind == "value_max":
        ref = spec.get("reference_price", reference_price)
        if ref is None:
            raise ValueError("value_max needs a reference price (F(0))")
        return ValueMax(tuple(ref), spec.get("tie_break", "lowest"))
    raise ValueError(f"unknown utility {kind!r}")


def rulebook_from_config(spec: dict, n: int, reference_price=None) -> RuleBook:
    """``{payment: {...}, utility: {...}, overrides: {firm: {payment, utility}}}``."""
    pay = rule_from_config(spec.get("payment", {}))
    beh = behavior_from_config(spec.get("utility", {}), reference_price=reference_price)
    overrides = spec.get("overrides") or {}
    if not overrides:
        return RuleBook(pay, beh)
    pays, behs = [pay] * n, [beh] * n
    for key, ov in overrides.items():
        i = int(key)
        if not 0 <= i < n:
            raise ValueError(f"override for firm {i} out of range")
        if "payment" in ov:
            pays[i] = rule_from_config({**spec.get("payment", {}), **ov["payment"]})
        if "utility" in ov:
            behs[i] = behavior_from_config({**spec.get("utility", {}), **ov["utility"]}, reference_price=reference_price)
    return RuleBook(tuple(pays), tuple(behs))
