"""Balance-sheet data model for multi-asset interbank networks.

Liabilities are stored as an ``(n, n + 1, m)`` array ``L`` where ``L[i, j, k]``
is what firm ``i`` owes to node ``j`` in units of asset ``k``.  Column ``0`` is
the societal node (an external sink with no obligations of its own); firm
``j`` lives in column ``j + 1``.  Firms are indexed ``0 .. n-1`` everywhere
else (rows of ``x``, ``y``, ``pbar``).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

SOCIETY = 0


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MultiLayerNetwork:
    """n firms plus a societal node, obligations in m assets, endowments ``x``."""

    L: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        L = _frozen(self.L)
        x = _frozen(self.x)
        if L.ndim != 3:
            raise ValueError(f"L must be 3-dimensional (n, n+1, m), got shape {L.shape}")
        n, cols, m = L.shape
        if cols != n + 1:
            raise ValueError(f"L must have n+1={n + 1} node columns (society first), got {cols}")
        if x.shape != (n, m):
            raise ValueError(f"x must have shape {(n, m)}, got {x.shape}")
        if not (np.all(np.isfinite(L)) and np.all(np.isfinite(x))):
            raise ValueError("liabilities and endowments must be finite")
        if np.any(L < 0) or np.any(x < 0):
            raise ValueError("liabilities and endowments must be nonnegative")
        diag = L[np.arange(n), np.arange(n) + 1, :]
        if np.any(diag != 0):
            raise ValueError("a firm cannot owe itself (L[i, i+1, :] must be 0)")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def m(self) -> int:
        return self.L.shape[2]

    @property
    def interbank(self) -> np.ndarray:
        """``(n, n, m)`` firm-to-firm obligations."""
        return self.L[:, 1:, :]

    @property
    def external(self) -> np.ndarray:
        """``(n, m)`` obligations to the societal node."""
        return self.L[:, SOCIETY, :]

    def has_societal_sink(self) -> bool:
        """True when every firm owes society a positive amount in every asset."""
        return bool(np.all(self.external > 0))

    @classmethod
    def from_interbank(cls, interbank, x, external=None) -> "MultiLayerNetwork":
        """Build from an ``(n, n, m)`` interbank array and optional ``(n, m)`` external debts."""
        ib = np.asarray(interbank, dtype=float)
        if ib.ndim == 2:
            ib = ib[:, :, None]
        n, _, m = ib.shape
        ext = np.zeros((n, m)) if external is None else np.asarray(external, dtype=float).reshape(n, m)
        L = np.concatenate([ext[:, None, :], ib], axis=1)
        return cls(L, np.asarray(x, dtype=float).reshape(n, m))


@dataclass(frozen=True, eq=False)
class RelativeLiabilities:
    a: np.ndarray  # (n, n+1, m), rows sum to 1 over the node axis
    pbar: np.ndarray  # (n, m)


def build_relative_liabilities(net: MultiLayerNetwork) -> RelativeLiabilities:
    pbar = net.L.sum(axis=1)
    uniform = 1.0 / (net.n + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(pbar[:, None, :] > 0, net.L / pbar[:, None, :], uniform)
    return RelativeLiabilities(_frozen(a), _frozen(pbar))


def paid(rel: RelativeLiabilities, y) -> np.ndarray:
    """Realized payments ``pbar ∧ y``."""
    return np.minimum(rel.pbar, np.asarray(y, dtype=float))


def realized_inflow(net: MultiLayerNetwork, rel: RelativeLiabilities, y) -> np.ndarray:
    """Assets immediately available to each firm: endowment plus received payments."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("holdings must be nonnegative")
    received = np.einsum("jik,jk->ik", rel.a[:, 1:, :], paid(rel, y))
    return net.x + received


def society_inflow(rel: RelativeLiabilities, y) -> np.ndarray:
    """Units of each asset that flow to the societal node, shape ``(m,)``."""
    return np.einsum("jk,jk->k", rel.a[:, SOCIETY, :], paid(rel, y))


def random_network(
    n_firms: int = 20,
    seed=None,
    link_prob: float = 0.25,
    link_size: float = 1.0,
    society_obligation: float = 1.0,
    endowment_range: tuple[float, float] = (0.0, 20.0),
    m: int = 2,
) -> MultiLayerNetwork:
    """Erdős–Rényi style network, links drawn independently in every asset layer.

    Each firm's total endowment is drawn uniformly on ``endowment_range`` and
    split evenly across the ``m`` assets.
    """
    if not 0.0 <= link_prob <= 1.0:
        raise ValueError(f"link_prob must lie in [0, 1], got {link_prob}")
    if n_firms < 1 or m < 1:
        raise ValueError("need at least one firm and one asset")
    if link_size < 0 or society_obligation < 0:
        raise ValueError("link_size and society_obligation must be nonnegative")
    lo, hi = endowment_range
    if not 0 <= lo <= hi:
        raise ValueError(f"bad endowment_range {endowment_range}")
    rng = np.random.default_rng(seed)
    links = rng.random((m, n_firms, n_firms)) < link_prob
    ib = np.where(links, float(link_size), 0.0).transpose(1, 2, 0)
    ib[np.arange(n_firms), np.arange(n_firms), :] = 0.0
    total = rng.uniform(lo, hi, size=n_firms)
    x = np.repeat(total[:, None] / m, m, axis=1)
    ext = np.full((n_firms, m), float(society_obligation))
    return MultiLayerNetwork.from_interbank(ib, x, ext)


def split_two_currency(base: MultiLayerNetwork, exposure, home_set: Iterable[int]) -> MultiLayerNetwork:
    """Re-denominate a single-asset network into (common currency, home currency).

    Non-home firms keep ``x - exposure`` in asset 0 and hold their exposure in
    asset 1; home firms hold everything in asset 1.  Obligations from a home
    firm to another home firm or to society move to asset 1, all others stay
    in asset 0.
    """
    if base.m != 1:
        raise ValueError(f"base network must have a single asset, got m={base.m}")
    n = base.n
    home = np.zeros(n, dtype=bool)
    for i in home_set:
        if not 0 <= i < n:
            raise ValueError(f"home firm index {i} out of range")
        home[i] = True
    ge = np.nan_to_num(np.asarray(exposure, dtype=float).reshape(n), nan=0.0)
    x_en = base.x[:, 0]
    if np.any(ge[~home] < 0) or np.any(ge[~home] > x_en[~home]):
        bad = np.flatnonzero(~home & ((ge < 0) | (ge > x_en)))
        raise ValueError(f"exposure must lie in [0, endowment] for non-home firms; violated at {bad.tolist()}")
    if np.any(ge[home] != 0):
        warnings.warn("exposures given for home firms are ignored", stacklevel=2)

    x = np.empty((n, 2))
    x[:, 0] = np.where(home, 0.0, x_en - ge)
    x[:, 1] = np.where(home, x_en, ge)

    L_en = base.L[:, :, 0]
    node_home = np.concatenate([[True], home])  # society counts as a destination that moves with home debtors
    to_home = home[:, None] & node_home[None, :]
    L = np.zeros((n, n + 1, 2))
    L[:, :, 0] = np.where(to_home, 0.0, L_en)
    L[:, :, 1] = np.where(to_home, L_en, 0.0)
    return MultiLayerNetwork(L, x)


def calibrate_from_aggregates(total_assets, capital, interbank_liab, L, atol: float = 1e-9) -> MultiLayerNetwork:
    """Single-asset network from total assets, capital and an interbank matrix.

    Endowment is total assets net of interbank liabilities and whatever is not
    capital or interbank debt is owed to society, so net worth equals capital.
    """
    T = np.asarray(total_assets, dtype=float).ravel()
    c = np.asarray(capital, dtype=float).ravel()
    ib_tot = np.asarray(interbank_liab, dtype=float).ravel()
    Lm = np.asarray(L, dtype=float)
    n = T.size
    if c.size != n or ib_tot.size != n or Lm.shape != (n, n):
        raise ValueError("aggregate vectors and liabilities matrix have inconsistent sizes")
    row = Lm.sum(axis=1)
    if not np.allclose(row, ib_tot, rtol=0.0, atol=atol * (1 + np.abs(ib_tot).max(initial=0))):
        raise ValueError("row sums of L do not match the interbank liability totals")
    x = T - row
    ext = T - row - c
    scale = 1 + np.abs(T).max(initial=0)
    if np.any(x < -atol * scale):
        raise ValueError(f"negative implied endowment for firms {np.flatnonzero(x < -atol * scale).tolist()}")
    if np.any(ext < -atol * scale):
        raise ValueError(
            f"negative implied external liability for firms {np.flatnonzero(ext < -atol * scale).tolist()}"
        )
    return MultiLayerNetwork.from_interbank(Lm[:, :, None], np.maximum(x, 0)[:, None], np.maximum(ext, 0)[:, None])
