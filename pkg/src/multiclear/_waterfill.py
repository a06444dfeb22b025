"""Row-wise solver for ``sum_k q_k clip(c_k - lam * s_k, lo_k, hi_k) = w`` over ``lam >= 0``.

Both the payment problem (box + budget, diagonal quadratic objective) and the
minimal-trading projection reduce to this one-parameter search.  The map
``lam -> budget(lam)`` is piecewise linear and nonincreasing, so the root is
located exactly by evaluating it at every breakpoint and interpolating.
"""
from __future__ import annotations

import numpy as np


def clipped_level(c, slope, lo, hi, q, w):
    """Return ``(x, lam)`` with ``x = clip(c - lam*slope, lo, hi)`` spending at most ``w``.

    All array arguments are ``(b, m)`` except ``q`` (``(m,)``) and ``w`` (``(b,)``).
    ``lam = 0`` whenever ``clip(c, lo, hi)`` already fits the budget.  Requires
    ``q·lo <= w`` row-wise and ``slope > 0``.
    """
    c, slope, lo, hi = (np.asarray(a, dtype=float) for a in (c, slope, lo, hi))
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)

    def spend(lam):
        # lam: (b, K) -> (b, K)
        xk = np.clip(c[:, None, :] - lam[:, :, None] * slope[:, None, :], lo[:, None, :], hi[:, None, :])
        return xk @ q

    with np.errstate(invalid="ignore"):
        bp = np.concatenate([(c - hi) / slope, (c - lo) / slope], axis=1)
    bp = np.where(np.isfinite(bp), bp, 0.0)
    bp = np.concatenate([np.zeros((c.shape[0], 1)), np.maximum(bp, 0.0)], axis=1)
    bp.sort(axis=1)
    G = spend(bp)  # nonincreasing along axis 1

    rows = np.arange(c.shape[0])
    # last breakpoint still at or above budget
    j = np.sum(G >= w[:, None], axis=1) - 1
    j = np.clip(j, 0, bp.shape[1] - 1)
    nxt = np.minimum(j + 1, bp.shape[1] - 1)
    g0, g1 = G[rows, j], G[rows, nxt]
    l0, l1 = bp[rows, j], bp[rows, nxt]
    drop = g0 - g1
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(drop > 0, (g0 - w) / drop, 0.0)
    lam = np.where(G[:, 0] <= w, 0.0, l0 + np.clip(frac, 0.0, 1.0) * (l1 - l0))

    x = np.clip(c - lam[:, None] * slope, lo, hi)
    active = lam > 0
    if np.any(active):
        x[active] = _polish(x[active], slope[active], lo[active], hi[active], q, w[active])
    return x, lam


def _polish(x, slope, lo, hi, q, w):
    """Push the rounding residual of ``q·x = w`` onto coordinates strictly inside their bounds."""
    free = (x > lo) & (x < hi)
    n_free = free.sum(axis=1)
    resid = w - x @ q
    single = n_free == 1
    if np.any(single):
        r = np.flatnonzero(single)
        k = np.argmax(free[r], axis=1)
        others = np.where(free[r], 0.0, x[r]) @ q
        x[r, k] = np.clip((w[r] - others) / q[k], lo[r, k], hi[r, k])
    multi = n_free > 1
    if np.any(multi):
        r = np.flatnonzero(multi)
        wts = np.where(free[r], slope[r], 0.0)
        denom = wts @ q
        x[r] = np.clip(x[r] + wts * (resid[r] / denom)[:, None], lo[r], hi[r])
    return x
