"""Equilibrium computations: fixed-price clearing, the fictitious default
algorithm, joint price/holdings equilibria, tâtonnement and equilibrium scans."""
from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .behavior import RuleBook, evaluate
from .market import InverseDemand
from .network import MultiLayerNetwork, build_relative_liabilities, society_inflow

log = logging.getLogger(__name__)


class ClearingError(RuntimeError):
    pass


class NonConvergence(ClearingError):
    def __init__(self, msg, residual=None, iterations=None, level=None):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations
        self.level = level


class MonotonicityViolation(ClearingError):
    """Picard iterates moved the wrong way: the rules break the monotonicity hypotheses."""


@dataclass
class SolverSettings:
    tol: float = 1e-12  # sup-norm change, relative to 1 + balance-sheet scale
    max_iter: int = 10_000
    monotone_tol: float = 1e-9
    default_tol: float = 1e-9
    cache_size: int = 65_536


@dataclass
class ClearingResult:
    holdings: np.ndarray
    prices: np.ndarray
    payments: np.ndarray
    obligations: np.ndarray
    inflow: np.ndarray
    society_holdings: np.ndarray
    defaults: tuple[int, ...]
    iterations: int
    residual: float
    selector: str
    converged: bool = True
    unique: bool = False  # every firm owes society in every asset, so greatest == least
    default_trace: list[tuple[int, ...]] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "prices": self.prices.tolist(),
            "holdings": self.holdings.tolist(),
            "payments": self.payments.tolist(),
            "defaults": list(self.defaults),
            "iterations": self.iterations,
            "residual": self.residual,
            "selector": self.selector,
            "converged": self.converged,
            "unique": self.unique,
        }


def _tail_bound(change: float, prev: float) -> float:
    """Geometric estimate of the distance left to the fixed point."""
    if change == 0.0:
        return 0.0
    rate = change / prev if prev > 0 else 1.0
    if rate >= 1.0:
        return change
    return change * rate / (1.0 - rate)


def classify_defaults(y, pbar, tol: float = 1e-9) -> tuple[int, ...]:
    short = y < pbar - tol * (1.0 + pbar)
    return tuple(int(i) for i in np.flatnonzero(short.any(axis=1)))


class ClearingSystem:
    """A network plus its rules; caches fixed-price clearings by price vector."""

    def __init__(self, net: MultiLayerNetwork, rules: RuleBook | None = None, settings: SolverSettings | None = None):
        self.net = net
        self.rules = rules if rules is not None else RuleBook()
        self.settings = settings or SolverSettings()
        self.rel = build_relative_liabilities(net)
        self.scale = float(max(net.x.max(initial=0.0), self.rel.pbar.max(initial=0.0)))
        self.abs_tol = self.settings.tol * (1.0 + self.scale)
        self.unique = net.has_societal_sink()
        self._cache: OrderedDict = OrderedDict()

    @property
    def pbar(self) -> np.ndarray:
        return self.rel.pbar

    def _evaluate(self, y, q):
        return evaluate(self.rules, self.net, self.rel, y, q)

    def _result(self, p, q, iterations, selector, converged=True, trace=None) -> ClearingResult:
        inflow, _, y = self._evaluate(p, q)
        _, _, y2 = self._evaluate(y, q)
        residual = float(np.max(np.abs(y2 - y), initial=0.0))
        return ClearingResult(
            holdings=y,
            prices=np.asarray(q, dtype=float).copy(),
            payments=np.minimum(self.pbar, y),
            obligations=self.pbar,
            inflow=inflow,
            society_holdings=society_inflow(self.rel, y),
            defaults=classify_defaults(y, self.pbar, self.settings.default_tol),
            iterations=iterations,
            residual=residual,
            selector=selector,
            converged=converged,
            unique=self.unique,
            default_trace=list(trace or []),
        )

    def holdings(self, q, direction: str = "greatest") -> ClearingResult:
        """Greatest or least fixed point of the clearing mechanism at price ``q``.

        Iterates on realized payments ``pbar ∧ y`` (the only way holdings enter
        the mechanism) from ``pbar`` downward or from ``0`` upward.
        """
        q = np.asarray(q, dtype=float)
        if np.any(q <= 0):
            raise ValueError("prices must be strictly positive")
        if direction not in ("greatest", "least"):
            raise ValueError(f"direction must be 'greatest' or 'least', got {direction!r}")
        key = (direction, q.tobytes())
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]

        s = self.settings
        pbar = self.pbar
        p = pbar.copy() if direction == "greatest" else np.zeros_like(pbar)
        sign = -1.0 if direction == "greatest" else 1.0
        mono = s.monotone_tol * (1.0 + self.scale)
        change = prev = np.inf
        it = 0
        for it in range(1, s.max_iter + 1):
            _, _, Y = self._evaluate(p, q)
            p_new = np.minimum(pbar, Y)
            step = p_new - p
            if np.any(sign * step < -mono):
                raise MonotonicityViolation(
                    f"{direction} iteration moved against its direction by {np.max(-sign * step):.3g} at iteration {it}"
                )
            change = float(np.max(np.abs(step), initial=0.0))
            p = p_new
            if change < self.abs_tol and _tail_bound(change, prev) < self.abs_tol:
                break
            prev = change
        else:
            raise NonConvergence(
                f"{direction} clearing did not converge in {s.max_iter} iterations (last change {change:.3g})",
                residual=change,
                iterations=s.max_iter,
            )
        res = self._result(p, q, it, direction)
        self._cache[key] = res
        if len(self._cache) > s.cache_size:
            self._cache.popitem(last=False)
        return res

    def net_trades(self, q) -> np.ndarray:
        """Net units sold by the firms at their clearing holdings, ``Σ_i (inflow_i - y_i)``."""
        res = self.holdings(q, "greatest")
        return (res.inflow - res.holdings).sum(axis=0)

    def price_response(self, F: InverseDemand, gamma0, q) -> np.ndarray:
        """``F(gamma0 + net_trades(q))``."""
        return F(np.asarray(gamma0, dtype=float) + self.net_trades(q))

    def fictitious_default(self, q) -> ClearingResult:
        """Default cascade from full payment; returns the greatest clearing holdings.

        ``default_trace`` lists the insolvent set at each round; ``iterations``
        counts the rounds that needed an inner fixed-point solve.
        """
        q = np.asarray(q, dtype=float)
        s = self.settings
        pbar = self.pbar
        n = self.net.n
        inner_tol = self.abs_tol
        p = pbar.copy()
        D_prev: tuple[int, ...] = ()
        trace: list[tuple[int, ...]] = []
        alpha = 0
        while True:
            alpha += 1
            inflow, _, _ = self._evaluate(p, q)
            equity = (inflow - pbar) @ q
            D = tuple(int(i) for i in np.flatnonzero(equity < -s.default_tol * (1.0 + pbar @ q)))
            if not set(D_prev) <= set(D):
                raise MonotonicityViolation(f"default set shrank from {D_prev} to {D} at round {alpha}")
            trace.append(D)
            if D == D_prev:
                break
            if alpha > n + 1:
                raise ClearingError(f"default cascade exceeded {n} rounds")
            mask = np.zeros(n, dtype=bool)
            mask[list(D)] = True
            p_hat = pbar.copy()
            for it in range(1, s.max_iter + 1):
                _, P, _ = self._evaluate(p_hat, q)
                new = np.where(mask[:, None], P, pbar)
                change = float(np.max(np.abs(new - p_hat), initial=0.0))
                p_hat = new
                if change < inner_tol:
                    break
            else:
                raise NonConvergence(
                    f"inner fixed point at level {alpha} did not converge", residual=change, iterations=it, level=alpha
                )
            p = p_hat
            D_prev = D
        return self._result(p, q, alpha - 1, "greatest", trace=trace)


def clearing_holdings(net, rules=None, q=None, direction: str = "greatest", settings=None) -> ClearingResult:
    system = net if isinstance(net, ClearingSystem) else ClearingSystem(net, rules, settings)
    if q is None:
        q = np.ones(system.net.m)
    return system.holdings(q, direction)


def fictitious_default(net, rules=None, q=None, settings=None) -> ClearingResult:
    system = net if isinstance(net, ClearingSystem) else ClearingSystem(net, rules, settings)
    if q is None:
        q = np.ones(system.net.m)
    return system.fictitious_default(q)


def _check_shock(F: InverseDemand, gamma0):
    gamma0 = np.asarray(gamma0, dtype=float)
    if gamma0.shape != (F.m,):
        raise ValueError(f"shock must have length {F.m}")
    q0 = F(gamma0)
    if np.any(q0 < F.lower - 1e-12) or np.any(q0 > F.upper + 1e-12):
        raise ValueError("F(gamma0) outside the price bounds")
    return gamma0, q0


def price_equilibrium(
    system: ClearingSystem,
    F: InverseDemand,
    gamma0=None,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 5_000,
) -> ClearingResult:
    """Damped Picard iteration on prices ``q <- (1-θ) q + θ F(gamma0 + net_trades(q))``."""
    gamma0, q = _check_shock(F, np.zeros(F.m) if gamma0 is None else gamma0)
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    gap = np.inf
    for it in range(1, max_iter + 1):
        target = system.price_response(F, gamma0, q)
        gap = float(np.max(np.abs(target - q)))
        if gap < tol:
            break
        q = np.clip((1 - damping) * q + damping * target, F.lower, F.upper)
    else:
        raise NonConvergence(f"price iteration did not converge (gap {gap:.3g}); try tatonnement", residual=gap)
    res = system.holdings(q, "greatest")
    res.residual = max(res.residual, gap)
    res.iterations = it
    res.selector = "greatest" if not system.unique else "unique"
    return res


@dataclass
class TatonnementTrace:
    times: np.ndarray
    prices: np.ndarray  # (steps + 1, m)
    terminal: np.ndarray
    converged: bool
    step: float  # final step size after any halving
    initial_step: float
    max_steps: int
    residual: float  # |F(gamma0 + net_trades(q*)) - q*| at the terminal point
    halvings: int

    def to_csv_rows(self):
        for t, q in zip(self.times, self.prices):
            yield [repr(float(t))] + [repr(float(v)) for v in q]


def tatonnement(
    system: ClearingSystem,
    F: InverseDemand,
    gamma0=None,
    step: float = 0.1,
    max_steps: int = 200_000,
    tol: float = 1e-10,
) -> TatonnementTrace:
    """Explicit Euler on ``dq = (F(gamma0 + net_trades(q)) - q) dt`` from ``q0 = F(gamma0)``.

    The step is halved whenever the residual flips direction on two
    consecutive steps; the run stops once the update falls below ``tol``.
    """
    if not 0 < step <= 1:
        raise ValueError("step must lie in (0, 1]")
    gamma0, q = _check_shock(F, np.zeros(F.m) if gamma0 is None else gamma0)
    h = step
    t = 0.0
    times = [0.0]
    path = [q.copy()]
    prev_r = None
    flips = 0
    halvings = 0
    converged = False
    r = np.zeros_like(q)
    for _ in range(max_steps):
        r = system.price_response(F, gamma0, q) - q
        if prev_r is not None and float(r @ prev_r) < 0:
            flips += 1
            if flips >= 2:
                h *= 0.5
                halvings += 1
                flips = 0
        else:
            flips = 0
        prev_r = r
        update = h * r
        if float(np.max(np.abs(update))) < tol:
            converged = True
            break
        q = np.clip(q + update, F.lower, F.upper)
        t += h
        times.append(t)
        path.append(q.copy())
    residual = float(np.max(np.abs(system.price_response(F, gamma0, q) - q)))
    if not converged:
        log.warning("tatonnement stopped after %d steps without converging (residual %.3g)", max_steps, residual)
    return TatonnementTrace(
        times=np.asarray(times),
        prices=np.asarray(path),
        terminal=q,
        converged=converged,
        step=h,
        initial_step=step,
        max_steps=max_steps,
        residual=residual,
        halvings=halvings,
    )


@dataclass
class EquilibriumSet:
    """Roots of the price residual on a scanned interval, plus detected jump points."""

    prices: list[np.ndarray]
    jumps: list[np.ndarray]
    grid: np.ndarray
    residuals: np.ndarray

    def __len__(self):
        return len(self.prices)

    def __iter__(self):
        return iter(self.prices)

    def second_prices(self) -> np.ndarray:
        return np.array([q[1] for q in self.prices])


def equilibrium_set_scan(
    system: ClearingSystem,
    F: InverseDemand,
    gamma0=None,
    grid_n: int = 2000,
    xtol: float = 1e-10,
    dedupe: float = 1e-8,
    root_tol: float = 1e-6,
) -> EquilibriumSet:
    """All clearing prices for two assets, scanning the second asset's price range.

    Sign changes of ``r(q2) = F_2(gamma0 + net_trades(1, q2)) - q2`` on the grid
    are refined by bisection; near-tangent pairs of roots inside one grid cell
    are split by locating the residual's extremum.  Brackets whose midpoint
    residual stays above ``root_tol`` are discontinuities, reported as jumps.
    Roots closer together than the extremum search can resolve may be missed.
    """
    if system.net.m != 2 or F.m != 2:
        raise ValueError("equilibrium_set_scan supports exactly two assets")
    if F.lower[0] != F.upper[0]:
        raise ValueError("asset 0 must be a fixed-price numéraire")
    gamma0, _ = _check_shock(F, np.zeros(2) if gamma0 is None else gamma0)
    q1 = float(F.lower[0])
    lo, hi = float(F.lower[1]), float(F.upper[1])

    def resid(q2: float) -> float:
        q = np.array([q1, q2])
        return float(system.price_response(F, gamma0, q)[1] - q2)

    if lo == hi:
        grid = np.array([lo])
    else:
        grid = np.linspace(lo, hi, grid_n)
    r = np.array([resid(g) for g in grid])

    found: list[float] = []
    jumps: list[float] = []

    def bisect(a, b, ra):
        while b - a > xtol:
            mid = 0.5 * (a + b)
            rm = resid(mid)
            if rm == 0:
                return mid
            if np.sign(rm) == np.sign(ra):
                a, ra = mid, rm
            else:
                b = mid
        return 0.5 * (a + b)

    def settle(x):
        if abs(resid(x)) <= root_tol:
            found.append(x)
        else:
            jumps.append(x)

    for i, g in enumerate(grid):
        if r[i] == 0:
            found.append(float(g))
    for i in range(len(grid) - 1):
        a, b = r[i], r[i + 1]
        if a != 0 and b != 0 and np.sign(a) != np.sign(b):
            settle(bisect(grid[i], grid[i + 1], a))
    # pairs of roots hiding inside a single cell
    for i in range(1, len(grid) - 1):
        ra, rb, rc = r[i - 1], r[i], r[i + 1]
        if 0 in (ra, rb, rc) or not (np.sign(ra) == np.sign(rb) == np.sign(rc)):
            continue
        if not (abs(rb) <= abs(ra) and abs(rb) <= abs(rc)):
            continue
        if abs(rb) > 2.0 * max(abs(rc - rb), abs(rb - ra)):
            continue
        sgn = np.sign(rb)
        opt = minimize_scalar(lambda t: sgn * resid(t), bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                              options={"xatol": 1e-13})
        xm, rm = float(opt.x), resid(float(opt.x))
        if rm == 0:
            found.append(xm)
        elif np.sign(rm) != sgn:
            settle(bisect(grid[i - 1], xm, ra))
            settle(bisect(xm, grid[i + 1], rm))

    roots = _dedupe(sorted(found), dedupe)
    return EquilibriumSet(
        prices=[np.array([q1, v]) for v in roots],
        jumps=[np.array([q1, v]) for v in _dedupe(sorted(jumps), dedupe)],
        grid=grid,
        residuals=r,
    )


def _dedupe(vals, tol):
    out: list[float] = []
    for v in vals:
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


def diagnostics(result: ClearingResult, x) -> dict:
    """Per-firm mark-to-market equity, default flags and the aggregate wealth check.

    Positive equity summed over firms, plus what society received, must equal
    the endowments' value.
    """
    q = result.prices
    y, pbar = result.holdings, result.obligations
    equity = (y - pbar) @ q
    lhs = float(np.sum(np.maximum(y - pbar, 0.0) @ q) + result.society_holdings @ q)
    rhs = float(np.sum(np.asarray(x) @ q))
    return {
        "equity": equity,
        "defaulted": np.isin(np.arange(len(y)), result.defaults),
        "defaults": list(result.defaults),
        "wealth_positive_equity": lhs,
        "wealth_endowment": rhs,
        "wealth_gap": lhs - rhs,
    }
