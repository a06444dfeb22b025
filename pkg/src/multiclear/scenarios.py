"""Scenario configs, shock sweeps, the two-currency exit pipeline and plot-data emission.

A scenario is one YAML (or JSON) document::

    schema_version: 1
    seed: 7
    network: {source: random, n_firms: 20, link_prob: 0.25, m: 2}
    inverse_demand: {family: arctan_symmetric, amplitude: 3, offset: 2, impact: 1}
    rules:
      payment: {payment_rule: surplus}
      utility: {utility: min_trading}
      overrides: {3: {utility: {utility: value_max}}}
    sweep: {q0_2: {start: 0.25, stop: 1.0, num: 16}, scan: false}
    solver: {tol: 1.0e-12, step: 0.1, workers: 1}
    output: {dir: out, prefix: run}

Every omitted field is filled from ``DEFAULTS``; the filled document is the
"effective config" and its hash identifies the run.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io as _io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import io
from .behavior import MinTrading, RuleBook, rulebook_from_config
from .clearing import (
    ClearingError,
    ClearingSystem,
    SolverSettings,
    TatonnementTrace,
    equilibrium_set_scan,
    fictitious_default,
    tatonnement,
)
from .market import InverseDemand, arctan_symmetric, from_config as market_from_config
from .network import MultiLayerNetwork, calibrate_from_aggregates, random_network, split_two_currency
from .payment_rules import PriorityProportional

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "network": {"source": "random"},
    "inverse_demand": {"family": "arctan_symmetric"},
    "rules": {"payment": {"payment_rule": "surplus"}, "utility": {"utility": "min_trading"}, "overrides": {}},
    "sweep": {"scan": False},
    "solver": {
        "tol": 1e-12,
        "max_iter": 10_000,
        "step": 0.1,
        "max_steps": 200_000,
        "tatonnement_tol": 1e-10,
        "grid_n": 2000,
        "workers": 1,
    },
    "output": {"dir": None, "prefix": "scenario"},
}

NETWORK_DEFAULTS = {
    "random": {
        "n_firms": 20,
        "link_prob": 0.25,
        "link_size": 1.0,
        "society_obligation": 1.0,
        "endowment_range": [0.0, 20.0],
        "m": 2,
    },
    "file": {},
    "example": {"name": "two_bank"},
    "calibration": {"exposures": None, "home_set": None},
}

_number = {"type": "number"}
_vec = {"type": "array", "items": _number, "minItems": 1}
_grid = {
    "oneOf": [
        {"type": "array", "items": _number, "minItems": 1},
        {
            "type": "object",
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
            "properties": {"start": _number, "stop": _number, "num": {"type": "integer", "minimum": 1}},
        },
    ]
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["network", "inverse_demand"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "network": {
            "type": "object",
            "required": ["source"],
            "properties": {
                "source": {"enum": ["random", "file", "example", "calibration"]},
                "n_firms": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "link_prob": {"type": "number", "minimum": 0, "maximum": 1},
                "link_size": {"type": "number", "minimum": 0},
                "society_obligation": {"type": "number", "minimum": 0},
                "endowment_range": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                "path": {"type": "string"},
                "name": {"enum": ["two_bank"]},
                "aggregates": {"type": "string"},
                "liabilities": {"type": "string"},
                "exposures": {"type": ["string", "array", "null"]},
                "home_set": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 0}},
            },
        },
        "inverse_demand": {"type": "object", "required": ["family"]},
        "rules": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "payment": {"type": "object"},
                "utility": {"type": "object"},
                "overrides": {"type": ["object", "null"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "q0_2": _grid,
                "q0": {"type": "array", "items": _vec, "minItems": 1},
                "gamma0": {"type": "array", "items": _vec, "minItems": 1},
                "scan": {"type": "boolean"},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "step": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "max_steps": {"type": "integer", "minimum": 1},
                "tatonnement_tol": {"type": "number", "exclusiveMinimum": 0},
                "grid_n": {"type": "integer", "minimum": 2},
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": ["string", "null"]}, "prefix": {"type": "string"}},
        },
        "grexit": {
            "type": "object",
            "additionalProperties": False,
            "required": ["aggregates", "liabilities", "exposures", "home_set"],
            "properties": {
                "aggregates": {"type": "string"},
                "liabilities": {"type": "string"},
                "exposures": {"type": ["string", "array"]},
                "home_set": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "impact": {"type": "number", "minimum": 0},
                "impact_grid": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid scenario config; ``messages`` holds one line per problem."""

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("\n".join(self.messages))


# --- config parsing -------------------------------------------------------


def _line_index(text: str) -> dict:
    """Map key paths of a YAML/JSON document to 1-based line numbers."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines: dict = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, path + (k.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    if root is not None:
        walk(root, ())
    return lines


def _where(lines: dict, source: str, path) -> str:
    path = tuple(path)
    key = tuple(str(p) if not isinstance(p, int) else p for p in path)
    while key and key not in lines:
        key = key[:-1]
    line = lines.get(key)
    loc = "/".join(str(p) for p in path) or "<root>"
    return f"{source}:{line}: {loc}" if line else f"{source}: {loc}"


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _grid_values(spec) -> list[float]:
    if isinstance(spec, dict):
        return np.linspace(spec["start"], spec["stop"], spec["num"]).tolist()
    return [float(v) for v in spec]


@dataclass
class ScenarioConfig:
    """A validated, fully defaulted scenario."""

    effective: dict
    base_dir: Path = field(default_factory=Path.cwd)
    source: str = "<config>"

    @property
    def seed(self) -> int:
        return int(self.effective["seed"])

    def config_hash(self) -> str:
        """Hash of everything that affects results; the output location is left out."""
        eff = copy.deepcopy(self.effective)
        eff["output"].pop("dir", None)
        canon = json.dumps(eff, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def with_overrides(self, seed=None, out=None) -> "ScenarioConfig":
        eff = copy.deepcopy(self.effective)
        if seed is not None:
            eff["seed"] = int(seed)
        if out is not None:
            eff["output"]["dir"] = str(out)
        return ScenarioConfig(eff, self.base_dir, self.source)

    def dump(self) -> str:
        return yaml.safe_dump(self.effective, sort_keys=True)


def parse_config(text: str, source: str = "<config>", base_dir=None) -> ScenarioConfig:
    """Parse and validate a YAML/JSON scenario document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"{mark.line + 1}" if mark is not None else "?"
        raise ConfigError([f"{source}:{line}: malformed document: {getattr(exc, 'problem', exc)}"]) from None
    if not isinstance(doc, dict):
        raise ConfigError([f"{source}:1: top level must be a mapping"])
    lines = _line_index(text)
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError([f"{_where(lines, source, e.absolute_path)}: {e.message}" for e in errors])

    eff = _merge(DEFAULTS, doc)
    src = eff["network"]["source"]
    eff["network"] = _merge(NETWORK_DEFAULTS[src], eff["network"])
    cfg = ScenarioConfig(eff, Path(base_dir) if base_dir is not None else Path.cwd(), source)
    _check_semantics(cfg, lines)
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from None
    return parse_config(text, str(path), path.parent)


def _check_semantics(cfg: ScenarioConfig, lines: dict) -> None:
    eff, msgs = cfg.effective, []

    def err(path, msg):
        msgs.append(f"{_where(lines, cfg.source, path)}: {msg}")

    net = eff["network"]
    needed = {"file": ["path"], "calibration": ["aggregates", "liabilities"]}.get(net["source"], [])
    for key in needed:
        if key not in net:
            err(("network",), f"source {net['source']!r} requires '{key}'")
        elif not cfg.resolve(net[key]).exists():
            err(("network", key), f"file not found: {net[key]}")
    if net["source"] == "calibration" and isinstance(net.get("exposures"), str):
        if not cfg.resolve(net["exposures"]).exists():
            err(("network", "exposures"), f"file not found: {net['exposures']}")
    if net["source"] == "random":
        lo, hi = net["endowment_range"]
        if not 0 <= lo <= hi:
            err(("network", "endowment_range"), "need 0 <= low <= high")

    F = None
    try:
        F = market_from_config(eff["inverse_demand"])
    except (KeyError, TypeError, ValueError) as exc:
        err(("inverse_demand",), f"invalid inverse demand: {exc}")

    try:
        overrides = eff["rules"].get("overrides") or {}
        n_check = 1 + max((int(k) for k in overrides), default=0)
        rulebook_from_config(eff["rules"], n=n_check, reference_price=[1.0])
    except (KeyError, TypeError, ValueError) as exc:
        err(("rules",), f"invalid rules: {exc}")

    sweep = eff["sweep"]
    kinds = [k for k in ("q0_2", "q0", "gamma0") if k in sweep]
    if len(kinds) > 1:
        err(("sweep",), f"give only one of q0_2, q0, gamma0 (got {kinds})")
    if F is not None:
        if "q0_2" in sweep and F.m != 2:
            err(("sweep", "q0_2"), "q0_2 sweeps need a two-asset inverse demand")
        for i, q0 in enumerate(_sweep_prices(sweep, F)):
            if np.any(q0 < F.lower - 1e-12) or np.any(q0 > F.upper + 1e-12):
                path = ("sweep", "q0", i) if "q0" in sweep else ("sweep", "q0_2")
                err(path, f"initial price {q0.tolist()} outside [{F.lower.tolist()}, {F.upper.tolist()}]")
        if "gamma0" in sweep:
            for i, g in enumerate(sweep["gamma0"]):
                if len(g) != F.m:
                    err(("sweep", "gamma0", i), f"shock needs {F.m} entries")

    g = eff.get("grexit")
    if g:
        for key in ("aggregates", "liabilities") + (("exposures",) if isinstance(g["exposures"], str) else ()):
            if not cfg.resolve(g[key]).exists():
                err(("grexit", key), f"file not found: {g[key]}")
    if msgs:
        raise ConfigError(msgs)


def _sweep_prices(sweep: dict, F: InverseDemand) -> list[np.ndarray]:
    if "q0_2" in sweep:
        if F.m != 2:
            return []
        return [np.array([float(F.lower[0]), v]) for v in _grid_values(sweep["q0_2"])]
    if "q0" in sweep:
        return [np.asarray(v, dtype=float) for v in sweep["q0"]]
    return []


# --- scenario assembly ----------------------------------------------------


def two_bank_network() -> MultiLayerNetwork:
    """Two firms and two assets: each holds 2 units of the asset the other is owed 1 unit in."""
    L = np.zeros((2, 3, 2))
    L[0, 2, 0] = 1.0
    L[1, 1, 1] = 1.0
    x = np.array([[0.0, 2.0], [2.0, 0.0]])
    return MultiLayerNetwork(L, x)


def build_network(cfg: ScenarioConfig) -> MultiLayerNetwork:
    spec = cfg.effective["network"]
    src = spec["source"]
    if src == "random":
        return random_network(
            n_firms=spec["n_firms"],
            seed=cfg.seed,
            link_prob=spec["link_prob"],
            link_size=spec["link_size"],
            society_obligation=spec["society_obligation"],
            endowment_range=tuple(spec["endowment_range"]),
            m=spec["m"],
        )
    if src == "file":
        return io.load_network(cfg.resolve(spec["path"]))
    if src == "example":
        return two_bank_network()
    agg = io.load_aggregates(cfg.resolve(spec["aggregates"]))
    L = io.load_matrix(cfg.resolve(spec["liabilities"]))
    base = calibrate_from_aggregates(agg["total_assets"], agg["capital"], agg["interbank_liabilities"], L)
    if spec.get("home_set") is None:
        return base
    return split_two_currency(base, _exposures(cfg, spec["exposures"], base.n), spec["home_set"])


def _exposures(cfg, spec, n):
    if spec is None:
        return np.zeros(n)
    if isinstance(spec, str):
        return io.load_vector(cfg.resolve(spec))
    return np.asarray(spec, dtype=float)


@dataclass
class Scenario:
    """Everything needed to evaluate one sweep point."""

    config: ScenarioConfig
    net: MultiLayerNetwork
    F: InverseDemand
    rules: RuleBook
    system: ClearingSystem

    @classmethod
    def build(cls, cfg: ScenarioConfig) -> "Scenario":
        eff = cfg.effective
        net = build_network(cfg)
        F = market_from_config(eff["inverse_demand"])
        if F.m != net.m:
            raise ConfigError([f"{cfg.source}: inverse demand has {F.m} assets but the network has {net.m}"])
        rules = rulebook_from_config(eff["rules"], net.n, reference_price=F.unshocked())
        s = eff["solver"]
        settings = SolverSettings(tol=s["tol"], max_iter=s["max_iter"])
        return cls(cfg, net, F, rules, ClearingSystem(net, rules, settings))

    def shocks(self) -> list[np.ndarray]:
        sweep = self.config.effective["sweep"]
        if "gamma0" in sweep:
            return [np.asarray(g, dtype=float) for g in sweep["gamma0"]]
        prices = _sweep_prices(sweep, self.F)
        if not prices:
            return [np.zeros(self.F.m)]
        return [self.F.shock_for_price(q0) for q0 in prices]

    def trace(self, gamma0) -> TatonnementTrace:
        s = self.config.effective["solver"]
        return tatonnement(self.system, self.F, gamma0, step=s["step"], max_steps=s["max_steps"],
                           tol=s["tatonnement_tol"])

    def run_point(self, index: int, gamma0) -> dict:
        eff = self.config.effective
        gamma0 = np.asarray(gamma0, dtype=float)
        rec = {
            "index": index,
            "gamma0": gamma0.tolist(),
            "q0": self.F(gamma0).tolist(),
            "q_star": None,
            "converged": False,
            "residual": None,
            "defaults": [],
            "equilibria": None,
            "jumps": None,
            "error": None,
        }
        try:
            tr = self.trace(gamma0)
            rec["q_star"] = tr.terminal.tolist()
            rec["converged"] = bool(tr.converged)
            rec["residual"] = tr.residual
            rec["steps"] = len(tr.times) - 1
            rec["defaults"] = list(self.system.holdings(tr.terminal).defaults)
            if eff["sweep"]["scan"]:
                es = equilibrium_set_scan(self.system, self.F, gamma0, grid_n=eff["solver"]["grid_n"])
                rec["equilibria"] = es.second_prices().tolist()
                rec["jumps"] = [float(j[1]) for j in es.jumps]
        except (ClearingError, ValueError, ArithmeticError) as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
            log.warning("sweep point %d failed: %s", index, rec["error"])
        return rec


# worker-process state; one scenario per process, never shared
_WORKER: Scenario | None = None


def _init_worker(effective: dict, base_dir: str, source: str) -> None:
    global _WORKER
    _WORKER = Scenario.build(ScenarioConfig(effective, Path(base_dir), source))


def _worker_point(args):
    index, gamma0 = args
    return _WORKER.run_point(index, gamma0)


@dataclass
class SweepResult:
    records: list[dict]
    metadata: dict

    @property
    def failures(self) -> int:
        return sum(1 for r in self.records if r["error"] is not None or not r["converged"])

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "metadata": self.metadata,
            "n_points": len(self.records),
            "n_failed": self.failures,
            "records": self.records,
        }

    def csv_rows(self) -> tuple[list[str], list[list]]:
        m = self.metadata.get("m", 0)
        header = (
            ["schema_version", "index"]
            + [f"gamma0_{k + 1}" for k in range(m)]
            + [f"q0_{k + 1}" for k in range(m)]
            + [f"q_star_{k + 1}" for k in range(m)]
            + ["converged", "residual", "n_defaults", "defaults", "n_equilibria", "equilibria", "error"]
        )
        rows = []
        for r in self.records:
            qs = r["q_star"] or [None] * m
            eq = r["equilibria"]
            rows.append(
                [SCHEMA_VERSION, r["index"]]
                + [_fmt(v) for v in r["gamma0"]]
                + [_fmt(v) for v in r["q0"]]
                + [_fmt(v) for v in qs]
                + [
                    int(r["converged"]),
                    _fmt(r["residual"]),
                    len(r["defaults"]),
                    ";".join(map(str, r["defaults"])),
                    "" if eq is None else len(eq),
                    "" if eq is None else ";".join(_fmt(v) for v in eq),
                    r["error"] or "",
                ]
            )
        return header, rows


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def run_scenario(cfg: ScenarioConfig, write: bool = True) -> SweepResult:
    """Tâtonnement (and optionally the full equilibrium set) at every sweep point.

    Solver failures are recorded per point and the sweep continues.  Output is
    ordered by sweep index regardless of the number of workers.
    """
    scen = Scenario.build(cfg)
    shocks = scen.shocks()
    workers = int(cfg.effective["solver"]["workers"])
    if workers > 1 and len(shocks) > 1:
        with ProcessPoolExecutor(
            max_workers=min(workers, len(shocks)),
            initializer=_init_worker,
            initargs=(cfg.effective, str(cfg.base_dir), cfg.source),
        ) as pool:
            records = list(pool.map(_worker_point, list(enumerate(shocks))))
    else:
        records = [scen.run_point(i, g) for i, g in enumerate(shocks)]
    meta = {
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "n_firms": scen.net.n,
        "m": scen.net.m,
    }
    result = SweepResult(records, meta)
    if write and cfg.effective["output"]["dir"]:
        write_sweep(result, cfg)
    return result


def write_sweep(result: SweepResult, cfg: ScenarioConfig) -> dict:
    out = Path(cfg.effective["output"]["dir"])
    if not out.is_absolute():
        out = Path.cwd() / out
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg.effective["output"]["prefix"]
    paths = {
        "csv": out / f"{prefix}_sweep.csv",
        "summary": out / f"{prefix}_summary.json",
        "config": out / f"{prefix}_effective_config.yaml",
    }
    header, rows = result.csv_rows()
    io.write_csv(paths["csv"], header, rows)
    io.dump_json(result.summary(), paths["summary"])
    paths["config"].write_text(cfg.dump())
    return paths


# --- two-currency exit ----------------------------------------------------


@dataclass
class GrexitReport:
    network: MultiLayerNetwork
    home_set: tuple[int, ...]
    impact: float
    baseline_defaults: tuple[int, ...]
    q_star: np.ndarray
    converged: bool
    residual: float
    defaults: tuple[int, ...]
    priority_orders: dict
    impact_sweep: list[dict]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "home_set": list(self.home_set),
            "impact": self.impact,
            "baseline_defaults": list(self.baseline_defaults),
            "q_star": self.q_star.tolist(),
            "converged": self.converged,
            "residual": self.residual,
            "defaults": list(self.defaults),
            "priority_orders": {str(k): list(v) for k, v in self.priority_orders.items()},
            "impact_sweep": self.impact_sweep,
        }


def grexit_rules(n: int, home_set) -> RuleBook:
    """Priority on both assets; home firms pay the home currency (asset 1) first, others asset 0."""
    home = set(int(i) for i in home_set)
    pays = tuple(PriorityProportional(2, order=(1, 0) if i in home else (0, 1)) for i in range(n))
    return RuleBook(pays, MinTrading())


def grexit_demand(b: float, amplitude: float = 4.0, offset: float = 3.0) -> InverseDemand:
    return arctan_symmetric(amplitude, offset, b)


def _grexit_point(net, rules, b, settings, step, max_steps, tol):
    F = grexit_demand(b)
    system = ClearingSystem(net, rules, settings)
    tr = tatonnement(system, F, np.zeros(2), step=step, max_steps=max_steps, tol=tol)
    res = system.holdings(tr.terminal)
    return tr, res


def run_grexit(
    total_assets,
    capital,
    interbank_liabilities,
    L,
    exposures,
    home_set,
    impact: float = 1e-4,
    impact_grid=None,
    settings: SolverSettings | None = None,
    step: float = 0.1,
    max_steps: int = 200_000,
    tol: float = 1e-10,
) -> GrexitReport:
    """Calibrate, split into (common, home) currencies and clear from the unshocked price."""
    settings = settings or SolverSettings()
    base = calibrate_from_aggregates(total_assets, capital, interbank_liabilities, L)
    baseline = fictitious_default(base, RuleBook(), np.ones(1), settings)
    net = split_two_currency(base, exposures, home_set)
    rules = grexit_rules(net.n, home_set)
    tr, res = _grexit_point(net, rules, impact, settings, step, max_steps, tol)

    sweep = []
    for b in ([] if impact_grid is None else impact_grid):
        try:
            t_b, r_b = _grexit_point(net, rules, float(b), settings, step, max_steps, tol)
            sweep.append({"b": float(b), "q_star_2": float(t_b.terminal[1]), "n_defaults": len(r_b.defaults),
                          "defaults": list(r_b.defaults), "converged": bool(t_b.converged)})
        except (ClearingError, ValueError) as exc:
            sweep.append({"b": float(b), "q_star_2": None, "n_defaults": None, "defaults": None,
                          "converged": False, "error": f"{type(exc).__name__}: {exc}"})
    return GrexitReport(
        network=net,
        home_set=tuple(int(i) for i in home_set),
        impact=float(impact),
        baseline_defaults=baseline.defaults,
        q_star=tr.terminal,
        converged=bool(tr.converged),
        residual=tr.residual,
        defaults=res.defaults,
        priority_orders={i: r.order for i, r in enumerate(rules.payment)},
        impact_sweep=sweep,
    )


def run_grexit_config(cfg: ScenarioConfig) -> GrexitReport:
    g = cfg.effective.get("grexit")
    if not g:
        raise ConfigError([f"{cfg.source}: no 'grexit' section"])
    agg = io.load_aggregates(cfg.resolve(g["aggregates"]))
    L = io.load_matrix(cfg.resolve(g["liabilities"]))
    s = cfg.effective["solver"]
    return run_grexit(
        agg["total_assets"],
        agg["capital"],
        agg["interbank_liabilities"],
        L,
        _exposures(cfg, g["exposures"], len(agg["total_assets"])),
        g["home_set"],
        impact=g.get("impact", 1e-4),
        impact_grid=g.get("impact_grid"),
        settings=SolverSettings(tol=s["tol"], max_iter=s["max_iter"]),
        step=s["step"],
        max_steps=s["max_steps"],
        tol=s["tatonnement_tol"],
    )


# --- plot data ------------------------------------------------------------

PLOT_COLUMNS = {
    "price_curve": ["q0_2", "q_star_2", "branch_count"],
    "equilibrium_set": ["q0_2", "q_eq_2", "attained"],
    "trace": ["t"],
    "impact_sweep": ["b", "q_star_2", "n_defaults"],
}

ATTAINED_TOL = 1e-6


def emit_plot_data(results, kind: str, path=None) -> str:
    """Tidy CSV for external plotting; returns the text and writes it when ``path`` is given.

    price_curve      q0_2, q_star_2, branch_count (blank when no scan was run)
    equilibrium_set  one row per equilibrium: q0_2, q_eq_2, attained (1 if it is the tâtonnement limit)
    trace            t, q_1 .. q_m
    impact_sweep     b, q_star_2, n_defaults
    """
    if kind not in PLOT_COLUMNS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {sorted(PLOT_COLUMNS)}")
    header = list(PLOT_COLUMNS[kind])
    rows: list[list] = []
    if kind in ("price_curve", "equilibrium_set"):
        records = results.records if isinstance(results, SweepResult) else list(results or [])
        for r in records:
            if r.get("q_star") is None:
                continue
            q0, qs, eq = r["q0"][1], r["q_star"][1], r.get("equilibria")
            if kind == "price_curve":
                rows.append([_fmt(q0), _fmt(qs), "" if eq is None else len(eq)])
            else:
                for v in eq or []:
                    rows.append([_fmt(q0), _fmt(v), int(abs(v - qs) <= ATTAINED_TOL)])
    elif kind == "trace":
        if results is not None and len(getattr(results, "prices", [])):
            header += [f"q_{k + 1}" for k in range(results.prices.shape[1])]
            rows = list(results.to_csv_rows())
    else:
        entries = results.impact_sweep if isinstance(results, GrexitReport) else list(results or [])
        for e in entries:
            rows.append([_fmt(e["b"]), _fmt(e["q_star_2"]), "" if e["n_defaults"] is None else e["n_defaults"]])

    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        Path(path).write_text(text)
    return text
