"""Command line entry point: ``multiclear {validate,clear,sweep,scan,grexit} CONFIG``.

Exit codes: 0 success, 1 config error, 2 at least one solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .clearing import ClearingError, equilibrium_set_scan
from .scenarios import (
    SCHEMA_VERSION,
    ConfigError,
    Scenario,
    SweepResult,
    emit_plot_data,
    load_config,
    run_grexit_config,
    run_scenario,
    write_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    print(f"wrote {out / name}")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=io._jsonable)


def _cmd_validate(cfg, args) -> int:
    print(f"# config hash {cfg.config_hash()}")
    print(cfg.dump(), end="")
    return EXIT_OK


def _cmd_clear(cfg, args) -> int:
    scen = Scenario.build(cfg)
    gamma0 = scen.F.shock_for_price(np.asarray(args.q0, dtype=float)) if args.q0 else scen.shocks()[0]
    rec = scen.run_point(0, gamma0)
    tr = scen.trace(gamma0) if rec["error"] is None else None
    prefix = cfg.effective["output"]["prefix"]
    if args.format == "json":
        doc = {"schema_version": SCHEMA_VERSION, "config_hash": cfg.config_hash(), **rec}
        if rec["error"] is None:
            doc["clearing"] = scen.system.holdings(np.asarray(rec["q_star"])).to_record()
        _emit(_json(doc), args.out, f"{prefix}_clear.json")
    else:
        _emit(emit_plot_data(tr, "trace"), args.out, f"{prefix}_trace.csv")
    return EXIT_OK if rec["error"] is None and rec["converged"] else EXIT_PARTIAL


def _cmd_sweep(cfg, args, scan=False) -> int:
    if scan:
        cfg.effective["sweep"]["scan"] = True
    result = run_scenario(cfg, write=False)
    prefix = cfg.effective["output"]["prefix"]
    if args.out is not None:
        paths = write_sweep(result, cfg.with_overrides(out=args.out))
        if scan:
            emit_plot_data(result, "equilibrium_set", args.out / f"{prefix}_equilibrium_set.csv")
        emit_plot_data(result, "price_curve", args.out / f"{prefix}_price_curve.csv")
        for p in paths.values():
            print(f"wrote {p}")
    elif args.format == "json":
        print(_json(result.summary()))
    else:
        kind = "equilibrium_set" if scan else "price_curve"
        sys.stdout.write(emit_plot_data(result, kind))
    if result.failures:
        print(f"{result.failures} of {len(result.records)} sweep points failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_scan(cfg, args) -> int:
    if args.q0 is None:
        return _cmd_sweep(cfg, args, scan=True)
    scen = Scenario.build(cfg)
    gamma0 = scen.F.shock_for_price(np.asarray(args.q0, dtype=float))
    es = equilibrium_set_scan(scen.system, scen.F, gamma0, grid_n=cfg.effective["solver"]["grid_n"])
    doc = {
        "schema_version": SCHEMA_VERSION,
        "q0": list(args.q0),
        "equilibria": [q.tolist() for q in es.prices],
        "jumps": [q.tolist() for q in es.jumps],
    }
    _emit(_json(doc), args.out, f"{cfg.effective['output']['prefix']}_scan.json")
    return EXIT_OK


def _cmd_grexit(cfg, args) -> int:
    rep = run_grexit_config(cfg)
    prefix = cfg.effective["output"]["prefix"]
    if args.format == "json" or args.out is not None:
        _emit(_json(rep.to_dict()), args.out, f"{prefix}_grexit.json")
    if args.format == "csv" or args.out is not None:
        _emit(emit_plot_data(rep, "impact_sweep"), args.out, f"{prefix}_impact_sweep.csv")
    failed = (not rep.converged) or any(not e["converged"] for e in rep.impact_sweep)
    return EXIT_PARTIAL if failed else EXIT_OK


COMMANDS = {
    "validate": (_cmd_validate, "parse the config and print the effective config"),
    "clear": (_cmd_clear, "tatonnement and clearing at one initial price"),
    "sweep": (_cmd_sweep, "attained price at every sweep point"),
    "scan": (_cmd_scan, "full equilibrium set at one price or every sweep point"),
    "grexit": (_cmd_grexit, "calibrate, split currencies and clear (needs a 'grexit' section)"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="multiclear", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", type=Path)
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if name in ("clear", "scan"):
            p.add_argument("--q0", type=float, nargs="+", default=None, help="initial price vector")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed)
    except ConfigError as exc:
        for msg in exc.messages:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    handler = COMMANDS[args.command][0]
    try:
        return handler(cfg, args)
    except (ConfigError, io.NetworkFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ClearingError, ValueError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
