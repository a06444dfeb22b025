"""Network files, aggregate CSV import and result serialization."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema
import numpy as np

from .network import MultiLayerNetwork

SCHEMA_VERSION = 1

NETWORK_SCHEMA = {
    "type": "object",
    "required": ["n", "m", "L", "x"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"type": "integer", "const": SCHEMA_VERSION},
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 1},
        "L": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "array", "items": {"type": "number", "minimum": 0}}},
        },
        "x": {"type": "array", "items": {"type": "array", "items": {"type": "number", "minimum": 0}}},
        "names": {"type": "array", "items": {"type": "string"}},
    },
}


class NetworkFormatError(ValueError):
    pass


def network_from_dict(doc: dict) -> MultiLayerNetwork:
    try:
        jsonschema.validate(doc, NETWORK_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise NetworkFormatError(f"{where}: {exc.message}") from None
    n, m = doc["n"], doc["m"]
    try:
        L = np.array(doc["L"], dtype=float)
        x = np.array(doc["x"], dtype=float)
    except ValueError as exc:  # ragged nesting
        raise NetworkFormatError(f"ragged array: {exc}") from None
    if L.shape != (n, n + 1, m):
        raise NetworkFormatError(f"L: expected shape {(n, n + 1, m)} (society column first), got {L.shape}")
    if x.shape != (n, m):
        raise NetworkFormatError(f"x: expected shape {(n, m)}, got {x.shape}")
    try:
        return MultiLayerNetwork(L, x)
    except ValueError as exc:
        raise NetworkFormatError(str(exc)) from None


def network_to_dict(net: MultiLayerNetwork) -> dict:
    return {"schema_version": SCHEMA_VERSION, "n": net.n, "m": net.m, "L": net.L.tolist(), "x": net.x.tolist()}


def load_network(path) -> MultiLayerNetwork:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return network_from_dict(doc)


def save_network(net: MultiLayerNetwork, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1))


AGGREGATE_COLUMNS = ("total_assets", "capital", "interbank_liabilities")


def load_aggregates(path):
    """CSV with header ``total_assets,capital,interbank_liabilities`` (an optional ``name`` column is kept)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise NetworkFormatError(f"{path}: no rows")
    missing = [c for c in AGGREGATE_COLUMNS if c not in rows[0]]
    if missing:
        raise NetworkFormatError(f"{path}: missing columns {missing}")
    out = {}
    for col in AGGREGATE_COLUMNS:
        try:
            out[col] = np.array([float(r[col]) for r in rows])
        except ValueError as exc:
            raise NetworkFormatError(f"{path}: column {col}: {exc}") from None
    out["names"] = [r.get("name") or str(i) for i, r in enumerate(rows)]
    return out


def load_matrix(path) -> np.ndarray:
    """Square numeric CSV without header."""
    mat = np.loadtxt(path, delimiter=",", ndmin=2)
    if mat.shape[0] != mat.shape[1]:
        raise NetworkFormatError(f"{path}: liabilities matrix must be square, got {mat.shape}")
    return mat


def load_vector(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=1).ravel()


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
