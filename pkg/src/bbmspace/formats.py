"""File formats: grids, oscillation curves, atoms, functionals and distance reports.

Every writer goes through a temporary file in the target directory followed
by ``os.replace``, so a failed run never leaves a partial artifact behind.
Floats are written with ``repr``, the shortest string that reads back to the
same double.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .atoms import Atom, AtomicFunctional
from .distance import DistanceReport
from .errors import ArgumentError, ShapeError
from .grid import Cube, GridFunction
from .oscillation import CubeFamily, OscillationCurve

GRID_DTYPE = "f64"
GRID_LAYOUT = "row-major"


def _atomic_write(path, data, mode="w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ArgumentError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{path}: invalid JSON ({exc})") from None


# --- grids ------------------------------------------------------------------

def grid_header(f: GridFunction) -> dict:
    return {"d": f.d, "n": f.n, "dtype": GRID_DTYPE, "layout": GRID_LAYOUT}


def write_grid(path, f: GridFunction, binary: bool = False, meta: dict | None = None) -> None:
    """Write ``f`` as a JSON header with inline CSV values or a ``.bin`` sidecar."""
    path = Path(path)
    doc = grid_header(f)
    if binary:
        side = path.with_name(path.name + ".bin")
        _atomic_write(side, f.flat.astype("<f8").tobytes(), "wb")
        doc["data"] = side.name
    else:
        doc["values"] = ",".join(repr(float(v)) for v in f.flat)
    if meta:
        doc["meta"] = meta
    _atomic_write(path, _dump(doc))


def read_grid(path, with_meta: bool = False):
    path = Path(path)
    doc = _load_json(path)
    try:
        d, n = int(doc["d"]), int(doc["n"])
    except (KeyError, TypeError, ValueError):
        raise ShapeError(f"{path}: grid header needs integer d and n") from None
    if doc.get("dtype", GRID_DTYPE) != GRID_DTYPE or doc.get("layout", GRID_LAYOUT) != GRID_LAYOUT:
        raise ShapeError(f"{path}: only dtype {GRID_DTYPE!r} with layout {GRID_LAYOUT!r} is supported")
    if "values" in doc:
        text = doc["values"].strip()
        flat = np.array([float(x) for x in text.split(",")] if text else [], dtype=np.float64)
    elif "data" in doc:
        side = path.parent / doc["data"]
        try:
            flat = np.fromfile(side, dtype="<f8").astype(np.float64)
        except FileNotFoundError:
            raise ArgumentError(f"{path}: missing binary payload {side}") from None
    else:
        raise ShapeError(f"{path}: grid file has neither 'values' nor 'data'")
    f = GridFunction.from_flat(d, n, flat)
    return (f, doc.get("meta", {})) if with_meta else f


# --- families and curves ----------------------------------------------------

def family_to_json(F: CubeFamily) -> dict:
    return {"epsilon": F.side, "constrained": F.constrained, "cubes": F.anchors()}


def family_from_json(doc: dict) -> CubeFamily:
    side = float(doc["epsilon"])
    cubes = tuple(Cube(side, tuple(a)) for a in doc["cubes"])
    return CubeFamily(side, cubes, bool(doc.get("constrained", True)))


def curve_csv(curve: OscillationCurve, config: dict | None = None) -> str:
    """CSV with columns ``epsilon, value, k, witness_anchor_list, exact``.

    The first line is ``# config=<json>``; anchors are a JSON list in one field.
    """
    buf = io.StringIO()
    buf.write("# config=" + json.dumps(config or {}, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "value", "k", "witness_anchor_list", "exact"])
    for e in curve.entries:
        w.writerow([repr(e.epsilon), repr(e.value), "" if e.k is None else e.k,
                    json.dumps(e.witness.anchors()), int(e.exact)])
    return buf.getvalue()


def write_curve(path, curve: OscillationCurve, config: dict | None = None,
                witness_path=None) -> None:
    """Write the curve CSV and, optionally, a JSON file with every witness family."""
    if witness_path is not None:
        doc = {"config": config or {}, "entries": [
            {"epsilon": e.epsilon, "m": e.m, "value": e.value, "k": e.k, "exact": e.exact,
             "witness": family_to_json(e.witness)} for e in curve.entries]}
        _atomic_write(witness_path, _dump(doc))
    _atomic_write(path, curve_csv(curve, config))


def read_curve_csv(path) -> list:
    """Rows of a curve CSV as dicts with parsed values."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for r in csv.DictReader(lines):
        rows.append({"epsilon": float(r["epsilon"]), "value": float(r["value"]),
                     "k": int(r["k"]) if r["k"] else None,
                     "witness_anchor_list": json.loads(r["witness_anchor_list"]),
                     "exact": bool(int(r["exact"]))})
    return rows


# --- atoms and functionals --------------------------------------------------

def write_atom(path, a: Atom, grid_path=None, binary: bool = False) -> None:
    """Atom JSON ``{epsilon, cubes, grid_ref}`` plus its grid file (default ``<path>.grid``)."""
    path = Path(path)
    grid_path = Path(grid_path) if grid_path is not None else path.with_name(path.stem + ".grid")
    write_grid(grid_path, a.values, binary=binary)
    ref = os.path.relpath(grid_path, path.parent)
    doc = {"epsilon": a.epsilon, "cubes": a.family.anchors(), "grid_ref": ref}
    _atomic_write(path, _dump(doc))


def read_atom(path) -> Atom:
    path = Path(path)
    doc = _load_json(path)
    try:
        side = float(doc["epsilon"])
        cubes = tuple(Cube(side, tuple(c)) for c in doc["cubes"])
        grid = read_grid(path.parent / doc["grid_ref"])
    except KeyError as exc:
        raise ArgumentError(f"{path}: atom file lacks {exc}") from None
    return Atom(CubeFamily(side, cubes), grid)


def write_functional(path, phi: AtomicFunctional, atom_paths) -> None:
    """JSON list of ``{lambda, atom_path}``; the atoms must already be written."""
    atom_paths = list(atom_paths)
    if len(atom_paths) != len(phi.terms):
        raise ArgumentError("one atom path per term is required")
    base = Path(path).parent
    doc = [{"lambda": lam, "atom_path": os.path.relpath(p, base)}
           for (lam, _), p in zip(phi.terms, atom_paths)]
    _atomic_write(path, _dump(doc))


def read_functional(path) -> AtomicFunctional:
    path = Path(path)
    doc = _load_json(path)
    if not isinstance(doc, list):
        raise ArgumentError(f"{path}: a functional is a JSON list of terms")
    try:
        terms = [(float(t["lambda"]), read_atom(path.parent / t["atom_path"])) for t in doc]
    except (KeyError, TypeError):
        raise ArgumentError(f"{path}: each term needs 'lambda' and 'atom_path'") from None
    return AtomicFunctional(tuple(terms))


# --- distance reports -------------------------------------------------------

def report_to_json(r: DistanceReport, config: dict | None = None) -> dict:
    return {
        "tail_lower": r.tail_lower,
        "upper": r.upper,
        "epsilon_cut": r.epsilon_cut,
        "t_grid": list(r.t_grid),
        "upper_by_t": {repr(t): v for t, v in r.upper_by_t.items()},
        "tolerance": r.tolerance,
        "inconsistent": r.inconsistent,
        "curve": [{"epsilon": e.epsilon, "value": e.value, "k": e.k, "exact": e.exact,
                   "witness": e.witness.anchors()} for e in r.curve.entries],
        "config": config or {},
    }


def write_json(path, doc) -> None:
    _atomic_write(path, _dump(doc))
