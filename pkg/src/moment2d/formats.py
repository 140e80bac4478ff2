"""JSON (UTF-8) serialization of tables and measures.

Entries are listed explicitly; an index absent from the file is missing,
never an implicit zero.  Floats are written with ``repr`` precision so every
file reads back to an equal value.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import (AtomicMeasure, BoxSpec, ComplexMomentTable, ExtIndex, ExtMomentTable,
                   MissingMoment, MomentTable2D, enumerate_box)


class FormatError(ValueError):
    """Malformed input file; the message names the offending location."""


KINDS = ("moments2d", "complex", "extended", "measure", "measures")


def _num(rec, key, where, integer=False):
    if key not in rec:
        raise FormatError(f"{where}: missing field '{key}'")
    v = rec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError(f"{where}: field '{key}' must be a number")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise FormatError(f"{where}: field '{key}' must be an integer")
        return int(v)
    return float(v)


def _pair_table_to_json(t: MomentTable2D, kind: str) -> dict:
    return {
        "kind": kind,
        "degree": t.degree,
        "rectangular": t.rectangular,
        "entries": [{"m": m, "n": n, "re": t[(m, n)].real, "im": t[(m, n)].imag} for m, n in t.keys()],
    }


def _pair_table_from_json(d: dict, cls):
    degree = _num(d, "degree", "top level", integer=True)
    rect = bool(d.get("rectangular", False))
    ents = d.get("entries")
    if not isinstance(ents, list):
        raise FormatError("top level: 'entries' must be a list")
    out = {}
    for i, rec in enumerate(ents):
        where = f"entries[{i}]"
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: expected an object")
        key = (_num(rec, "m", where, True), _num(rec, "n", where, True))
        if key in out:
            raise FormatError(f"{where}: duplicate entry {key}")
        out[key] = complex(_num(rec, "re", where), _num(rec, "im", where))
    try:
        return cls(degree, out, rect)
    except MissingMoment as exc:
        raise FormatError(f"entries: missing moment {exc.index}") from None
    except ValueError as exc:
        raise FormatError(f"entries: {exc}") from None


def _ext_to_json(u: ExtMomentTable) -> dict:
    b = u.box
    ents = []
    for idx in enumerate_box(b):
        v = u[idx]
        ents.append({"m": idx.m, "k": idx.k, "l": idx.l, "n": idx.n, "r": idx.r, "t": idx.t,
                     "re": v.real, "im": v.imag})
    return {"kind": "extended", "box": {"m_max": b.m_max, "n_max": b.n_max, "k_abs_max": b.k_abs_max},
            "entries": ents}


def _ext_from_json(d: dict) -> ExtMomentTable:
    bd = d.get("box")
    if not isinstance(bd, dict):
        raise FormatError("top level: 'box' must be an object")
    try:
        box = BoxSpec(_num(bd, "m_max", "box", True), _num(bd, "n_max", "box", True),
                      _num(bd, "k_abs_max", "box", True))
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"box: {exc}") from None
    ents = d.get("entries")
    if not isinstance(ents, list):
        raise FormatError("top level: 'entries' must be a list")
    out = {}
    for i, rec in enumerate(ents):
        where = f"entries[{i}]"
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: expected an object")
        idx = ExtIndex(*(_num(rec, f, where, True) for f in ("m", "k", "l", "n", "r", "t")))
        if idx in out:
            raise FormatError(f"{where}: duplicate entry {idx}")
        out[idx] = complex(_num(rec, "re", where), _num(rec, "im", where))
    try:
        return ExtMomentTable.from_entries(box, out)
    except MissingMoment as exc:
        raise FormatError(f"entries: missing moment {exc.index}") from None
    except ValueError as exc:
        raise FormatError(f"entries: {exc}") from None


def _measure_to_json(mu: AtomicMeasure) -> dict:
    return {"kind": "measure", "atoms": [{"x1": a, "x2": b, "w": w} for a, b, w in mu.sorted().atoms]}


def _measure_from_json(d: dict, where="top level") -> AtomicMeasure:
    atoms = d.get("atoms")
    if not isinstance(atoms, list):
        raise FormatError(f"{where}: 'atoms' must be a list")
    out = []
    for i, rec in enumerate(atoms):
        w = f"{where}.atoms[{i}]"
        if not isinstance(rec, dict):
            raise FormatError(f"{w}: expected an object")
        out.append((_num(rec, "x1", w), _num(rec, "x2", w), _num(rec, "w", w)))
    try:
        return AtomicMeasure(tuple(out))
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def to_json(obj) -> dict:
    if isinstance(obj, ComplexMomentTable):
        return _pair_table_to_json(obj, "complex")
    if isinstance(obj, MomentTable2D):
        return _pair_table_to_json(obj, "moments2d")
    if isinstance(obj, ExtMomentTable):
        return _ext_to_json(obj)
    if isinstance(obj, AtomicMeasure):
        return _measure_to_json(obj)
    if isinstance(obj, (list, tuple)) and all(isinstance(m, AtomicMeasure) for m in obj):
        return {"kind": "measures", "measures": [_measure_to_json(m) for m in obj]}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_json(d, kind: str | None = None):
    if not isinstance(d, dict):
        raise FormatError("top level: expected a JSON object")
    kind = d.get("kind", kind)
    if kind is None:
        if "box" in d:
            kind = "extended"
        elif "atoms" in d:
            kind = "measure"
        elif "measures" in d:
            kind = "measures"
        elif "degree" in d:
            kind = "moments2d"
        else:
            raise FormatError("top level: cannot tell the file kind")
    if kind == "moments2d":
        return _pair_table_from_json(d, MomentTable2D)
    if kind == "complex":
        return _pair_table_from_json(d, ComplexMomentTable)
    if kind == "extended":
        return _ext_from_json(d)
    if kind == "measure":
        return _measure_from_json(d)
    if kind == "measures":
        ms = d.get("measures")
        if not isinstance(ms, list):
            raise FormatError("top level: 'measures' must be a list")
        return [_measure_from_json(m, f"measures[{i}]") if isinstance(m, dict) else
                _raise(f"measures[{i}]: expected an object") for i, m in enumerate(ms)]
    raise FormatError(f"top level: unknown kind {kind!r}")


def _raise(msg):
    raise FormatError(msg)


def dumps(obj) -> str:
    return json.dumps(to_json(obj) if not isinstance(obj, dict) else obj, sort_keys=True, indent=1,
                      default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, ExtIndex):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def loads(text: str, kind: str | None = None):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_json(d, kind)


def write(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read(path, kind: str | None = None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not UTF-8 ({exc.reason})") from None
    return loads(text, kind)
