"""Landmark, basis and result file formats.

Landmark files are JSON documents::

    {"dimension": 3, "k": 4, "names": ["a", "b", "c", "d"], "units": "mm",
     "points": [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]}

``points`` holds one row per landmark. A basis file is ``{"shapes": [...]}``
with one landmark document per entry (optionally carrying a ``"label"``).
Plain CSV is accepted for 2D point lists.
"""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class LandmarkFormatError(ValueError):
    """A landmark document failed to parse; the message names the location."""


@dataclass
class LandmarkFile:
    dimension: int
    points: np.ndarray  # k x dimension
    names: list = None
    units: str = ""
    label: str = None
    source: str = field(default="<memory>", repr=False)

    @property
    def k(self):
        return len(self.points)

    @property
    def matrix(self):
        """Landmarks as columns (dimension x k)."""
        return np.asarray(self.points, dtype=float).T.copy()

    @classmethod
    def from_matrix(cls, X, names=None, units="", label=None):
        X = np.asarray(X, dtype=float)
        return cls(X.shape[0], X.T.copy(), names, units, label)

    def to_dict(self):
        d = {"dimension": self.dimension, "k": self.k}
        if self.label is not None:
            d["label"] = self.label
        if self.names is not None:
            d["names"] = list(self.names)
        d["units"] = self.units
        d["points"] = [[float(v) for v in row] for row in self.points]
        return d


def _fail(source, where, msg):
    raise LandmarkFormatError(f"{source}: {where}: {msg}")


def landmarks_from_dict(d, source="<memory>", where="$"):
    if not isinstance(d, dict):
        _fail(source, where, "expected an object")
    if "points" not in d:
        _fail(source, where, "missing field 'points'")
    pts = d["points"]
    if not isinstance(pts, list) or not pts:
        _fail(source, f"{where}.points", "expected a nonempty list of rows")
    dim = d.get("dimension", len(pts[0]) if isinstance(pts[0], list) else None)
    if dim not in (2, 3):
        _fail(source, f"{where}.dimension", f"must be 2 or 3, got {dim!r}")
    rows = []
    for i, row in enumerate(pts):
        if not isinstance(row, list) or len(row) != dim:
            _fail(source, f"{where}.points[{i}]", f"expected {dim} numbers")
        vals = []
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                _fail(source, f"{where}.points[{i}][{j}]", f"not a finite number: {v!r}")
            vals.append(float(v))
        rows.append(vals)
    k = d.get("k", len(rows))
    if k != len(rows):
        _fail(source, f"{where}.k", f"declares {k} landmarks but points has {len(rows)} rows")
    names = d.get("names")
    if names is not None:
        if (not isinstance(names, list) or len(names) != len(rows)
                or not all(isinstance(n, str) for n in names)):
            _fail(source, f"{where}.names", f"expected {len(rows)} strings")
        if len(set(names)) != len(names):
            _fail(source, f"{where}.names", "names must be unique")
    units = d.get("units", "")
    if not isinstance(units, str):
        _fail(source, f"{where}.units", "expected a string")
    return LandmarkFile(dim, np.array(rows), names, units, d.get("label"), source)


def _load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise LandmarkFormatError(f"{path}: cannot read: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise LandmarkFormatError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def read_landmarks(path, names=None) -> LandmarkFile:
    """Read a JSON landmark file, or a 2D CSV point list (``.csv``)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv_points(path, names)
    return landmarks_from_dict(_load_json(path), str(path))


def read_csv_points(path, names=None) -> LandmarkFile:
    """Read ``x,y`` rows; a non-numeric first row is taken as a header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise LandmarkFormatError(f"{path}: line {lineno}: non-numeric value") from None
            if len(vals) != 2 or not all(math.isfinite(v) for v in vals):
                raise LandmarkFormatError(f"{path}: line {lineno}: expected two finite numbers")
            rows.append(vals)
    if not rows:
        raise LandmarkFormatError(f"{path}: no points")
    if names is not None and len(names) != len(rows):
        raise LandmarkFormatError(
            f"{path}: {len(names)} names supplied for {len(rows)} points")
    return LandmarkFile(2, np.array(rows), names, "", None, str(path))


def read_basis(path) -> list:
    """Read a basis file; all entries must be 3D and agree on k and names."""
    d = _load_json(path)
    if isinstance(d, dict) and "shapes" in d:
        entries = d["shapes"]
    elif isinstance(d, list):
        entries = d
    else:
        raise LandmarkFormatError(f"{path}: $: expected an object with 'shapes'")
    if not isinstance(entries, list) or not entries:
        raise LandmarkFormatError(f"{path}: $.shapes: expected a nonempty list")
    shapes = [landmarks_from_dict(e, str(path), f"$.shapes[{i}]") for i, e in enumerate(entries)]
    check_consistent(shapes, str(path))
    return shapes


def check_consistent(shapes, source):
    first = shapes[0]
    for i, s in enumerate(shapes):
        if s.dimension != 3:
            raise LandmarkFormatError(f"{source}: $.shapes[{i}].dimension: basis shapes must be 3D")
        if s.k != first.k:
            raise LandmarkFormatError(
                f"{source}: $.shapes[{i}].k: has {s.k} landmarks, expected {first.k}")
        if s.names != first.names:
            raise LandmarkFormatError(f"{source}: $.shapes[{i}].names: name order differs")


def read_directory(path) -> list:
    """All 3D landmark documents in a directory (``*.json``, sorted by name)."""
    path = Path(path)
    if not path.is_dir():
        raise LandmarkFormatError(f"{path}: not a directory")
    shapes = []
    for f in sorted(path.glob("*.json")):
        d = _load_json(f)
        if isinstance(d, dict) and "shapes" in d:
            shapes.extend(read_basis(f))
        else:
            shapes.append(landmarks_from_dict(d, str(f)))
    if not shapes:
        raise LandmarkFormatError(f"{path}: no landmark files")
    check_consistent(shapes, str(path))
    return shapes


def atomic_write(path, text):
    """Write ``text`` to a temporary file next to ``path``, then rename it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=2) + "\n")


def write_landmarks(path, lm: LandmarkFile):
    write_json(path, lm.to_dict())


def write_basis(path, shapes):
    write_json(path, {"shapes": [s.to_dict() for s in shapes]})


def format_float(x):
    return "nan" if x != x else repr(float(x))


def csv_text(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"
