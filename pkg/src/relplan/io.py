"""Readers and writers for the on-disk formats.

Every writer emits deterministic text (sorted keys, ``repr`` floats) so that
reruns with identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .identify import PreferenceMatrix
from .plan import RequirementSet
from .resample import DichotomizedGaussianModel
from .vdg import Quality, ValueDependencyGraph


class DataError(ValueError):
    """Malformed input file; the message names the offending row/column."""


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if any(cell.strip() for cell in row)]
    if not rows:
        raise DataError(f"{path}: empty file")
    return rows


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue())


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


# preferences ------------------------------------------------------------------


def read_preferences(path) -> tuple[PreferenceMatrix, list[str], list[str]]:
    """Returns the matrix, the requirement names and the user ids."""
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "user_id":
        raise DataError(f"{path}: row 1: header must start with 'user_id'")
    names = header[1:]
    if not names:
        raise DataError(f"{path}: row 1: no requirement columns")
    users, cells = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r}: expected {len(header)} fields, got {len(row)}")
        vals = []
        for c, cell in enumerate(row[1:], start=2):
            cell = cell.strip()
            if cell not in ("0", "1"):
                raise DataError(f"{path}: row {r}, column {c} ({header[c - 1]}): "
                                f"expected 0 or 1, got {cell!r}")
            vals.append(int(cell))
        users.append(row[0].strip())
        cells.append(vals)
    if not cells:
        raise DataError(f"{path}: no user rows")
    return PreferenceMatrix(np.array(cells)), names, users


def write_preferences(path, prefs: PreferenceMatrix, names=None, users=None) -> None:
    names = names or [f"r{i + 1}" for i in range(prefs.n)]
    users = users or [str(u + 1) for u in range(prefs.users)]
    write_csv(path, ["user_id", *names],
               ([u, *map(int, row)] for u, row in zip(users, prefs.cells)))


def read_intrinsic(path) -> list[tuple[int, int, str]]:
    rows = _read_rows(path)
    if [h.strip() for h in rows[0]] != ["from", "to", "kind"]:
        raise DataError(f"{path}: row 1: header must be 'from,to,kind'")
    out = []
    for r, row in enumerate(rows[1:], start=2):
        try:
            out.append((int(row[0]), int(row[1]), row[2].strip()))
        except (ValueError, IndexError):
            raise DataError(f"{path}: row {r}: expected integer from/to and a kind") from None
    return out


# requirements -----------------------------------------------------------------


def read_requirements(path) -> RequirementSet:
    rows = _read_rows(path)
    if [h.strip() for h in rows[0]] != ["id", "cost", "value"]:
        raise DataError(f"{path}: row 1: header must be 'id,cost,value'")
    ids, cost, value = [], [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise DataError(f"{path}: row {r}: expected 3 fields, got {len(row)}")
        try:
            c, v = float(row[1]), float(row[2])
        except ValueError:
            raise DataError(f"{path}: row {r}: cost and value must be numbers") from None
        if c < 0 or v < 0 or not np.isfinite(c) or not np.isfinite(v):
            raise DataError(f"{path}: row {r}: cost and value must be finite and non-negative")
        ids.append(row[0].strip())
        cost.append(c)
        value.append(v)
    return RequirementSet(np.array(cost), np.array(value), tuple(ids))


def write_requirements(path, reqs: RequirementSet) -> None:
    write_csv(path, ["id", "cost", "value"],
               ([i, repr(float(c)), repr(float(v))] for i, c, v in zip(reqs.ids, reqs.cost, reqs.value)))


# graphs and influence ---------------------------------------------------------


def vdg_to_json(g: ValueDependencyGraph) -> dict:
    return {"n": g.n,
            "edges": [{"from": i, "to": j, "quality": q.value, "strength": s}
                      for i, j, q, s in g.edge_list()]}


def vdg_from_json(doc: dict) -> ValueDependencyGraph:
    try:
        n = int(doc["n"])
        edges = [(int(e["from"]), int(e["to"]), Quality.parse(e["quality"]), float(e["strength"]))
                 for e in doc.get("edges", [])]
        return ValueDependencyGraph.from_edges(n, edges)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid VDG document: {exc}") from None


def write_vdg(path, g: ValueDependencyGraph) -> None:
    write_json(path, vdg_to_json(g))


def read_vdg(path) -> ValueDependencyGraph:
    return vdg_from_json(read_json(path))


def write_matrix(path, matrix, names=None) -> None:
    matrix = np.asarray(matrix, dtype=float)
    names = names or [f"r{i + 1}" for i in range(matrix.shape[0])]
    write_csv(path, ["id", *names],
               ([names[i], *(repr(float(v)) for v in row)] for i, row in enumerate(matrix)))


def read_matrix(path) -> tuple[np.ndarray, list[str]]:
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "id":
        raise DataError(f"{path}: row 1: header must start with 'id'")
    names = header[1:]
    data = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(x) for x in row[1:]])
        except ValueError:
            raise DataError(f"{path}: row {r}: non-numeric entry") from None
    m = np.array(data, dtype=float).reshape(len(data), len(names))
    if m.shape[0] != m.shape[1]:
        raise DataError(f"{path}: matrix is {m.shape[0]}x{m.shape[1]}, expected square")
    return m, names


# resampling model -------------------------------------------------------------


def write_model(path, model: DichotomizedGaussianModel) -> None:
    write_json(path, model.to_json())


def read_model(path) -> DichotomizedGaussianModel:
    return DichotomizedGaussianModel.from_json(read_json(path))
