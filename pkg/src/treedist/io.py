"""JSON and CSV formats.

Every format carries version 1: JSON objects have ``"format_version": 1`` and
CSV files start with the comment line ``# format_version=1``.  Floats are
written with ``repr`` so they round-trip exactly; infinite heights and piece
ends are the string ``"inf"``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .builders import PointCloud, ScalarField1D
from .distance import EditPlan, MatchedChain
from .editable import PiecewiseMap
from .experiments import DistanceMatrix
from .trees import Dendrogram, TreeStructure

FORMAT_VERSION = 1
CSV_HEADER = f"# format_version={FORMAT_VERSION}"


class SchemaError(ValueError):
    """Input does not match a documented format; the message names the field."""


# -- numbers --------------------------------------------------------------


def _num_out(x: float):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _num_in(x: Any, where: str) -> float:
    if isinstance(x, str) and x in ("inf", "-inf"):
        return float(x)
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {x!r}")
    return float(x)


def _vector(x: Any, k: int | None, where: str) -> list[float]:
    if not isinstance(x, list):
        x = [x]
    vals = [_num_in(v, f"{where}[{i}]") for i, v in enumerate(x)]
    if k is not None and len(vals) != k:
        raise SchemaError(f"{where}: expected {k} channel values, got {len(vals)}")
    return vals


def _get(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    if key not in obj:
        raise SchemaError(f"{where}.{key}: missing")
    return obj[key]


# -- piecewise maps -------------------------------------------------------


def map_to_json(m: PiecewiseMap) -> dict:
    pieces = []
    for p in m.pieces:
        item = {"start": _num_out(p.start), "end": _num_out(p.end)}
        item["kind"] = p.kind
        if p.kind == "const":
            item["value"] = [float(v) for v in p.intercept]
        else:
            item["intercept"] = [float(v) for v in p.intercept]
            item["slope"] = [float(v) for v in p.slope]
        pieces.append(item)
    return {"channels": m.channels, "pieces": pieces}


def map_from_json(obj: Any, where: str = "weight") -> PiecewiseMap:
    k = _get(obj, "channels", where)
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise SchemaError(f"{where}.channels: expected a positive integer")
    raw = _get(obj, "pieces", where)
    if not isinstance(raw, list):
        raise SchemaError(f"{where}.pieces: expected a list")
    pieces = []
    for i, p in enumerate(raw):
        at = f"{where}.pieces[{i}]"
        start = _num_in(_get(p, "start", at), f"{at}.start")
        end = _num_in(_get(p, "end", at), f"{at}.end")
        kind = p.get("kind", "const") if isinstance(p, dict) else None
        if kind == "const":
            icpt = _vector(_get(p, "value", at), k, f"{at}.value")
            slope = [0.0] * k
        elif kind == "affine":
            icpt = _vector(_get(p, "intercept", at), k, f"{at}.intercept")
            slope = _vector(_get(p, "slope", at), k, f"{at}.slope")
        else:
            raise SchemaError(f"{at}.kind: expected 'const' or 'affine', got {kind!r}")
        pieces.append((start, end, icpt, slope))
    try:
        return PiecewiseMap.from_pieces(k, pieces)
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


# -- dendrograms ----------------------------------------------------------


def dendrogram_to_json(d: Dendrogram) -> dict:
    vertices = []
    for v in d.structure.vertices:
        h = None
        if d.heights is not None:
            h = _num_out(d.height(v))
        vertices.append({"id": v, "height": h})
    edges = [
        {"child": c, "parent": p, "weight": map_to_json(d.weights[c])}
        for c, p in sorted(d.parent.items())
    ]
    return {
        "format_version": FORMAT_VERSION,
        "root": d.root,
        "channels": d.channels,
        "vertices": vertices,
        "edges": edges,
    }


def _check_version(obj: Any, where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    v = obj.get("format_version", FORMAT_VERSION)
    if v != FORMAT_VERSION:
        raise SchemaError(f"{where}.format_version: unsupported version {v!r}")


def dendrogram_from_json(obj: Any, where: str = "dendrogram") -> Dendrogram:
    _check_version(obj, where)
    root = _get(obj, "root", where)
    if not isinstance(root, str):
        raise SchemaError(f"{where}.root: expected a string id")
    raw_vertices = obj.get("vertices")
    ids = {root}
    heights: dict[str, float] | None = None
    if raw_vertices is not None:
        if not isinstance(raw_vertices, list):
            raise SchemaError(f"{where}.vertices: expected a list")
        hs = {}
        for i, item in enumerate(raw_vertices):
            vid = _get(item, "id", f"{where}.vertices[{i}]")
            ids.add(vid)
            h = item.get("height")
            if h is not None:
                hs[vid] = _num_in(h, f"{where}.vertices[{i}].height")
        if hs:
            if set(hs) != {v["id"] for v in raw_vertices}:
                raise SchemaError(f"{where}.vertices: heights must be given for all vertices or none")
            heights = hs
    raw_edges = _get(obj, "edges", where)
    if not isinstance(raw_edges, list):
        raise SchemaError(f"{where}.edges: expected a list")
    parent, weights = {}, {}
    for i, e in enumerate(raw_edges):
        at = f"{where}.edges[{i}]"
        c = _get(e, "child", at)
        p = _get(e, "parent", at)
        if raw_vertices is not None:
            for role, v in (("child", c), ("parent", p)):
                if v not in ids:
                    raise SchemaError(f"{at}.{role}: edge {c!r}->{p!r} references missing vertex {v!r}")
        if c in parent:
            raise SchemaError(f"{at}.child: vertex {c!r} has two parent edges")
        parent[c] = p
        weights[c] = map_from_json(_get(e, "weight", at), f"{at}.weight")
    channels = obj.get("channels", 0)
    try:
        return Dendrogram(TreeStructure(root, parent), weights, heights, channels)
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


# -- edit plans -----------------------------------------------------------


def plan_to_json(plan: EditPlan) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "deleted_a": sorted(plan.deleted_a),
        "deleted_b": sorted(plan.deleted_b),
        "matched_chains": [
            {
                "a_top": c.a_top,
                "a_bottom": c.a_bottom,
                "b_top": c.b_top,
                "b_bottom": c.b_bottom,
                "shrink_cost": c.shrink_cost,
            }
            for c in plan.matching
        ],
        "total_cost": plan.total_cost,
    }


def plan_from_json(obj: Any, where: str = "plan") -> EditPlan:
    _check_version(obj, where)
    chains = []
    for i, c in enumerate(_get(obj, "matched_chains", where)):
        at = f"{where}.matched_chains[{i}]"
        chains.append(
            MatchedChain(
                _get(c, "a_top", at),
                _get(c, "a_bottom", at),
                _get(c, "b_top", at),
                _get(c, "b_bottom", at),
                _num_in(c.get("shrink_cost", 0.0), f"{at}.shrink_cost"),
            )
        )
    return EditPlan(
        frozenset(_get(obj, "deleted_a", where)),
        frozenset(_get(obj, "deleted_b", where)),
        tuple(chains),
        _num_in(obj.get("total_cost", 0.0), f"{where}.total_cost"),
    )


# -- files ----------------------------------------------------------------


def write_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed JSON ({exc})") from exc


def save_dendrogram(d: Dendrogram, path: str | Path) -> None:
    write_json(dendrogram_to_json(d), path)


def load_dendrogram(path: str | Path) -> Dendrogram:
    return dendrogram_from_json(read_json(path), str(path))


def _csv_rows(path: str | Path) -> list[list[str]]:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines and lines[0].startswith("#"):
        tag = lines[0].lstrip("#").strip()
        if tag.startswith("format_version") and tag != f"format_version={FORMAT_VERSION}":
            raise SchemaError(f"{path}: unsupported {tag}")
        lines = lines[1:]
    return list(csv.reader(lines))


def _floats(row: list[str], where: str) -> list[float]:
    try:
        return [float(x) for x in row]
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def _write_csv(path: str | Path, rows: list[list]) -> None:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    Path(path).write_text(buf.getvalue())


def save_matrix(m: DistanceMatrix, path: str | Path) -> None:
    rows = [[""] + list(m.labels)]
    rows += [[lab] + [float(v) for v in m.values[i]] for i, lab in enumerate(m.labels)]
    _write_csv(path, rows)


def load_matrix(path: str | Path) -> DistanceMatrix:
    rows = _csv_rows(path)
    if not rows:
        raise SchemaError(f"{path}: empty matrix file")
    labels = rows[0][1:]
    body = rows[1:]
    if len(body) != len(labels):
        raise SchemaError(f"{path}: {len(labels)} column labels but {len(body)} rows")
    values = []
    for i, r in enumerate(body):
        if r[0] != labels[i]:
            raise SchemaError(f"{path}: row {i + 1} label {r[0]!r} differs from column label {labels[i]!r}")
        if len(r) != len(labels) + 1:
            raise SchemaError(f"{path}: row {r[0]!r} has {len(r) - 1} values, expected {len(labels)}")
        values.append(_floats(r[1:], f"{path}: row {r[0]!r}"))
    try:
        return DistanceMatrix(tuple(labels), np.array(values))
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def save_field(f: ScalarField1D, path: str | Path) -> None:
    _write_csv(path, [["x", "y"]] + [[float(x), float(y)] for x, y in zip(f.xs, f.ys)])


def load_field(path: str | Path) -> ScalarField1D:
    rows = _csv_rows(path)
    if rows and rows[0] == ["x", "y"]:
        rows = rows[1:]
    data = []
    for i, r in enumerate(rows):
        if len(r) != 2:
            raise SchemaError(f"{path}: line {i + 1} needs two columns x,y")
        data.append(_floats(r, f"{path}: line {i + 1}"))
    if not data:
        raise SchemaError(f"{path}: no samples")
    arr = np.array(data)
    try:
        return ScalarField1D(arr[:, 0], arr[:, 1])
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def save_cloud(c: PointCloud, path: str | Path) -> None:
    _write_csv(path, [[float(v) for v in p] for p in c.points])


def load_cloud(path: str | Path) -> PointCloud:
    rows = _csv_rows(path)
    data = [_floats(r, f"{path}: line {i + 1}") for i, r in enumerate(rows)]
    if not data or len({len(r) for r in data}) != 1:
        raise SchemaError(f"{path}: points must be non-empty rows of equal length")
    try:
        return PointCloud(np.array(data))
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
