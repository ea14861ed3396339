"""Build decorated dendrograms from sampled 1-d fields and point clouds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .editable import PiecewiseMap, pw_restrict, pw_scale
from .trees import Dendrogram, MergeTree, TreeStructure

__all__ = [
    "ScalarField1D",
    "PointCloud",
    "BettiTable",
    "merge_tree_from_field",
    "sublevel_measure_weights",
    "single_linkage",
    "cardinality_weights",
    "unit_weights",
    "betti_weights",
    "truncate_dendrogram",
]

INF = math.inf
ROOT = "root"


@dataclass(frozen=True, eq=False)
class ScalarField1D:
    """Piecewise-linear interpolant of samples ``(xs[i], ys[i])``."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise ValueError("xs and ys must be 1-d arrays of equal length")
        if xs.shape[0] < 2:
            raise ValueError("a scalar field needs at least 2 samples")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("field samples must be finite")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def length(self) -> float:
        return float(self.xs[-1] - self.xs[0])

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a point cloud needs at least one point")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


# vertex id -> constant Betti vector, or a list of (from_height, vector) steps
BettiTable = Mapping[str, object]


class _DSU:
    def __init__(self):
        self.parent: dict[int, int] = {}
        self.lo: dict[int, int] = {}
        self.hi: dict[int, int] = {}

    def add(self, i: int) -> None:
        self.parent[i] = i
        self.lo[i] = self.hi[i] = i

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.lo[ra] = min(self.lo[ra], self.lo[rb])
        self.hi[ra] = max(self.hi[ra], self.hi[rb])
        return ra


def _sublevel_sweep(f: ScalarField1D):
    """Merge tree of the sublevel filtration plus exact measure pieces per edge.

    Returns ``(parent, heights, pieces)`` where ``pieces[v]`` lists
    ``(start, end, intercept, slope)`` of the component measure on the edge
    of ``v``; the root edge's last piece runs to +inf.
    """
    xs, ys = f.xs, f.ys
    n = xs.shape[0]
    levels = np.unique(ys)
    order = np.argsort(ys, kind="stable")
    dsu = _DSU()
    comp_vertex: dict[int, str] = {}
    parent: dict[str, str] = {}
    heights: dict[str, float] = {}
    pieces: dict[str, list] = {}

    pos = 0
    for k, t in enumerate(levels):
        new = []
        while pos < n and ys[order[pos]] == t:
            new.append(int(order[pos]))
            pos += 1
        old_reps = set()
        for i in new:
            for j in (i - 1, i + 1):
                if 0 <= j < n and j in dsu.parent and ys[j] < t:
                    old_reps.add(dsu.find(j))
        for i in new:
            dsu.add(i)
        for i in new:
            for j in (i - 1, i + 1):
                if 0 <= j < n and j in dsu.parent:
                    dsu.union(i, j)
        # group old components and fresh samples by their new component
        groups: dict[int, list[int]] = {}
        for r in old_reps:
            groups.setdefault(dsu.find(r), []).append(r)
        touched = {dsu.find(i) for i in new}
        for rep in touched:
            olds = sorted(groups.get(rep, []))
            if not olds:
                vid = f"m{dsu.lo[rep]}"
                heights[vid] = float(t)
                pieces[vid] = []
            elif len(olds) == 1:
                vid = comp_vertex[olds[0]]
            else:
                vid = f"s{min(i for i in new if dsu.find(i) == rep)}"
                heights[vid] = float(t)
                pieces[vid] = []
                for r in olds:
                    parent[comp_vertex[r]] = vid
            for r in olds:
                comp_vertex.pop(r, None)
            comp_vertex[rep] = vid

        # measure of every live component on [t, next level)
        t_next = float(levels[k + 1]) if k + 1 < len(levels) else INF
        for rep, vid in comp_vertex.items():
            lo, hi = dsu.lo[rep], dsu.hi[rep]
            icpt, slope = 0.0, 0.0
            if lo == 0:
                icpt -= xs[0]
            else:
                # boundary inside (lo-1, lo): x = xs[lo] - (t - ys[lo]) * dx/dy
                r = (xs[lo] - xs[lo - 1]) / (ys[lo - 1] - ys[lo])
                icpt -= xs[lo] + ys[lo] * r
                slope += r
            if hi == n - 1:
                icpt += xs[-1]
            else:
                r = (xs[hi + 1] - xs[hi]) / (ys[hi + 1] - ys[hi])
                icpt += xs[hi] - ys[hi] * r
                slope += r
            pieces[vid].append((float(t), t_next, icpt, slope))

    (top,) = comp_vertex.values()
    parent[top] = ROOT
    return parent, heights, pieces


def merge_tree_from_field(f: ScalarField1D) -> MergeTree:
    """Merge tree of the sublevel sets of the interpolated field.

    Leaves sit at local minima (plateaus count once), internal vertices at
    the heights where components join; simultaneous joins give a single
    multi-child vertex.
    """
    parent, heights, _ = _sublevel_sweep(f)
    return MergeTree(TreeStructure(ROOT, parent), {**heights, ROOT: INF})


def _check_K(K: float | None, max_height: float) -> None:
    if K is not None and K < max_height:
        raise ValueError(f"truncation height {K} is below the maximum height {max_height}")


def sublevel_measure_weights(
    f: ScalarField1D,
    tree: MergeTree | None = None,
    normalize: bool = False,
    K: float | None = None,
) -> Dendrogram:
    """Lebesgue measure of each sublevel component, as a function of height.

    The measure is exactly piecewise affine for a piecewise-linear field.  With
    ``normalize`` the measure is divided by the domain length.  ``K=None``
    keeps the unbounded root weight.
    """
    parent, heights, pieces = _sublevel_sweep(f)
    if tree is not None and (
        dict(tree.structure.parent) != parent
        or any(abs(tree.heights[v] - h) > 0 for v, h in heights.items())
    ):
        raise ValueError("merge tree was not built from this field")
    _check_K(K, max(heights.values()))
    scale = 1.0 / f.length if normalize else 1.0
    weights = {}
    for v, ps in pieces.items():
        w = PiecewiseMap.from_pieces(1, [(a, b, c * scale, s * scale) for a, b, c, s in ps])
        weights[v] = w
    d = Dendrogram(TreeStructure(ROOT, parent), weights, {**heights, ROOT: INF}, 1)
    return truncate_dendrogram(d, K) if K is not None else d


# -- point clouds ---------------------------------------------------------


def single_linkage(c: PointCloud) -> MergeTree:
    """Single-linkage dendrogram via Kruskal on the complete distance graph.

    All pairs at exactly the same distance are merged at once, so ties yield
    multi-child vertices.
    """
    pts = c.points
    n = pts.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    dv = pdist(pts)
    order = np.lexsort((ju, iu, dv))
    dsu = _DSU()
    for i in range(n):
        dsu.add(i)
    comp_vertex = {i: f"p{i}" for i in range(n)}
    heights = {f"p{i}": 0.0 for i in range(n)}
    parent: dict[str, str] = {}
    n_comp = n
    pos = 0
    merges = 0
    while pos < len(order) and n_comp > 1:
        t = dv[order[pos]]
        batch = []
        while pos < len(order) and dv[order[pos]] == t:
            batch.append(order[pos])
            pos += 1
        before = {}
        for e in batch:
            for v in (iu[e], ju[e]):
                r = dsu.find(int(v))
                before[r] = comp_vertex[r]
        for e in batch:
            if dsu.find(int(iu[e])) != dsu.find(int(ju[e])):
                dsu.union(int(iu[e]), int(ju[e]))
                n_comp -= 1
        groups: dict[int, list[int]] = {}
        for r in before:
            groups.setdefault(dsu.find(r), []).append(r)
        for rep, olds in sorted(groups.items()):
            if len(olds) < 2:
                continue
            vid = f"c{merges}"
            merges += 1
            heights[vid] = float(t)
            for r in olds:
                parent[before[r]] = vid
                comp_vertex.pop(r, None)
            comp_vertex[rep] = vid
    (top,) = comp_vertex.values()
    parent[top] = ROOT
    heights[ROOT] = INF
    return MergeTree(TreeStructure(ROOT, parent), heights)


def _leaf_counts(s: TreeStructure) -> dict[str, int]:
    counts = {}
    for v in s.postorder():
        kids = s.children[v]
        counts[v] = sum(counts[k] for k in kids) if kids else 1
    return counts


def cardinality_weights(
    c: PointCloud,
    tree: MergeTree | None = None,
    normalize: bool = False,
    K: float | None = None,
) -> Dendrogram:
    """Cluster cardinality as a step function along each edge."""
    tree = tree or single_linkage(c)
    s = tree.structure
    n = len(c)
    if s.rank != n:
        raise ValueError("tree leaves do not match the point cloud")
    _check_K(K, tree.max_height)
    counts = _leaf_counts(s)
    scale = 1.0 / n if normalize else 1.0
    weights = {
        v: PiecewiseMap.constant(tree.height(v), tree.height(p), counts[v] * scale)
        for v, p in s.parent.items()
    }
    d = Dendrogram(s, weights, dict(tree.heights), 1)
    return truncate_dendrogram(d, K) if K is not None else d


def unit_weights(tree: MergeTree, K: float | None = None) -> Dendrogram:
    """Indicator of each edge's height span; encodes the merge tree itself."""
    s = tree.structure
    _check_K(K, tree.max_height)
    weights = {
        v: PiecewiseMap.constant(tree.height(v), tree.height(p), 1.0)
        for v, p in s.parent.items()
    }
    d = Dendrogram(s, weights, dict(tree.heights), 1)
    return truncate_dendrogram(d, K) if K is not None else d


def _betti_steps(entry, lo: float, hi: float):
    """``entry`` is a Betti vector, or ``{"steps": [[height, vector], ...]}``."""
    if isinstance(entry, Mapping):
        steps = sorted((float(h), list(vec)) for h, vec in entry["steps"])
    else:
        steps = [(lo, list(entry))]
    if steps[0][0] > lo:
        raise ValueError("Betti steps must start at the lower end of the edge")
    out = []
    for i, (h, vec) in enumerate(steps):
        end = steps[i + 1][0] if i + 1 < len(steps) else hi
        if any(x < 0 for x in vec):
            raise ValueError("Betti numbers are non-negative")
        if vec[0] < 1:
            raise ValueError("H0 of a component is at least 1")
        out.append((max(h, lo), min(end, hi), vec))
    return out


def betti_weights(tree: MergeTree, table: BettiTable, K: float | None = None) -> Dendrogram:
    """Multichannel step weights from per-edge Betti vectors (given as data)."""
    s = tree.structure
    _check_K(K, tree.max_height)
    steps = {}
    for v, p in s.parent.items():
        if v not in table:
            raise ValueError(f"Betti table has no entry for vertex {v!r}")
        steps[v] = _betti_steps(table[v], tree.height(v), tree.height(p))
    dims = {len(vec) for st in steps.values() for _, _, vec in st}
    if len(dims) > 1:
        raise ValueError(f"Betti vectors must share one length, got {sorted(dims)}")
    k = dims.pop() if dims else 1
    weights = {
        v: PiecewiseMap.from_pieces(k, [(a, b, vec, [0.0] * k) for a, b, vec in st])
        for v, st in steps.items()
    }
    d = Dendrogram(s, weights, dict(tree.heights), k)
    return truncate_dendrogram(d, K) if K is not None else d


# -- truncation -----------------------------------------------------------


def truncate_dendrogram(d: Dendrogram, K: float) -> Dendrogram:
    """Restrict the root-edge weight to heights below ``K``.

    When the truncated root weight vanishes (``K`` equal to the top merge
    height) the root edge is contracted: its lower vertex is removed and its
    children hang from the root directly.
    """
    top = d.root_edge()
    if top is None:
        return d
    if d.heights is not None:
        finite = [h for v, h in d.heights.items() if v != d.root]
        if finite and K < max(finite):
            raise ValueError(f"truncation height {K} is below the maximum height {max(finite)}")
    w = pw_restrict(d.weights[top], -INF, K)
    if w == d.weights[top]:
        return d
    weights = dict(d.weights)
    if not w.is_zero:
        weights[top] = w
        return d.with_(weights=weights)
    parent = {c: (d.root if p == top else p) for c, p in d.parent.items() if c != top}
    del weights[top]
    heights = None
    if d.heights is not None:
        heights = {v: h for v, h in d.heights.items() if v != top}
    return d.with_(parent, weights, heights)


def normalize_dendrogram(d: Dendrogram, total: float) -> Dendrogram:
    return d.with_(weights={v: pw_scale(w, 1.0 / total) for v, w in d.weights.items()})


def field_from_samples(xs: Sequence[float], ys: Sequence[float]) -> ScalarField1D:
    return ScalarField1D(np.asarray(xs, float), np.asarray(ys, float))
