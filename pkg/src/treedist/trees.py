"""Tree structures, merge trees and dendrograms, with their edit operations.

Edges are identified by their lower vertex: the edge of ``v`` is
``(v, parent[v])``.  Vertex ids are opaque strings.  All operations return new
objects; nothing is mutated in place.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

from .editable import PiecewiseMap, pw_add, pw_l1_distance, pw_restrict

__all__ = [
    "TreeStructure",
    "MergeTree",
    "Dendrogram",
    "validate",
    "ghost_vertex",
    "split_edge",
    "split_at_height",
    "delete_edge",
    "binarize",
    "canonicalize",
    "tree_norm",
    "display_distance",
]

INF = math.inf


class TreeError(ValueError):
    """Raised when an edit precondition on a tree is violated."""


@dataclass(frozen=True, eq=False)
class TreeStructure:
    root: str
    parent: Mapping[str, str]

    def __post_init__(self):
        if self.root in self.parent:
            raise TreeError(f"root {self.root!r} cannot have a parent")
        known = set(self.parent) | {self.root}
        for child, par in self.parent.items():
            if par not in known:
                raise TreeError(f"edge ({child!r}, {par!r}) references a missing vertex")
        # every vertex must reach the root without revisiting anything
        reached = {self.root}
        for v in self.parent:
            path = []
            u = v
            while u not in reached:
                if u in path:
                    raise TreeError(f"cycle through vertex {u!r}")
                path.append(u)
                u = self.parent[u]
            reached.update(path)

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        kids: dict[str, list[str]] = {v: [] for v in self.vertices}
        for c, p in self.parent.items():
            kids[p].append(c)
        return {v: tuple(sorted(cs)) for v, cs in kids.items()}

    @property
    def vertices(self) -> list[str]:
        return [self.root, *sorted(self.parent)]

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(c, self.parent[c]) for c in sorted(self.parent)]

    @property
    def leaves(self) -> list[str]:
        return [v for v in sorted(self.parent) if not self.children[v]]

    def order(self, v: str) -> int:
        return len(self.children[v]) + (0 if v == self.root else 1)

    def ancestors(self, v: str) -> list[str]:
        """Strict ancestors of ``v``, bottom-up, ending at the root."""
        out = []
        while v != self.root:
            v = self.parent[v]
            out.append(v)
        return out

    def subtree(self, v: str) -> list[str]:
        """``v`` and all its descendants, in preorder."""
        out, stack = [], [v]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(reversed(self.children[u]))
        return out

    def postorder(self) -> list[str]:
        return _postorder(self)

    @property
    def rank(self) -> int:
        return len(self.leaves)

    @property
    def dim(self) -> int:
        return len(self.parent)


def _postorder(t: TreeStructure) -> list[str]:
    out = []
    stack = [(t.root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            out.append(v)
            continue
        stack.append((v, True))
        for c in reversed(t.children[v]):
            stack.append((c, False))
    return out


@dataclass(frozen=True, eq=False)
class MergeTree:
    structure: TreeStructure
    heights: Mapping[str, float]

    def __post_init__(self):
        s = self.structure
        for v in s.parent:
            if v not in self.heights:
                raise TreeError(f"vertex {v!r} has no height")
        if s.root in self.heights and self.heights[s.root] != INF:
            raise TreeError("the root of a merge tree sits at +inf")
        if len(s.children[s.root]) > 1:
            raise TreeError("the root of a merge tree has order 1")
        for c, p in s.parent.items():
            hp = INF if p == s.root else self.heights[p]
            if not self.heights[c] < hp:
                raise TreeError(f"heights must increase along edge ({c!r}, {p!r})")

    def height(self, v: str) -> float:
        return INF if v == self.structure.root else float(self.heights[v])

    @property
    def max_height(self) -> float:
        finite = [h for v, h in self.heights.items() if v != self.structure.root]
        return max(finite) if finite else -INF

    @property
    def rank(self) -> int:
        return self.structure.rank

    @property
    def dim(self) -> int:
        return self.structure.dim


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Tree structure with a weight map edge -> PiecewiseMap.

    ``heights`` is optional; when present the dendrogram is read as the local
    representation of a function on a merge tree, and every edge weight must
    be supported inside the height span of its edge.
    """

    structure: TreeStructure
    weights: Mapping[str, PiecewiseMap]
    heights: Mapping[str, float] | None = None
    channels: int = field(default=0)

    def __post_init__(self):
        missing = set(self.structure.parent) - set(self.weights)
        if missing:
            raise TreeError(f"edges without weight: {sorted(missing)}")
        ks = {w.channels for w in self.weights.values()}
        if len(ks) > 1:
            raise TreeError(f"edge weights disagree on channel count: {sorted(ks)}")
        if ks:
            k = ks.pop()
            if self.channels and self.channels != k:
                raise TreeError("declared channel count differs from the weights")
            object.__setattr__(self, "channels", k)
        elif not self.channels:
            object.__setattr__(self, "channels", 1)

    @classmethod
    def from_edges(
        cls,
        root: str,
        edges: Mapping[str, tuple[str, PiecewiseMap]],
        heights: Mapping[str, float] | None = None,
        channels: int = 0,
    ) -> "Dendrogram":
        """Build from ``{child: (parent, weight)}``."""
        parent = {c: p for c, (p, _) in edges.items()}
        weights = {c: w for c, (_, w) in edges.items()}
        return cls(TreeStructure(root, parent), weights, heights, channels)

    @classmethod
    def single_vertex(cls, root: str = "root", channels: int = 1) -> "Dendrogram":
        return cls(TreeStructure(root, {}), {}, None, channels)

    # convenience pass-throughs
    @property
    def root(self) -> str:
        return self.structure.root

    @property
    def parent(self) -> Mapping[str, str]:
        return self.structure.parent

    @property
    def children(self) -> dict[str, tuple[str, ...]]:
        return self.structure.children

    @property
    def rank(self) -> int:
        return self.structure.rank

    @property
    def dim(self) -> int:
        return self.structure.dim

    def height(self, v: str) -> float:
        if self.heights is None:
            raise TreeError("dendrogram carries no heights")
        return INF if v == self.root else float(self.heights[v])

    def root_edge(self) -> str | None:
        kids = self.children[self.root]
        return kids[0] if len(kids) == 1 else None

    def with_(self, parent=None, weights=None, heights=...) -> "Dendrogram":
        return Dendrogram(
            TreeStructure(self.root, self.parent if parent is None else parent),
            self.weights if weights is None else weights,
            self.heights if heights is ... else heights,
            self.channels,
        )

    def isomorphic(self, other: "Dendrogram", tol: float = 1e-12) -> bool:
        """Weighted isomorphism, ignoring vertex ids and heights."""
        return _iso(self, self.root, other, other.root, tol)


def _iso(a: Dendrogram, u: str, b: Dendrogram, x: str, tol: float) -> bool:
    ca, cb = a.children[u], b.children[x]
    if len(ca) != len(cb):
        return False
    if not ca:
        return True
    for perm in itertools.permutations(cb):
        if all(
            pw_l1_distance(a.weights[c], b.weights[d]) <= tol and _iso(a, c, b, d, tol)
            for c, d in zip(ca, perm)
        ):
            return True
    return False


# -- validation -----------------------------------------------------------


def validate(d: Dendrogram, tol: float = 1e-9) -> list[str]:
    """List every violated dendrogram invariant; empty when ``d`` is valid."""
    out = []
    s = d.structure
    for v, w in sorted(d.weights.items()):
        if v not in s.parent:
            out.append(f"weight for unknown edge {v!r}")
            continue
        if w.is_zero:
            out.append(f"proper weight: edge ({v!r}, {s.parent[v]!r}) has the zero weight")
    if d.heights is not None:
        for c, p in sorted(s.parent.items()):
            if c not in d.heights:
                out.append(f"height: vertex {c!r} has no height")
                continue
            lo = d.heights[c]
            hi = INF if p == s.root else d.heights.get(p, INF)
            if not lo < hi:
                out.append(f"monotone heights: edge ({c!r}, {p!r}) spans [{lo:g}, {hi:g}]")
            sup = d.weights[c].support if c in d.weights else None
            if sup is not None and (sup[0] < lo - tol or sup[1] > hi + tol):
                out.append(
                    f"support exceeds edge span: edge ({c!r}, {p!r}) weight on "
                    f"[{sup[0]:g}, {sup[1]:g}] outside [{lo:g}, {hi:g}]"
                )
    return out


# -- edits ----------------------------------------------------------------


def ghost_vertex(d: Dendrogram, v: str) -> Dendrogram:
    """Remove the order-2 vertex ``v`` and merge its two edges (zero cost)."""
    s = d.structure
    if v == s.root or v not in s.parent:
        raise TreeError(f"cannot ghost {v!r}: not a non-root vertex")
    kids = s.children[v]
    if len(kids) != 1:
        raise TreeError(f"cannot ghost {v!r}: order {s.order(v)} != 2")
    (c,) = kids
    parent = dict(s.parent)
    parent[c] = parent.pop(v)
    weights = dict(d.weights)
    weights[c] = pw_add(weights[c], weights.pop(v))
    heights = None
    if d.heights is not None:
        heights = {k: h for k, h in d.heights.items() if k != v}
    return d.with_(parent, weights, heights)


def _fresh_id(d: Dendrogram, base: str) -> str:
    used = set(d.parent) | {d.root}
    for i in itertools.count():
        cand = f"{base}~{i}"
        if cand not in used:
            return cand
    raise AssertionError


def split_edge(
    d: Dendrogram,
    v: str,
    left: PiecewiseMap,
    right: PiecewiseMap,
    new_id: str | None = None,
    height: float | None = None,
    tol: float = 1e-9,
) -> Dendrogram:
    """Replace the edge of ``v`` by two edges weighted ``left`` (lower) and ``right``.

    ``left + right`` must equal the current weight up to measure zero.  For a
    dendrogram with heights, ``height`` places the new vertex.
    """
    s = d.structure
    if v not in s.parent:
        raise TreeError(f"{v!r} has no edge to split")
    if left.is_zero or right.is_zero:
        raise TreeError("split pieces must be non-zero")
    if pw_l1_distance(pw_add(left, right), d.weights[v]) > tol:
        raise TreeError("split pieces do not add up to the edge weight")
    mid = new_id or _fresh_id(d, v)
    if mid in s.parent or mid == s.root:
        raise TreeError(f"vertex id {mid!r} already in use")
    parent = dict(s.parent)
    parent[mid] = parent[v]
    parent[v] = mid
    weights = dict(d.weights)
    weights[v] = left
    weights[mid] = right
    heights = None
    if d.heights is not None:
        if height is None:
            raise TreeError("a dendrogram with heights needs a split height")
        lo = d.heights[v]
        hi = d.height(s.parent[v])
        if not lo < height < hi:
            raise TreeError(f"split height {height} outside ({lo}, {hi})")
        heights = dict(d.heights)
        heights[mid] = float(height)
    return d.with_(parent, weights, heights)


def split_at_height(d: Dendrogram, v: str, height: float, new_id: str | None = None) -> Dendrogram:
    """Split the edge of ``v`` by restricting its weight below/above ``height``."""
    w = d.weights[v]
    left = pw_restrict(w, -INF, height)
    right = pw_restrict(w, height, INF)
    return split_edge(d, v, left, right, new_id, height if d.heights is not None else None)


def delete_edge(d: Dendrogram, v: str) -> tuple[Dendrogram, float]:
    """Delete the edge of ``v``; its children move to its parent."""
    s = d.structure
    if v == s.root or v not in s.parent:
        raise TreeError(f"cannot delete {v!r}: the root has no edge")
    p = s.parent[v]
    parent = {c: (p if q == v else q) for c, q in s.parent.items() if c != v}
    weights = {c: w for c, w in d.weights.items() if c != v}
    heights = None
    if d.heights is not None:
        heights = {k: h for k, h in d.heights.items() if k != v}
    return d.with_(parent, weights, heights), d.weights[v].norm


def canonicalize(d: Dendrogram) -> Dendrogram:
    """Ghost every order-2 vertex."""
    out = d
    while True:
        s = out.structure
        cand = [v for v in s.parent if len(s.children[v]) == 1]
        if not cand:
            return out
        for v in sorted(cand):
            if v in out.parent and len(out.children[v]) == 1:
                out = ghost_vertex(out, v)


def tree_norm(d: Dendrogram) -> float:
    return float(sum(w.norm for w in d.weights.values()))


def subtree_norm(d: Dendrogram, v: str) -> float:
    return float(sum(d.weights[u].norm for u in d.structure.subtree(v) if u != d.root))


def default_epsilon_weight(d: Dendrogram, v: str, channels: int) -> PiecewiseMap:
    """Tiny constant weight (norm 1e-24) placed at the height of ``v``."""
    if d.heights is not None and v != d.root:
        at = d.heights[v]
    elif v in d.weights and not d.weights[v].is_zero:
        at = d.weights[v].support[0]
    else:
        at = 0.0
    return PiecewiseMap.constant(at - 1e-12, at, 1e-12, channels)


def binarize(d: Dendrogram, epsilon_weight: PiecewiseMap | None = None) -> Dendrogram:
    """Comb every vertex with more than two children into a binary cascade.

    Children are sorted by decreasing subtree norm (ties by id); auxiliary
    vertices carry ``epsilon_weight`` (default: a constant 1e-12 on an
    interval of length 1e-12 below the split vertex).  Heights are dropped
    from the result when any auxiliary vertex is added.
    """
    s = d.structure
    parent = dict(s.parent)
    weights = dict(d.weights)
    added = 0
    used = set(parent) | {s.root}
    for v in s.vertices:
        kids = list(s.children[v])
        if len(kids) <= 2:
            continue
        kids.sort(key=lambda c: (-subtree_norm(d, c), c))
        eps = epsilon_weight or default_epsilon_weight(d, v, d.channels)
        top = v
        for i, c in enumerate(kids[:-2]):
            parent[c] = top
            aux = f"{v}~b{i}"
            while aux in used:
                aux += "'"
            used.add(aux)
            parent[aux] = top
            weights[aux] = eps
            top = aux
            added += 1
        parent[kids[-2]] = top
        parent[kids[-1]] = top
    if not added:
        return d
    return d.with_(parent, weights, None)


# -- display poset distance -----------------------------------------------


def display_distance(m: MergeTree, p: tuple[str, float], q: tuple[str, float]) -> float:
    """LCA distance between two points ``(edge lower vertex, height)``.

    A vertex ``v`` is the point ``(v, h(v))``.
    """
    s = m.structure
    for v, t in (p, q):
        if v == s.root:
            raise TreeError("points are given on edges; the root is at +inf")
        lo, hi = m.height(v), m.height(s.parent[v])
        if not lo <= t <= hi:
            raise TreeError(f"height {t} outside edge span [{lo}, {hi}] of {v!r}")
    (a, ta), (b, tb) = p, q
    if a == b:
        return abs(ta - tb)
    up_a = [a, *s.ancestors(a)]
    up_b = [b, *s.ancestors(b)]
    if a in up_b:  # p's edge lies above q's
        return ta - tb
    if b in up_a:
        return tb - ta
    lca = next(u for u in up_a if u in set(up_b))
    h = m.height(lca)
    return (h - ta) + (h - tb)
