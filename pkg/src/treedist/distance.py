"""Exact edit distance between dendrograms.

An optimal edit path can always be taken in normal form: delete edges on
both sides, ghost the order-2 vertices this creates, then shrink the edges of
the (now isomorphic) reduced trees onto each other.  A reduced edge is a
chain of original edges whose weights add up.

The solver is a memoised dynamic program over vertex pairs ``(v, w)``:
``D(v, w)`` is the cheapest way to edit everything strictly below ``v`` into
everything strictly below ``w`` when ``v`` and ``w`` are matched.  The
reduced children of ``v`` are chains ``u -> s`` (``u`` below or equal to
``s``); every vertex strictly between ``s`` and ``v`` is deleted, and so is
every side branch of the chain.  Chain starts ``s`` must form an antichain
on each side, which makes each ``D(v, w)`` a small 0/1 program, solved here
by depth-first branch and bound.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

from .editable import PiecewiseMap, pw_add, pw_l1_distance
from .trees import Dendrogram, canonicalize, tree_norm

__all__ = [
    "EditPlan",
    "MatchedChain",
    "StabilityReport",
    "edit_distance",
    "children_assignment",
    "brute_force_distance",
    "plan_cost",
    "stability_check",
    "DistanceSolver",
]

GAIN_TOL = 1e-12


@dataclass(frozen=True)
class MatchedChain:
    """Chain ``a_bottom -> ... -> a_top`` of ``a`` shrunk onto one of ``b``."""

    a_top: str
    a_bottom: str
    b_top: str
    b_bottom: str
    shrink_cost: float = 0.0


@dataclass(frozen=True)
class EditPlan:
    deleted_a: frozenset[str]
    deleted_b: frozenset[str]
    matching: tuple[MatchedChain, ...]
    total_cost: float = 0.0


@dataclass(frozen=True)
class StabilityReport:
    epsilon: float
    distance: float
    bound: float
    satisfied: bool


def _check_inputs(a: Dendrogram, b: Dendrogram) -> None:
    if a.dim and b.dim and a.channels != b.channels:
        raise ValueError(f"channel mismatch: {a.channels} vs {b.channels}")
    for name, d in (("first", a), ("second", b)):
        for v, w in d.weights.items():
            if not w.is_bounded:
                raise ValueError(
                    f"{name} dendrogram: weight of edge {v!r} is unbounded; truncate it first"
                )
            if w.is_zero:
                raise ValueError(f"{name} dendrogram: edge {v!r} has the zero weight")


class _Side:
    """Per-tree tables: preorder layout, norms, subtree deletion costs, chains."""

    def __init__(self, d: Dendrogram):
        s = d.structure
        self.d = d
        self.root = s.root
        self.children = s.children
        self.parent = s.parent
        self.pre = s.subtree(s.root)
        self.pos = {v: i for i, v in enumerate(self.pre)}
        self.end = {}
        self.post = s.postorder()
        self.norm = {v: d.weights[v].norm for v in s.parent}
        self.del_sub = {}
        for v in self.post:
            self.end[v] = self.pos[v] + 1 + sum(self.end[c] - self.pos[c] for c in self.children[v])
            self.del_sub[v] = sum(self.norm[c] + self.del_sub[c] for c in self.children[v])
        # chains[s] = [(u, W(u -> s), |W|)] for every u in the subtree of s
        self.chains: dict[str, list[tuple[str, PiecewiseMap, float]]] = {}
        for top in s.parent:
            acc = {top: d.weights[top]}
            out = []
            for u in s.subtree(top):
                if u != top:
                    acc[u] = pw_add(d.weights[u], acc[self.parent[u]])
                out.append((u, acc[u], acc[u].norm))
            self.chains[top] = out

    def strict_desc(self, v: str) -> list[str]:
        return self.pre[self.pos[v] + 1 : self.end[v]]


class DistanceSolver:
    """Dynamic program for ``d_E`` between two (already canonical) dendrograms."""

    def __init__(self, a: Dendrogram, b: Dendrogram):
        _check_inputs(a, b)
        self.A = _Side(a)
        self.B = _Side(b)
        self.D: dict[tuple[str, str], float] = {}
        self.G: dict[tuple[str, str], float] = {}
        self.chain_arg: dict[tuple[str, str], tuple[str, str, float]] = {}
        self.selection: dict[tuple[str, str], list[tuple[str, str]]] = {}
        self._solve()

    # chain gain: negative = matching chains starting at (s, t) beats deleting them
    def _chain_value(self, s: str, t: str) -> None:
        A, B = self.A, self.B
        best = math.inf
        arg = None
        for u, wu, nu in A.chains[s]:
            du = A.del_sub[u]
            for x, wx, nx in B.chains[t]:
                base = self.D[u, x] - du - B.del_sub[x] - nu - nx
                if base - 2.0 * min(nu, nx) + abs(nu - nx) >= best:
                    continue
                shrink = pw_l1_distance(wu, wx)
                val = base + shrink
                if val < best - GAIN_TOL:
                    best, arg = val, (u, x, shrink)
        self.G[s, t] = best
        self.chain_arg[s, t] = arg

    def _solve(self) -> None:
        A, B = self.A, self.B
        for v in A.post:
            for w in B.post:
                self.D[v, w] = children_assignment(self, v, w)
                if v != A.root and w != B.root:
                    self._chain_value(v, w)

    @property
    def value(self) -> float:
        return self.D[self.A.root, self.B.root]

    def plan(self) -> EditPlan:
        A, B = self.A, self.B
        chains = []
        stack = [(A.root, B.root)]
        while stack:
            v, w = stack.pop()
            for s, t in self.selection.get((v, w), []):
                u, x, shrink = self.chain_arg[s, t]
                chains.append(MatchedChain(s, u, t, x, shrink))
                stack.append((u, x))
        chains.sort(key=lambda c: (c.a_top, c.b_top))
        claimed_a = set()
        claimed_b = set()
        for c in chains:
            claimed_a.update(_path(A.parent, c.a_bottom, c.a_top))
            claimed_b.update(_path(B.parent, c.b_bottom, c.b_top))
        deleted_a = frozenset(set(A.parent) - claimed_a)
        deleted_b = frozenset(set(B.parent) - claimed_b)
        total = math.fsum(
            [A.norm[v] for v in sorted(deleted_a)]
            + [B.norm[v] for v in sorted(deleted_b)]
            + [c.shrink_cost for c in chains]
        )
        return EditPlan(deleted_a, deleted_b, tuple(chains), total)


def _path(parent, bottom: str, top: str) -> list[str]:
    out = [bottom]
    while out[-1] != top:
        out.append(parent[out[-1]])
    return out


def children_assignment(solver: DistanceSolver, v: str, w: str) -> float:
    """``D(v, w)``: best matching of chain pairs below ``v`` and ``w``.

    Maximises the total gain of selected chain-start pairs ``(s, t)`` subject
    to the starts forming an antichain below ``v`` and below ``w``; the
    result is the full deletion cost minus that gain.
    """
    A, B = solver.A, solver.B
    base = A.del_sub[v] + B.del_sub[w]
    below_a = A.strict_desc(v)
    below_b = B.strict_desc(w)
    if not below_a or not below_b:
        solver.selection[v, w] = []
        return base
    cands = []
    for s in below_a:
        row = [(-solver.G[s, t], t) for t in below_b if solver.G[s, t] < -GAIN_TOL]
        row.sort(key=lambda gt: (-gt[0], B.pos[gt[1]]))
        cands.append(row)
    gain, chosen = _antichain_matching(A, B, v, w, below_a, cands)
    solver.selection[v, w] = chosen
    return base - gain


def _antichain_matching(A: _Side, B: _Side, v, w, below_a, cands):
    """Depth-first branch and bound over the preorder of ``v``'s subtree."""
    m = len(below_a)
    offset = A.pos[v] + 1
    nxt = [A.end[s] - offset for s in below_a]  # index after the subtree of s
    top_gain = [row[0][0] if row else 0.0 for row in cands]

    # static bound: best antichain of per-vertex best gains, over a preorder suffix
    sub_bound = [0.0] * m
    has_any = [False] * m
    for i in range(m - 1, -1, -1):
        kids_sum, j = 0.0, i + 1
        any_below = False
        while j < nxt[i]:
            kids_sum += sub_bound[j]
            any_below |= has_any[j]
            j = nxt[j]
        sub_bound[i] = max(top_gain[i], kids_sum)
        has_any[i] = bool(cands[i]) or any_below
    suffix = [0.0] * (m + 1)
    for i in range(m - 1, -1, -1):
        suffix[i] = sub_bound[i] + suffix[nxt[i]]

    # per-t best gains on b's side, for a second bound
    below_b = B.strict_desc(w)
    b_best = {t: 0.0 for t in below_b}
    for row in cands:
        for g, t in row:
            if g > b_best[t]:
                b_best[t] = g
    b_off = B.pos[w] + 1
    b_nxt = {t: B.end[t] for t in below_b}

    def b_bound(taken: list[str]) -> float:
        if not taken:
            return b_static
        blocked_lo = [(B.pos[t], B.end[t]) for t in taken]

        def sub(t):
            p = B.pos[t]
            for lo, hi in blocked_lo:
                if lo <= p < hi:
                    return 0.0
            kids = sum(sub(c) for c in B.children[t])
            is_anc = any(p < lo < B.end[t] for lo, _ in blocked_lo)
            return kids if is_anc else max(b_best[t], kids)

        return sum(sub(c) for c in B.children[w])

    def b_sub_static(t):
        kids = sum(b_sub_static(c) for c in B.children[t])
        return max(b_best[t], kids)

    b_static = sum(b_sub_static(c) for c in B.children[w])
    del b_off, b_nxt

    def free(t: str, taken: list[str]) -> bool:
        p, e = B.pos[t], B.end[t]
        for x in taken:
            q = B.pos[x]
            if q <= p < B.end[x] or p <= q < e:
                return False
        return True

    # greedy incumbent
    best_gain = 0.0
    best_sel: list[tuple[int, str]] = []
    order = sorted(
        ((g, i, t) for i, row in enumerate(cands) for g, t in row),
        key=lambda r: (-r[0], r[1], B.pos[r[2]]),
    )
    g_taken_a: list[int] = []
    g_taken_b: list[str] = []
    total = 0.0
    for g, i, t in order:
        if any(j <= i < nxt[j] or i <= j < nxt[i] for j in g_taken_a):
            continue
        if not free(t, g_taken_b):
            continue
        g_taken_a.append(i)
        g_taken_b.append(t)
        total += g
    if total > best_gain + GAIN_TOL:
        best_gain = total
        best_sel = sorted(zip(g_taken_a, g_taken_b))

    chosen: list[tuple[int, str]] = []
    taken_b: list[str] = []

    def rec(i: int, cur: float) -> None:
        nonlocal best_gain, best_sel
        while i < m and not has_any[i]:
            i = nxt[i]
        if i >= m:
            if cur > best_gain + GAIN_TOL:
                best_gain = cur
                best_sel = list(chosen)
            return
        if cur + suffix[i] <= best_gain + GAIN_TOL:
            return
        if cur + b_bound(taken_b) <= best_gain + GAIN_TOL:
            return
        for g, t in cands[i]:
            if cur + g + suffix[nxt[i]] <= best_gain + GAIN_TOL:
                break
            if free(t, taken_b):
                chosen.append((i, t))
                taken_b.append(t)
                rec(nxt[i], cur + g)
                taken_b.pop()
                chosen.pop()
        rec(i + 1, cur)

    rec(0, 0.0)
    return best_gain, [(below_a[i], t) for i, t in best_sel]


def edit_distance(
    a: Dendrogram, b: Dendrogram, canonical: bool = True
) -> tuple[float, EditPlan]:
    """Exact ``d_E(a, b)`` and an optimal edit plan.

    Both dendrograms are canonicalised first (order-2 vertices ghosted); the
    plan refers to the vertex ids of the canonical trees, which are a subset
    of the input ids.  Edge weights must be bounded (truncate root edges).
    The returned distance is the plan's own recomputed cost.
    """
    _check_inputs(a, b)
    if canonical:
        a, b = canonicalize(a), canonicalize(b)
    solver = DistanceSolver(a, b)
    plan = solver.plan()
    if abs(plan.total_cost - solver.value) > 1e-7 * max(1.0, solver.value):
        raise AssertionError(
            f"plan cost {plan.total_cost} disagrees with the program value {solver.value}"
        )
    return plan.total_cost, plan


def distance(a: Dendrogram, b: Dendrogram) -> float:
    return edit_distance(a, b)[0]


# -- plan checking --------------------------------------------------------


def _attach(parent, root, deleted, v):
    u = parent[v]
    while u != root and u in deleted:
        u = parent[u]
    return u


def plan_cost(a: Dendrogram, b: Dendrogram, plan: EditPlan) -> float:
    """Cost of an explicit plan, after checking that it is a valid edit path."""
    sides = []
    for d, deleted, tops in (
        (a, plan.deleted_a, [(c.a_bottom, c.a_top) for c in plan.matching]),
        (b, plan.deleted_b, [(c.b_bottom, c.b_top) for c in plan.matching]),
    ):
        parent, root = d.parent, d.root
        claimed: dict[str, int] = {}
        weights = []
        for k, (bottom, top) in enumerate(tops):
            try:
                path = _path(parent, bottom, top)
            except KeyError:
                raise ValueError(f"chain {bottom!r} -> {top!r} is not an upward path") from None
            for q in path:
                if q in claimed:
                    raise ValueError(f"vertex {q!r} used by two chains")
                claimed[q] = k
            weights.append(pw_add_many(d.weights[q] for q in path))
        if set(claimed) & set(deleted):
            raise ValueError("a vertex is both deleted and matched")
        if set(claimed) | set(deleted) != set(parent):
            raise ValueError("every non-root vertex must be deleted or matched")
        bottoms = {bottom: k for k, (bottom, _) in enumerate(tops)}
        rparent = []
        for k, (bottom, top) in enumerate(tops):
            up = _attach(parent, root, deleted, top)
            if up == root:
                rparent.append(-1)
            elif up in bottoms:
                rparent.append(bottoms[up])
            else:
                raise ValueError(f"chain topped at {top!r} hangs from the middle of another chain")
        sides.append((rparent, weights, [d.weights[v].norm for v in deleted]))
    (ra, wa, da), (rb, wb, db) = sides
    if ra != rb:
        raise ValueError("matched chains do not form isomorphic reduced trees")
    shrink = [pw_l1_distance(x, y) for x, y in zip(wa, wb)]
    return math.fsum(da + db + shrink)


def pw_add_many(maps: Iterable[PiecewiseMap]) -> PiecewiseMap:
    out = None
    for m in maps:
        out = m if out is None else pw_add(out, m)
    return out


# -- brute force oracle ---------------------------------------------------


def _reduce(d: Dendrogram, deleted: frozenset[str]):
    """Delete ``deleted`` then ghost order-2 vertices; returns (parent, weights)."""
    root = d.root
    parent = {v: _attach(d.parent, root, deleted, v) for v in d.parent if v not in deleted}
    weights = {v: d.weights[v] for v in parent}
    while True:
        kids: dict[str, list[str]] = {}
        for c, p in parent.items():
            kids.setdefault(p, []).append(c)
        order2 = [v for v in parent if len(kids.get(v, [])) == 1]
        if not order2:
            return parent, weights
        v = min(order2)
        (c,) = kids[v]
        weights[c] = pw_add(weights[c], weights.pop(v))
        parent[c] = parent.pop(v)


def _shape(kids, v) -> str:
    return "(" + "".join(sorted(_shape(kids, c) for c in kids.get(v, []))) + ")"


def _iso_cost(ka, wa, u, kb, wb, x, memo) -> float:
    key = (u, x)
    if key in memo:
        return memo[key]
    ca, cb = ka.get(u, []), kb.get(x, [])
    best = math.inf
    if len(ca) == len(cb):
        if not ca:
            best = 0.0
        for perm in itertools.permutations(cb):
            c = 0.0
            for p, q in zip(ca, perm):
                c += pw_l1_distance(wa[p], wb[q]) + _iso_cost(ka, wa, p, kb, wb, q, memo)
                if c >= best:
                    break
            best = min(best, c)
    memo[key] = best
    return best


def _all_reductions(d: Dendrogram):
    verts = sorted(d.parent)
    out = []
    for r in range(len(verts) + 1):
        for dele in itertools.combinations(verts, r):
            dele = frozenset(dele)
            parent, weights = _reduce(d, dele)
            kids: dict[str, list[str]] = {}
            for c, p in parent.items():
                kids.setdefault(p, []).append(c)
            cost = math.fsum(d.weights[v].norm for v in dele)
            out.append((cost, _shape(kids, d.root), kids, weights))
    return out


def brute_force_distance(a: Dendrogram, b: Dendrogram, max_edges: int = 8) -> float:
    """Exhaustive minimum over deletion subsets and isomorphisms (small trees only)."""
    if a.dim > max_edges or b.dim > max_edges:
        raise ValueError(
            f"brute force refused: {a.dim} and {b.dim} edges exceed the limit {max_edges}"
        )
    _check_inputs(a, b)
    red_a = _all_reductions(a)
    red_b: dict[str, list] = {}
    for item in _all_reductions(b):
        red_b.setdefault(item[1], []).append(item)
    best = math.inf
    for cost_a, shape, ka, wa in red_a:
        for cost_b, _, kb, wb in red_b.get(shape, []):
            if cost_a + cost_b >= best:
                continue
            c = cost_a + cost_b + _iso_cost(ka, wa, a.root, kb, wb, b.root, {})
            best = min(best, c)
    return best


# -- stability ------------------------------------------------------------


def stability_check(a: Dendrogram, b: Dendrogram, epsilon: float, tol: float = 1e-9) -> StabilityReport:
    """Compare ``d_E`` of two unit-weight dendrograms with ``2 eps (rank + rank)``."""
    dist, _ = edit_distance(a, b)
    ra = canonicalize(a).rank
    rb = canonicalize(b).rank
    bound = 2.0 * epsilon * (ra + rb)
    return StabilityReport(epsilon, dist, bound, dist <= bound + tol)


def upper_bound(a: Dendrogram, b: Dendrogram) -> float:
    return tree_norm(a) + tree_norm(b)
