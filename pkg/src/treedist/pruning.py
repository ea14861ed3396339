"""Leaf pruning ``P_eps`` and the pruning error."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .trees import Dendrogram, delete_edge, ghost_vertex, tree_norm

__all__ = ["PruningResult", "prune", "pruning_error", "calibrate_epsilon"]


@dataclass(frozen=True)
class PruningResult:
    pruned: Dendrogram
    removed_leaves: tuple[str, ...]
    pruning_error: float


def _prunable_leaves(d: Dendrogram) -> list[str]:
    root_edge = d.root_edge()
    return [v for v in d.structure.leaves if v != d.root and v != root_edge]


def prune(d: Dendrogram, epsilon: float, seed: int = 0) -> PruningResult:
    """Remove minimal-norm leaves while their norm is below ``epsilon``.

    Ties between minimal leaves are broken by a ``numpy`` generator seeded
    with ``seed``.  One draw is made per step whether or not there is a tie,
    so runs with different ``epsilon`` follow the same removal sequence and
    the pruning error grows monotonically with ``epsilon``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    rng = np.random.default_rng(seed)
    out = d
    removed: list[str] = []
    while True:
        leaves = sorted(_prunable_leaves(out))
        if not leaves:
            break
        norms = [out.weights[v].norm for v in leaves]
        lowest = min(norms)
        ties = [v for v, n in zip(leaves, norms) if n == lowest]
        pick = ties[int(rng.integers(len(ties)))]
        if not lowest < epsilon:
            break
        parent = out.parent[pick]
        out, _ = delete_edge(out, pick)
        removed.append(pick)
        if parent != out.root and len(out.children[parent]) == 1:
            out = ghost_vertex(out, parent)
    return PruningResult(out, tuple(removed), pruning_error(d, out))


def pruning_error(original: Dendrogram, pruned: Dendrogram) -> float:
    """Fraction of the total norm lost by pruning."""
    total = tree_norm(original)
    if total == 0:
        raise ValueError("pruning error undefined for a zero-norm dendrogram")
    return (total - tree_norm(pruned)) / total


def calibrate_epsilon(
    dendrograms: Sequence[Dendrogram],
    target: float = 0.15,
    seed: int = 0,
    iterations: int = 60,
) -> float:
    """Bisection for the threshold whose mean pruning error is closest to ``target``.

    The mean error is a non-decreasing step function of the threshold, so the
    search returns the smallest threshold reaching ``target`` when one exists,
    otherwise the one just below the jump that overshoots it least.
    """
    if not dendrograms:
        raise ValueError("no dendrograms to calibrate on")

    def mean_error(eps: float) -> float:
        return float(np.mean([prune(d, eps, seed).pruning_error for d in dendrograms]))

    lo = 0.0
    # ghosting can merge edges, but no leaf ever outweighs its whole tree
    hi = max(tree_norm(d) for d in dendrograms) * (1 + 1e-9) + 1e-12
    if mean_error(hi) < target:
        return hi
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mean_error(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi if abs(mean_error(hi) - target) <= abs(mean_error(lo) - target) else lo
