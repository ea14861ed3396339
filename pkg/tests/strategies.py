"""Hypothesis strategies for piecewise maps and dendrograms."""
from __future__ import annotations

from hypothesis import strategies as st

from treedist.editable import PiecewiseMap
from treedist.trees import Dendrogram

coord = st.integers(-20, 20).map(lambda i: i / 4)
level = st.floats(0.0, 3.0, allow_nan=False).map(lambda x: round(x, 3))


@st.composite
def piecewise_maps(draw, channels: int = 1, max_pieces: int = 4, affine: bool = True):
    cuts = sorted(draw(st.sets(coord, min_size=2, max_size=max_pieces + 1)))
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if draw(st.booleans()) and len(cuts) > 2:
            continue  # gap
        a = [draw(level) for _ in range(channels)]
        b = [draw(level) for _ in range(channels)] if affine and draw(st.booleans()) else a
        slope = [(y - x) / (hi - lo) for x, y in zip(a, b)]
        icpt = [x - s * lo for x, s in zip(a, slope)]
        pieces.append((lo, hi, icpt, slope))
    return PiecewiseMap.from_pieces(channels, pieces)


nonzero_maps = piecewise_maps().filter(lambda m: not m.is_zero and m.norm > 1e-6)


@st.composite
def dendrograms(draw, max_edges: int = 5):
    n = draw(st.integers(1, max_edges))
    parent = {"v0": "r"}
    for i in range(1, n):
        parent[f"v{i}"] = draw(st.sampled_from(sorted(parent)))
    return Dendrogram.from_edges("r", {v: (p, draw(nonzero_maps)) for v, p in parent.items()})
