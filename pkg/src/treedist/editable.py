"""Compactly supported piecewise constant/affine maps R -> R^k_{>=0}.

These realise the weight space of a dendrogram: pointwise addition is the
monoid operation, the L1 distance (sum of per-channel absolute differences,
integrated exactly) is the metric and the distance to the zero map is the
norm.  Each piece is a half-open interval ``[start, end)`` carrying the line
``intercept + slope * x`` in every channel (``x`` is the absolute abscissa).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Piece",
    "PiecewiseMap",
    "EditableAxiomsReport",
    "pw_add",
    "pw_scale",
    "pw_l1_distance",
    "pw_norm",
    "pw_truncate",
    "pw_restrict",
    "pw_check_axioms",
]

# relative slack allowed when checking non-negativity at piece endpoints
NEG_TOL = 1e-9


class Piece(NamedTuple):
    start: float
    end: float
    intercept: tuple[float, ...]
    slope: tuple[float, ...]

    @property
    def kind(self) -> str:
        return "const" if not any(self.slope) else "affine"

    def value_at(self, x: float) -> tuple[float, ...]:
        return tuple(i + s * x for i, s in zip(self.intercept, self.slope))


def _as_vector(value, channels: int | None = None) -> np.ndarray:
    vec = np.atleast_1d(np.asarray(value, dtype=float))
    if vec.ndim != 1:
        raise ValueError("channel values must be scalars or 1-d vectors")
    if channels is not None and vec.shape[0] != channels:
        if vec.shape[0] == 1:
            return np.repeat(vec, channels)
        raise ValueError(f"expected {channels} channel values, got {vec.shape[0]}")
    return vec


SMALL = 24


def _negative_error(val, c, lo, hi) -> ValueError:
    return ValueError(f"negative value {val:.3g} in channel {c} on [{lo:g}, {hi:g})")


def _canonical_rows(k, starts, ends, icpt, slope):
    """Validate and canonicalise pieces (drop empty/zero, merge equal lines)."""
    rows = []
    for lo, hi, ic, sl in zip(starts.tolist(), ends.tolist(), icpt.tolist(), slope.tolist()):
        if not math.isfinite(lo) or math.isnan(hi):
            raise ValueError("piece starts must be finite")
        if not all(math.isfinite(x) for x in ic + sl):
            raise ValueError("piece coefficients must be finite")
        if hi > lo and (any(ic) or any(sl)):
            rows.append((lo, hi, ic, sl))
    for i, (lo, hi, ic, sl) in enumerate(rows):
        if i and (lo <= rows[i - 1][0] or rows[i - 1][1] > lo):
            raise ValueError("pieces must be sorted by start and pairwise disjoint")
        if hi == math.inf:
            if i != len(rows) - 1:
                raise ValueError("only the last piece may extend to +inf")
            if any(sl):
                raise ValueError("an unbounded piece must be constant")
        for x in (lo, lo if hi == math.inf else hi):
            for c in range(k):
                val = ic[c] + sl[c] * x
                if val < -NEG_TOL * (1.0 + abs(ic[c]) + abs(sl[c] * x)):
                    raise _negative_error(val, c, lo, hi)
    merged = []
    for r in rows:
        if merged and merged[-1][1] == r[0] and merged[-1][2] == r[2] and merged[-1][3] == r[3]:
            merged[-1] = (merged[-1][0], r[1], r[2], r[3])
        else:
            merged.append(r)
    n = len(merged)
    return (
        np.array([r[0] for r in merged], dtype=float),
        np.array([r[1] for r in merged], dtype=float),
        np.array([r[2] for r in merged], dtype=float).reshape(n, k),
        np.array([r[3] for r in merged], dtype=float).reshape(n, k),
    )


def _canonical_arrays(k, starts, ends, icpt, slope):
    """Vectorised twin of ``_canonical_rows`` for maps with many pieces."""
    if not (np.all(np.isfinite(starts)) and not np.any(np.isnan(ends))):
        raise ValueError("piece starts must be finite")
    if np.any(~np.isfinite(icpt)) or np.any(~np.isfinite(slope)):
        raise ValueError("piece coefficients must be finite")
    keep = (ends > starts) & (np.any(icpt != 0.0, axis=1) | np.any(slope != 0.0, axis=1))
    starts, ends, icpt, slope = starts[keep], ends[keep], icpt[keep], slope[keep]
    if starts.shape[0] > 1:
        if np.any(np.diff(starts) <= 0) or np.any(ends[:-1] > starts[1:]):
            raise ValueError("pieces must be sorted by start and pairwise disjoint")
    inf_end = np.isinf(ends)
    if np.any(inf_end):
        if np.any(inf_end[:-1]):
            raise ValueError("only the last piece may extend to +inf")
        if np.any(slope[-1] != 0.0):
            raise ValueError("an unbounded piece must be constant")
    fin_end = np.where(inf_end, starts, ends)
    for x in (starts, fin_end):
        val = icpt + slope * x[:, None]
        scale = 1.0 + np.abs(icpt) + np.abs(slope * x[:, None])
        bad = val < -NEG_TOL * scale
        if np.any(bad):
            i, c = np.argwhere(bad)[0]
            raise _negative_error(val[i, c], c, starts[i], ends[i])
    if starts.shape[0] > 1:
        same = (
            (ends[:-1] == starts[1:])
            & np.all(icpt[:-1] == icpt[1:], axis=1)
            & np.all(slope[:-1] == slope[1:], axis=1)
        )
        if np.any(same):
            head = np.concatenate([[True], ~same])
            last = np.concatenate([np.flatnonzero(head)[1:] - 1, [starts.shape[0] - 1]])
            starts, icpt, slope = starts[head], icpt[head], slope[head]
            ends = ends[last]
    return starts.copy(), ends.copy(), icpt.copy(), slope.copy()


class PiecewiseMap:
    """Immutable piecewise constant/affine map with non-negative channels.

    The constructor canonicalises its input: empty pieces and pieces that are
    identically zero are dropped, and adjacent pieces carrying the same line
    are merged, so structural equality is meaningful.
    """

    __slots__ = ("channels", "_starts", "_ends", "_icpt", "_slope", "__dict__")

    def __init__(self, channels: int, starts, ends, intercepts, slopes):
        if int(channels) < 1:
            raise ValueError("channels must be a positive integer")
        k = int(channels)
        starts = np.asarray(starts, dtype=float).reshape(-1)
        ends = np.asarray(ends, dtype=float).reshape(-1)
        m = starts.shape[0]
        icpt = np.asarray(intercepts, dtype=float).reshape(m, k)
        slope = np.asarray(slopes, dtype=float).reshape(m, k)
        if ends.shape[0] != m:
            raise ValueError("starts and ends differ in length")
        # plain Python is faster on the few-piece maps that dominate solver work
        canon = _canonical_rows if m <= SMALL else _canonical_arrays
        starts, ends, icpt, slope = canon(k, starts, ends, icpt, slope)
        for arr in (starts, ends, icpt, slope):
            arr.setflags(write=False)
        self.channels = k
        self._starts = starts
        self._ends = ends
        self._icpt = icpt
        self._slope = slope

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, channels: int = 1) -> "PiecewiseMap":
        return cls(channels, [], [], np.zeros((0, channels)), np.zeros((0, channels)))

    @classmethod
    def constant(cls, start: float, end: float, value=1.0, channels: int | None = None) -> "PiecewiseMap":
        vec = _as_vector(value, channels)
        k = vec.shape[0]
        return cls(k, [start], [end], vec[None, :], np.zeros((1, k)))

    @classmethod
    def affine(cls, start: float, end: float, intercept, slope, channels: int | None = None) -> "PiecewiseMap":
        """The map ``intercept + slope * x`` on ``[start, end)``."""
        ic = _as_vector(intercept, channels)
        sl = _as_vector(slope, ic.shape[0])
        return cls(ic.shape[0], [start], [end], ic[None, :], sl[None, :])

    @classmethod
    def from_pieces(cls, channels: int, pieces: Iterable) -> "PiecewiseMap":
        """Build from ``Piece`` tuples or ``(start, end, intercept, slope)``."""
        pieces = list(pieces)
        k = int(channels)
        if not pieces:
            return cls.zero(k)
        starts = [float(p[0]) for p in pieces]
        ends = [float(p[1]) for p in pieces]
        ic = np.array([_as_vector(p[2], k) for p in pieces])
        sl = np.array([_as_vector(p[3], k) for p in pieces])
        return cls(k, starts, ends, ic, sl)

    @classmethod
    def step(cls, breaks: Sequence[float], values: Sequence, channels: int | None = None) -> "PiecewiseMap":
        """Step map taking ``values[i]`` on ``[breaks[i], breaks[i+1])``."""
        if len(breaks) != len(values) + 1:
            raise ValueError("need len(breaks) == len(values) + 1")
        vecs = [_as_vector(v, channels) for v in values]
        k = channels or (vecs[0].shape[0] if vecs else 1)
        vecs = [_as_vector(v, k) for v in vecs]
        return cls(
            k,
            breaks[:-1],
            breaks[1:],
            np.array(vecs).reshape(-1, k),
            np.zeros((len(vecs), k)),
        )

    # -- accessors --------------------------------------------------------

    @property
    def pieces(self) -> list[Piece]:
        return [
            Piece(float(s), float(e), tuple(map(float, i)), tuple(map(float, sl)))
            for s, e, i, sl in zip(self._starts, self._ends, self._icpt, self._slope)
        ]

    @property
    def n_pieces(self) -> int:
        return int(self._starts.shape[0])

    @property
    def is_zero(self) -> bool:
        return self.n_pieces == 0

    @property
    def is_bounded(self) -> bool:
        return self.n_pieces == 0 or bool(np.isfinite(self._ends[-1]))

    @property
    def support(self) -> tuple[float, float] | None:
        """Closed hull ``(inf, sup)`` of the support, or None for the zero map."""
        if self.is_zero:
            return None
        return float(self._starts[0]), float(self._ends[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([self._starts, self._ends]))

    @cached_property
    def norm(self) -> float:
        if self.n_pieces <= SMALL:
            return _l1_sweep(self._rows, [], self.channels)
        return _integrate_abs(self._starts, self._ends, self._icpt, self._slope)

    @cached_property
    def _rows(self) -> list[tuple[float, float, list[float], list[float]]]:
        return list(zip(self._starts.tolist(), self._ends.tolist(), self._icpt.tolist(), self._slope.tolist()))

    def __call__(self, x) -> np.ndarray:
        """Evaluate at ``x`` (scalar or array); returns shape ``(..., channels)``."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros((flat.shape[0], self.channels))
        if self.n_pieces:
            idx = np.searchsorted(self._starts, flat, side="right") - 1
            ok = idx >= 0
            ci = np.clip(idx, 0, None)
            ok &= flat < self._ends[ci]
            out[ok] = self._icpt[ci[ok]] + self._slope[ci[ok]] * flat[ok, None]
        return out.reshape(x.shape + (self.channels,))

    def __add__(self, other: "PiecewiseMap") -> "PiecewiseMap":
        return pw_add(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PiecewiseMap):
            return NotImplemented
        return (
            self.channels == other.channels
            and np.array_equal(self._starts, other._starts)
            and np.array_equal(self._ends, other._ends)
            and np.array_equal(self._icpt, other._icpt)
            and np.array_equal(self._slope, other._slope)
        )

    def __hash__(self) -> int:
        return hash(
            (self.channels, self._starts.tobytes(), self._ends.tobytes(),
             self._icpt.tobytes(), self._slope.tobytes())
        )

    def __repr__(self) -> str:
        parts = []
        for p in self.pieces:
            if p.kind == "const":
                parts.append(f"{list(p.intercept)}@[{p.start:g},{p.end:g})")
            else:
                parts.append(f"({list(p.intercept)}+{list(p.slope)}t)@[{p.start:g},{p.end:g})")
        return f"PiecewiseMap(k={self.channels}; {' + '.join(parts) or '0'})"

    def __reduce__(self):
        return (
            PiecewiseMap,
            (self.channels, self._starts.copy(), self._ends.copy(),
             self._icpt.copy(), self._slope.copy()),
        )


# -- exact integration ----------------------------------------------------


def _abs_area(lo: float, hi: float, alpha: float, beta: float) -> float:
    """Integral of |alpha + beta x| over [lo, hi)."""
    vp = alpha + beta * lo
    vq = alpha + beta * hi
    if vp * vq >= 0.0:
        return 0.5 * (abs(vp) + abs(vq)) * (hi - lo)
    return 0.5 * (vp * vp + vq * vq) / (abs(vp) + abs(vq)) * (hi - lo)


def _integrate_abs(lo, hi, alpha, beta) -> float:
    """Vectorised sum over intervals and channels of the integral of |alpha + beta x|."""
    if lo.shape[0] == 0:
        return 0.0
    unbounded = np.isinf(hi)
    if np.any(unbounded):
        if np.any(alpha[unbounded] != 0.0) or np.any(beta[unbounded] != 0.0):
            return math.inf
        lo, hi, alpha, beta = lo[~unbounded], hi[~unbounded], alpha[~unbounded], beta[~unbounded]
    width = (hi - lo)[:, None]
    vp = alpha + beta * lo[:, None]
    vq = alpha + beta * hi[:, None]
    ap, aq = np.abs(vp), np.abs(vq)
    same_sign = vp * vq >= 0.0
    denom = np.where(same_sign, 1.0, ap + aq)
    crossing = 0.5 * (vp * vp + vq * vq) / denom
    area = np.where(same_sign, 0.5 * (ap + aq), crossing) * width
    return float(area.sum())


def _l1_sweep(a_rows, b_rows, k: int) -> float:
    """Exact L1 distance between two maps given as sorted piece rows."""
    pts = sorted({x for r in a_rows for x in r[:2]} | {x for r in b_rows for x in r[:2]})
    na, nb = len(a_rows), len(b_rows)
    ia = ib = 0
    total = 0.0
    zero = [0.0] * k
    for lo, hi in zip(pts, pts[1:]):
        while ia < na and a_rows[ia][1] <= lo:
            ia += 1
        while ib < nb and b_rows[ib][1] <= lo:
            ib += 1
        ra = a_rows[ia] if ia < na and a_rows[ia][0] <= lo else None
        rb = b_rows[ib] if ib < nb and b_rows[ib][0] <= lo else None
        if ra is None and rb is None:
            continue
        ica, sla = (ra[2], ra[3]) if ra else (zero, zero)
        icb, slb = (rb[2], rb[3]) if rb else (zero, zero)
        for c in range(k):
            alpha = ica[c] - icb[c]
            beta = sla[c] - slb[c]
            if hi == math.inf:
                if alpha != 0.0 or beta != 0.0:
                    return math.inf
                continue
            total += _abs_area(lo, hi, alpha, beta)
    return total


def _coefficients_on(m: PiecewiseMap, lo: np.ndarray, hi: np.ndarray):
    """Line coefficients of ``m`` on each elementary interval ``[lo, hi)``."""
    n = lo.shape[0]
    ic = np.zeros((n, m.channels))
    sl = np.zeros((n, m.channels))
    if m.n_pieces == 0 or n == 0:
        return ic, sl
    probe = np.where(np.isinf(hi), lo + 1.0, lo + 0.5 * (hi - lo))
    idx = np.searchsorted(m._starts, probe, side="right") - 1
    ci = np.clip(idx, 0, None)
    ok = (idx >= 0) & (probe < m._ends[ci])
    ic[ok] = m._icpt[ci[ok]]
    sl[ok] = m._slope[ci[ok]]
    return ic, sl


def _elementary(*maps: PiecewiseMap):
    pts = np.unique(np.concatenate([np.concatenate([m._starts, m._ends]) for m in maps]))
    return pts[:-1], pts[1:]


def _check_channels(a: PiecewiseMap, b: PiecewiseMap) -> None:
    if a.channels != b.channels:
        raise ValueError(f"channel mismatch: {a.channels} vs {b.channels}")


# -- public operations ----------------------------------------------------


def pw_add(a: PiecewiseMap, b: PiecewiseMap) -> PiecewiseMap:
    """Pointwise per-channel sum."""
    _check_channels(a, b)
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if a.n_pieces + b.n_pieces > SMALL:
        lo, hi = _elementary(a, b)
        ia, sa = _coefficients_on(a, lo, hi)
        ib, sb = _coefficients_on(b, lo, hi)
        return PiecewiseMap(a.channels, lo, hi, ia + ib, sa + sb)
    a_rows, b_rows = a._rows, b._rows
    pts = sorted({x for r in a_rows for x in r[:2]} | {x for r in b_rows for x in r[:2]})
    na, nb = len(a_rows), len(b_rows)
    ia = ib = 0
    zero = [0.0] * a.channels
    starts, ends, icpt, slope = [], [], [], []
    for lo, hi in zip(pts, pts[1:]):
        while ia < na and a_rows[ia][1] <= lo:
            ia += 1
        while ib < nb and b_rows[ib][1] <= lo:
            ib += 1
        ra = a_rows[ia] if ia < na and a_rows[ia][0] <= lo else None
        rb = b_rows[ib] if ib < nb and b_rows[ib][0] <= lo else None
        if ra is None and rb is None:
            continue
        ica, sla = (ra[2], ra[3]) if ra else (zero, zero)
        icb, slb = (rb[2], rb[3]) if rb else (zero, zero)
        starts.append(lo)
        ends.append(hi)
        icpt.append([x + y for x, y in zip(ica, icb)])
        slope.append([x + y for x, y in zip(sla, slb)])
    return PiecewiseMap(a.channels, starts, ends, icpt, slope)


def pw_sum(maps: Iterable[PiecewiseMap], channels: int = 1) -> PiecewiseMap:
    maps = [m for m in maps if not m.is_zero]
    if not maps:
        return PiecewiseMap.zero(channels)
    if len(maps) == 1:
        return maps[0]
    for m in maps[1:]:
        _check_channels(maps[0], m)
    lo, hi = _elementary(*maps)
    ic = np.zeros((lo.shape[0], maps[0].channels))
    sl = np.zeros_like(ic)
    for m in maps:
        i, s = _coefficients_on(m, lo, hi)
        ic += i
        sl += s
    return PiecewiseMap(maps[0].channels, lo, hi, ic, sl)


def pw_scale(a: PiecewiseMap, factor: float) -> PiecewiseMap:
    if factor < 0:
        raise ValueError("scale factor must be non-negative")
    return PiecewiseMap(a.channels, a._starts, a._ends, a._icpt * factor, a._slope * factor)


def pw_l1_distance(a: PiecewiseMap, b: PiecewiseMap) -> float:
    """Exact integral of the summed per-channel absolute difference."""
    _check_channels(a, b)
    if a.is_zero:
        return b.norm
    if b.is_zero:
        return a.norm
    if a.n_pieces + b.n_pieces <= SMALL:
        return _l1_sweep(a._rows, b._rows, a.channels)
    lo, hi = _elementary(a, b)
    ia, sa = _coefficients_on(a, lo, hi)
    ib, sb = _coefficients_on(b, lo, hi)
    return _integrate_abs(lo, hi, ia - ib, sa - sb)


def pw_norm(a: PiecewiseMap) -> float:
    return a.norm


def pw_restrict(a: PiecewiseMap, lo: float = -math.inf, hi: float = math.inf) -> PiecewiseMap:
    """``a`` on ``[lo, hi)``, zero elsewhere."""
    if a.is_zero:
        return a
    starts = np.maximum(a._starts, lo)
    ends = np.minimum(a._ends, hi)
    return PiecewiseMap(a.channels, starts, ends, a._icpt, a._slope)


def pw_truncate(a: PiecewiseMap, height: float) -> PiecewiseMap:
    """``a`` below ``height`` and zero on ``[height, inf)``."""
    return pw_restrict(a, -math.inf, height)


# -- axiom checker --------------------------------------------------------


@dataclass(frozen=True)
class EditableAxiomsReport:
    p1_metric_ok: bool
    p2_monoid_ok: bool
    p3_norm_additive_ok: bool
    p4_translation_invariant_ok: bool
    max_violation: float

    @property
    def ok(self) -> bool:
        return (
            self.p1_metric_ok
            and self.p2_monoid_ok
            and self.p3_norm_additive_ok
            and self.p4_translation_invariant_ok
        )


def pw_check_axioms(
    samples: Sequence[PiecewiseMap],
    tolerance: float = 1e-9,
    max_checks: int = 20000,
    seed: int = 0,
) -> EditableAxiomsReport:
    """Check metric, monoid, norm additivity and translation invariance.

    The zero map is always added to the samples.  All pairs and triples are
    checked when there are at most ``max_checks`` of them; otherwise
    ``max_checks`` of each are drawn with a seeded generator, always
    including every sample at least once.
    """
    samples = list(samples)
    k = samples[0].channels if samples else 1
    zero = PiecewiseMap.zero(k)
    pool = [zero] + [s for s in samples if not s.is_zero]
    n = len(pool)
    rng = np.random.default_rng(seed)

    def index_tuples(r: int) -> np.ndarray:
        if n**r <= max_checks:
            return np.array(list(itertools.product(range(n), repeat=r))).reshape(-1, r)
        drawn = rng.integers(0, n, size=(max_checks, r))
        drawn[:n, 0] = np.arange(n)[: min(n, max_checks)]
        return drawn

    dist_cache: dict[tuple[int, int], float] = {}
    sum_cache: dict[tuple[int, int], PiecewiseMap] = {}

    def dist(i: int, j: int) -> float:
        if (i, j) not in dist_cache:
            dist_cache[i, j] = pw_l1_distance(pool[i], pool[j])
        return dist_cache[i, j]

    def add(i: int, j: int) -> PiecewiseMap:
        if (i, j) not in sum_cache:
            sum_cache[i, j] = pw_add(pool[i], pool[j])
        return sum_cache[i, j]

    p1 = p2 = p3 = p4 = 0.0
    for i in range(n):
        p1 = max(p1, abs(dist(i, i)))
        p2 = max(p2, pw_l1_distance(add(i, 0), pool[i]), pw_l1_distance(add(0, i), pool[i]))
    for i, j in index_tuples(2):
        i, j = int(i), int(j)
        p1 = max(p1, abs(dist(i, j) - dist(j, i)), -dist(i, j))
        p3 = max(p3, abs(add(i, j).norm - pool[i].norm - pool[j].norm))
        p2 = max(p2, pw_l1_distance(add(i, j), add(j, i)))
    for a, b, c in index_tuples(3):
        a, b, c = int(a), int(b), int(c)
        p1 = max(p1, dist(a, c) - dist(a, b) - dist(b, c))
        lhs = pw_add(add(a, b), pool[c])
        rhs = pw_add(pool[a], add(b, c))
        p2 = max(p2, pw_l1_distance(lhs, rhs))
        p4 = max(p4, abs(pw_l1_distance(add(c, a), add(c, b)) - dist(a, b)))

    return EditableAxiomsReport(
        p1_metric_ok=bool(p1 <= tolerance),
        p2_monoid_ok=bool(p2 <= tolerance),
        p3_norm_additive_ok=bool(p3 <= tolerance),
        p4_translation_invariant_ok=bool(p4 <= tolerance),
        max_violation=float(max(p1, p2, p3, p4)),
    )
