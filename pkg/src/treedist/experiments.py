"""Synthetic data sets, distance matrices and the evaluation pipelines.

Three pipelines are provided:

* ``run_clusters``: Gaussian point clouds, cardinality weights normalised by
  cloud size, binarised and pruned, compared by ``d_E``;
* ``run_sines``: warped sine waves decorated with sublevel measures, with
  the ``d_E`` matrix correlated against the distance between the warps;
* ``run_stability``: noisy copies of a sine checked against the
  ``2 eps (rank + rank)`` bound.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import truncnorm

from .builders import (
    PointCloud,
    ScalarField1D,
    cardinality_weights,
    merge_tree_from_field,
    single_linkage,
    sublevel_measure_weights,
    unit_weights,
)
from .distance import StabilityReport, edit_distance, stability_check
from .pruning import calibrate_epsilon, prune
from .trees import Dendrogram, binarize

__all__ = [
    "ClusterConfig",
    "SineConfig",
    "StabilityConfig",
    "DistanceMatrix",
    "WarpedSine",
    "gen_gaussian_clouds",
    "gen_warped_sines",
    "distance_matrix",
    "upper_tri_correlation",
    "heatmap_svg",
    "warping_matrix",
    "naive_l2_matrix",
    "run_clusters",
    "run_sines",
    "run_stability",
]


# -- configs --------------------------------------------------------------


@dataclass(frozen=True)
class ClusterConfig:
    n_clouds: int = 12
    n_points: int = 45
    centres: tuple[tuple[float, float], ...] = ((5.0, 0.0), (-5.0, 0.0), (-10.0, 0.0))
    variance: float = 0.5
    seed: int = 0
    prune_epsilon: float | None = None
    target_pruning_error: float = 0.15

    def __post_init__(self):
        if self.n_clouds < 3 or self.n_points < 3:
            raise ValueError("need at least 3 clouds and 3 points per cloud")

    @classmethod
    def full(cls, seed: int = 0) -> "ClusterConfig":
        return cls(n_clouds=30, n_points=150, seed=seed)


@dataclass(frozen=True)
class SineConfig:
    n_units: int = 24
    n_control: int = 10
    interval: float = 30.0
    class_means: tuple[float, float] = (3.0, 5.0)
    sd: float = 2.0
    grid_step: float = 0.05
    truncation: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_units < 2 or self.n_control < 1:
            raise ValueError("need at least 2 units and 1 control point")

    @classmethod
    def full(cls, seed: int = 0) -> "SineConfig":
        return cls(n_units=100, seed=seed)


@dataclass(frozen=True)
class StabilityConfig:
    epsilons: tuple[float, ...] = (0.02, 0.05, 0.1)
    trials: int = 17
    interval: float = 30.0
    grid_step: float = 0.2
    seed: int = 0


# -- generators -----------------------------------------------------------


def _split(n: int, parts: int) -> list[int]:
    base, extra = divmod(n, parts)
    return [base + (1 if i >= parts - extra else 0) for i in range(parts)]


def gen_gaussian_clouds(config: ClusterConfig) -> list[tuple[str, PointCloud]]:
    """Three classes of 2-d clouds, labelled ``"<class>:<index>"``.

    Class 1 mixes two Gaussians at the first two centres, class 2 all three,
    class 3 is class 1 plus one outlier at the third centre.
    """
    rng = np.random.default_rng(config.seed)
    cov = config.variance * np.eye(2)
    centres = [np.asarray(c, float) for c in config.centres]
    out = []
    for cls, count in zip((1, 2, 3), _split(config.n_clouds, 3)):
        for k in range(count):
            if cls == 2:
                sizes, used = _split(config.n_points, 3), centres
            else:
                sizes, used = _split(config.n_points, 2), centres[:2]
            blobs = [rng.multivariate_normal(c, cov, size=s) for c, s in zip(used, sizes)]
            if cls == 3:
                blobs.append(centres[2][None, :])
            out.append((f"{cls}:{k}", PointCloud(np.vstack(blobs))))
    return out


@dataclass(frozen=True, eq=False)
class WarpedSine:
    label: str
    field: ScalarField1D
    knots_x: np.ndarray
    knots_y: np.ndarray

    def warp(self, x):
        return PchipInterpolator(self.knots_x, self.knots_y)(x)


def _inverse(fn, y: np.ndarray, lo: float, hi: float, iterations: int = 60) -> np.ndarray:
    """Vectorised bisection for an increasing ``fn``."""
    a = np.full_like(y, lo)
    b = np.full_like(y, hi)
    for _ in range(iterations):
        m = 0.5 * (a + b)
        below = fn(m) < y
        a = np.where(below, m, a)
        b = np.where(below, b, m)
    return 0.5 * (a + b)


def gen_warped_sines(config: SineConfig) -> list[WarpedSine]:
    """``sin`` composed with the inverse of a random monotone warp.

    Increments between control points are drawn from a Gaussian truncated to
    positive values; units alternate between the two class means.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_control
    step = config.interval / n
    xs = np.arange(n + 1) * step
    out = []
    for cls, count in zip((1, 2), _split(config.n_units, 2)):
        mean = config.class_means[cls - 1]
        dist = truncnorm((0.0 - mean) / config.sd, np.inf, loc=mean, scale=config.sd)
        for k in range(count):
            v = dist.rvs(size=n, random_state=rng)
            ys = np.concatenate([[0.0], np.cumsum(v)])
            warp = PchipInterpolator(xs, ys)
            top = float(ys[-1])
            grid = np.arange(0.0, top + 1e-12, config.grid_step)
            if grid[-1] < top:
                grid = np.append(grid, top)
            pre = _inverse(warp, grid, 0.0, config.interval)
            field_ = ScalarField1D(grid, np.sin(pre))
            out.append(WarpedSine(f"{cls}:{k}", field_, xs, ys))
    return out


# -- matrices -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, float)
        n = len(self.labels)
        if v.shape != (n, n):
            raise ValueError(f"matrix shape {v.shape} does not match {n} labels")
        if not np.allclose(v, v.T, rtol=0, atol=1e-9):
            raise ValueError("distance matrix is not symmetric")
        if np.any(np.diag(v) != 0) or np.any(v < 0):
            raise ValueError("distance matrix needs a zero diagonal and non-negative entries")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    def block_mean(self, rows: Sequence[int], cols: Sequence[int]) -> float:
        """Mean over pairs ``i != j`` with ``i`` in ``rows`` and ``j`` in ``cols``."""
        vals = [self.values[i, j] for i in rows for j in cols if i != j]
        return float(np.mean(vals))


def _pair_distance(args) -> float:
    i, j, a, b = args
    try:
        return edit_distance(a, b)[0]
    except Exception as exc:
        raise RuntimeError(f"distance between items {i} and {j} failed: {exc}") from exc


def default_jobs() -> int:
    return max(1, int(os.environ.get("TREEDIST_JOBS", "1")))


def distance_matrix(
    dendrograms: Sequence[tuple[str, Dendrogram]], jobs: int | None = None
) -> DistanceMatrix:
    """Pairwise ``d_E`` over the upper triangle; ``jobs > 1`` uses processes."""
    labels = [lab for lab, _ in dendrograms]
    trees = [d for _, d in dendrograms]
    n = len(trees)
    tasks = [(i, j, trees[i], trees[j]) for i in range(n) for j in range(i + 1, n)]
    jobs = default_jobs() if jobs is None else jobs
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_pair_distance, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_pair_distance(t) for t in tasks]
    values = np.zeros((n, n))
    for (i, j, _, _), r in zip(tasks, results):
        values[i, j] = values[j, i] = r
    return DistanceMatrix(tuple(labels), values)


def upper_tri_correlation(m1: DistanceMatrix, m2: DistanceMatrix) -> float:
    """Pearson correlation of the strictly upper triangles."""
    if m1.labels != m2.labels:
        raise ValueError("matrices have different labels")
    iu = np.triu_indices(len(m1), k=1)
    x, y = m1.values[iu], m2.values[iu]
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("correlation undefined: an upper triangle is constant")
    return float(np.corrcoef(x, y)[0, 1])


def warping_matrix(units: Sequence[WarpedSine], interval: float = 30.0, samples: int = 3001) -> DistanceMatrix:
    """L2 distance between warps on ``[0, interval]``."""
    xs = np.linspace(0.0, interval, samples)
    ws = np.array([u.warp(xs) for u in units])
    return _l2_matrix([u.label for u in units], ws, xs)


def naive_l2_matrix(units: Sequence[WarpedSine], samples: int = 1024) -> DistanceMatrix:
    """L2 distance between fields on a common grid, extended by zero."""
    top = max(u.field.xs[-1] for u in units)
    lo = min(u.field.xs[0] for u in units)
    xs = np.linspace(lo, top, samples)
    vals = []
    for u in units:
        f = u.field
        v = np.interp(xs, f.xs, f.ys)
        v[(xs < f.xs[0]) | (xs > f.xs[-1])] = 0.0
        vals.append(v)
    return _l2_matrix([u.label for u in units], np.array(vals), xs)


def _l2_matrix(labels, values: np.ndarray, xs: np.ndarray) -> DistanceMatrix:
    n = len(labels)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = math.sqrt(np.trapezoid((values[i] - values[j]) ** 2, xs))
    return DistanceMatrix(tuple(labels), out)


def heatmap_svg(m: DistanceMatrix, path: str | os.PathLike, cell: int = 12) -> Path:
    """Grayscale heatmap, black for the largest entry, white for zero."""
    n = len(m)
    top = float(m.values.max()) if n else 0.0
    size = n * cell
    rows = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}" shape-rendering="crispEdges">'
    ]
    for i in range(n):
        for j in range(n):
            level = 255 - int(round(255 * m.values[i, j] / top)) if top > 0 else 255
            rows.append(
                f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                f'fill="rgb({level},{level},{level})"><title>{m.labels[i]} / {m.labels[j]}</title></rect>'
            )
    rows.append("</svg>\n")
    out = Path(path)
    out.write_text("\n".join(rows))
    return out


# -- pipelines ------------------------------------------------------------


def _class_of(label: str) -> int:
    return int(label.split(":", 1)[0])


@dataclass
class ClusterResult:
    config: ClusterConfig
    matrix: DistanceMatrix
    epsilon: float
    pruning_errors: list[float]
    truncation: float
    between: float = field(init=False)
    within: float = field(init=False)

    def __post_init__(self):
        classes = [_class_of(lab) for lab in self.matrix.labels]
        two = [i for i, c in enumerate(classes) if c == 2]
        rest = [i for i, c in enumerate(classes) if c != 2]
        self.between = self.matrix.block_mean(two, rest)
        self.within = self.matrix.block_mean(rest, rest)

    @property
    def mean_pruning_error(self) -> float:
        return float(np.mean(self.pruning_errors))


def cluster_dendrograms(config: ClusterConfig):
    """Decorated, binarised and pruned dendrograms plus pruning diagnostics."""
    clouds = gen_gaussian_clouds(config)
    trees = [(lab, single_linkage(c)) for lab, c in clouds]
    K = max(t.max_height for _, t in trees)
    binary = [
        (lab, binarize(cardinality_weights(c, t, normalize=True, K=K)))
        for (lab, c), (_, t) in zip(clouds, trees)
    ]
    eps = config.prune_epsilon
    if eps is None:
        eps = calibrate_epsilon([d for _, d in binary], config.target_pruning_error, config.seed)
    pruned = [(lab, prune(d, eps, config.seed)) for lab, d in binary]
    return [(lab, r.pruned) for lab, r in pruned], eps, [r.pruning_error for _, r in pruned], K


def run_clusters(config: ClusterConfig = ClusterConfig(), jobs: int | None = None) -> ClusterResult:
    dendrograms, eps, errors, K = cluster_dendrograms(config)
    return ClusterResult(config, distance_matrix(dendrograms, jobs), eps, errors, K)


@dataclass
class SineResult:
    config: SineConfig
    dendrogram_matrix: DistanceMatrix
    warping_matrix: DistanceMatrix
    naive_matrix: DistanceMatrix

    @property
    def dendrogram_correlation(self) -> float:
        return upper_tri_correlation(self.dendrogram_matrix, self.warping_matrix)

    @property
    def naive_correlation(self) -> float:
        return upper_tri_correlation(self.naive_matrix, self.warping_matrix)


def sine_dendrograms(units: Sequence[WarpedSine], K: float) -> list[tuple[str, Dendrogram]]:
    return [(u.label, sublevel_measure_weights(u.field, K=K)) for u in units]


def run_sines(config: SineConfig = SineConfig(), jobs: int | None = None) -> SineResult:
    units = gen_warped_sines(config)
    dm = distance_matrix(sine_dendrograms(units, config.truncation), jobs)
    return SineResult(config, dm, warping_matrix(units, config.interval), naive_l2_matrix(units))


def noisy_sine_pair(
    interval: float, step: float, epsilon: float, rng: np.random.Generator
) -> tuple[ScalarField1D, ScalarField1D]:
    """``sin`` and a copy with iid uniform noise in ``[-eps, eps]`` at every sample."""
    xs = np.arange(0.0, interval + 1e-12, step)
    ys = np.sin(xs)
    noise = rng.uniform(-epsilon, epsilon, size=xs.size)
    return ScalarField1D(xs, ys), ScalarField1D(xs, ys + noise)


def run_stability(config: StabilityConfig = StabilityConfig()) -> list[StabilityReport]:
    rng = np.random.default_rng(config.seed)
    reports = []
    for eps in config.epsilons:
        for _ in range(config.trials):
            f, g = noisy_sine_pair(config.interval, config.grid_step, eps, rng)
            mf, mg = merge_tree_from_field(f), merge_tree_from_field(g)
            K = max(mf.max_height, mg.max_height)
            reports.append(stability_check(unit_weights(mf, K), unit_weights(mg, K), eps))
    return reports
