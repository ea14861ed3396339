"""``treedist`` command line.

Exit codes: 0 on success, 2 when an input fails validation, 1 on I/O or
internal errors.  All randomness comes from ``numpy.random.default_rng``
(PCG64) seeded by ``--seed``.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io as tio
from .builders import (
    cardinality_weights,
    merge_tree_from_field,
    single_linkage,
    sublevel_measure_weights,
    truncate_dendrogram,
    unit_weights,
    betti_weights,
)
from .distance import edit_distance
from .editable import PiecewiseMap, pw_check_axioms
from .experiments import (
    ClusterConfig,
    SineConfig,
    default_jobs,
    distance_matrix,
    heatmap_svg,
    run_clusters,
    run_sines,
    upper_tri_correlation,
)
from .pruning import calibrate_epsilon, prune
from .trees import Dendrogram, MergeTree, TreeError, validate


class ValidationFailure(Exception):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


def _load_valid(path) -> Dendrogram:
    d = tio.load_dendrogram(path)
    problems = validate(d)
    if problems:
        raise ValidationFailure([f"{path}: {p}" for p in problems])
    return d


def _emit_dendrogram(d: Dendrogram, out) -> None:
    if out:
        tio.save_dendrogram(d, out)
    else:
        print(json.dumps(tio.dendrogram_to_json(d), indent=1))


def _merge_tree_of(d: Dendrogram) -> MergeTree:
    if d.heights is None:
        raise ValidationFailure(["decorate needs a dendrogram with vertex heights"])
    return MergeTree(d.structure, dict(d.heights))


# -- subcommands ----------------------------------------------------------


def cmd_build_field(args) -> int:
    f = tio.load_field(args.field)
    if args.theta == "L":
        d = sublevel_measure_weights(f, normalize=args.normalize)
    else:
        d = unit_weights(merge_tree_from_field(f))
    if args.truncate is not None:
        d = truncate_dendrogram(d, args.truncate)
    _emit_dendrogram(d, args.out)
    return 0


def cmd_build_cloud(args) -> int:
    c = tio.load_cloud(args.cloud)
    tree = single_linkage(c)
    if args.theta == "c":
        d = cardinality_weights(c, tree, normalize=args.normalize)
    else:
        d = unit_weights(tree)
    if args.truncate is not None:
        d = truncate_dendrogram(d, args.truncate)
    _emit_dendrogram(d, args.out)
    return 0


def cmd_decorate(args) -> int:
    tree = _merge_tree_of(tio.load_dendrogram(args.tree))
    if args.theta == "1":
        d = unit_weights(tree, args.truncate)
    else:
        if not args.betti:
            raise ValidationFailure(["--theta betti needs --betti TABLE.json"])
        d = betti_weights(tree, tio.read_json(args.betti), args.truncate)
    _emit_dendrogram(d, args.out)
    return 0


def cmd_truncate(args) -> int:
    _emit_dendrogram(truncate_dendrogram(_load_valid(args.dendrogram), args.K), args.out)
    return 0


def cmd_prune(args) -> int:
    d = _load_valid(args.dendrogram)
    eps = args.prune_eps
    if eps is None:
        eps = calibrate_epsilon([d], args.prune_target_pe, args.seed)
    r = prune(d, eps, args.seed)
    _emit_dendrogram(r.pruned, args.out)
    print(
        json.dumps({"epsilon": eps, "removed_leaves": list(r.removed_leaves), "pruning_error": r.pruning_error}),
        file=sys.stderr,
    )
    return 0


def cmd_distance(args) -> int:
    a, b = _load_valid(args.a), _load_valid(args.b)
    dist, plan = edit_distance(a, b)
    if args.plan:
        tio.write_json(tio.plan_to_json(plan), args.plan)
    print(repr(dist))
    return 0


def _labelled_dir(folder: Path) -> list[tuple[str, Dendrogram]]:
    files = sorted(folder.glob("*.json"))
    if not files:
        raise FileNotFoundError(f"{folder}: no *.json dendrograms")
    return [(p.stem, _load_valid(p)) for p in files]


def _write_matrix(m, out, svg) -> None:
    if out:
        tio.save_matrix(m, out)
    else:
        print("\n".join(",".join([lab] + [repr(float(v)) for v in row]) for lab, row in zip(m.labels, m.values)))
    if svg:
        heatmap_svg(m, svg)


def cmd_matrix(args) -> int:
    m = distance_matrix(_labelled_dir(Path(args.folder)), jobs=args.jobs)
    _write_matrix(m, args.out, args.svg)
    return 0


def _summary(obj: dict, out_dir: Path | None) -> None:
    text = json.dumps(obj, indent=1)
    if out_dir:
        (out_dir / "summary.json").write_text(text + "\n")
    print(text)


def cmd_simulate_clusters(args) -> int:
    cfg = ClusterConfig(
        n_clouds=args.n_clouds,
        n_points=args.n_points,
        seed=args.seed,
        prune_epsilon=args.prune_eps,
        target_pruning_error=args.prune_target_pe,
    )
    r = run_clusters(cfg, jobs=args.jobs)
    out = Path(args.out_dir) if args.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        tio.save_matrix(r.matrix, out / "clusters_matrix.csv")
        heatmap_svg(r.matrix, out / "clusters_matrix.svg")
    _summary(
        {
            "config": asdict(cfg),
            "epsilon": r.epsilon,
            "mean_pruning_error": r.mean_pruning_error,
            "mean_between_class2_and_rest": r.between,
            "mean_within_classes_1_3": r.within,
        },
        out,
    )
    return 0


def cmd_simulate_sines(args) -> int:
    cfg = SineConfig(n_units=args.n_units, grid_step=args.grid_step, seed=args.seed)
    r = run_sines(cfg, jobs=args.jobs)
    out = Path(args.out_dir) if args.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        for name, m in (
            ("dendrogram", r.dendrogram_matrix),
            ("warping", r.warping_matrix),
            ("naive_l2", r.naive_matrix),
        ):
            tio.save_matrix(m, out / f"sines_{name}.csv")
            heatmap_svg(m, out / f"sines_{name}.svg")
    _summary(
        {
            "config": asdict(cfg),
            "dendrogram_vs_warping": r.dendrogram_correlation,
            "naive_l2_vs_warping": r.naive_correlation,
        },
        out,
    )
    return 0


def cmd_correlate(args) -> int:
    print(repr(upper_tri_correlation(tio.load_matrix(args.m1), tio.load_matrix(args.m2))))
    return 0


def random_map(rng: np.random.Generator, max_pieces: int = 4) -> PiecewiseMap:
    k = int(rng.integers(1, max_pieces + 1))
    breaks = np.sort(rng.uniform(-5.0, 5.0, size=k + 1))
    pieces = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        a, b = rng.uniform(0.0, 3.0, size=2)
        slope = (b - a) / (hi - lo)
        pieces.append((lo, hi, a - slope * lo, slope))
    return PiecewiseMap.from_pieces(1, pieces)


def cmd_check_axioms(args) -> int:
    rng = np.random.default_rng(args.seed)
    samples = [random_map(rng) for _ in range(args.samples)]
    report = pw_check_axioms(samples, args.tolerance)
    print(json.dumps(asdict(report)))
    if not report.ok:
        raise ValidationFailure([f"axioms violated, max violation {report.max_violation:.3g}"])
    return 0


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treedist", description="Edit distance between decorated merge trees.")
    sub = p.add_subparsers(dest="command", required=True)

    def out_flag(sp):
        sp.add_argument("--out", help="output file (default: stdout)")

    sp = sub.add_parser("build-field", help="dendrogram of a sampled 1-d field (CSV x,y)")
    sp.add_argument("field")
    sp.add_argument("--theta", choices=["L", "1"], default="L", help="sublevel measure or unit weights")
    sp.add_argument("--normalize", action="store_true", help="divide measures by the domain length")
    sp.add_argument("--truncate", type=float, metavar="K")
    out_flag(sp)
    sp.set_defaults(func=cmd_build_field)

    sp = sub.add_parser("build-cloud", help="single-linkage dendrogram of a point cloud CSV")
    sp.add_argument("cloud")
    sp.add_argument("--theta", choices=["c", "1"], default="c", help="cluster cardinality or unit weights")
    sp.add_argument("--normalize", action="store_true", help="divide cardinalities by the cloud size")
    sp.add_argument("--truncate", type=float, metavar="K")
    out_flag(sp)
    sp.set_defaults(func=cmd_build_cloud)

    sp = sub.add_parser("decorate", help="replace the weights of a merge tree with heights")
    sp.add_argument("tree")
    sp.add_argument("--theta", choices=["1", "betti"], default="1")
    sp.add_argument("--betti", help="JSON table: vertex id -> Betti vector or {'steps': [[h, vec], ...]}")
    sp.add_argument("--truncate", type=float, metavar="K")
    out_flag(sp)
    sp.set_defaults(func=cmd_decorate)

    sp = sub.add_parser("truncate", help="restrict the root-edge weight below K")
    sp.add_argument("dendrogram")
    sp.add_argument("K", type=float)
    out_flag(sp)
    sp.set_defaults(func=cmd_truncate)

    sp = sub.add_parser("prune", help="remove small leaves")
    sp.add_argument("dendrogram")
    sp.add_argument("--prune-eps", type=float)
    sp.add_argument("--prune-target-pe", type=float, default=0.15)
    sp.add_argument("--seed", type=int, default=0)
    out_flag(sp)
    sp.set_defaults(func=cmd_prune)

    sp = sub.add_parser("distance", help="edit distance between two dendrogram files")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("--plan", help="write the optimal edit plan as JSON")
    sp.set_defaults(func=cmd_distance)

    sp = sub.add_parser("matrix", help="pairwise distances of every *.json in a folder")
    sp.add_argument("folder")
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--svg")
    out_flag(sp)
    sp.set_defaults(func=cmd_matrix)

    sp = sub.add_parser("simulate-clusters", help="Gaussian cloud experiment")
    sp.add_argument("--n-clouds", type=int, default=12)
    sp.add_argument("--n-points", type=int, default=45)
    sp.add_argument("--prune-eps", type=float)
    sp.add_argument("--prune-target-pe", type=float, default=0.15)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_simulate_clusters)

    sp = sub.add_parser("simulate-sines", help="warped sine experiment")
    sp.add_argument("--n-units", type=int, default=24)
    sp.add_argument("--grid-step", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_simulate_sines)

    sp = sub.add_parser("correlate", help="Pearson correlation of two matrices' upper triangles")
    sp.add_argument("m1")
    sp.add_argument("m2")
    sp.set_defaults(func=cmd_correlate)

    sp = sub.add_parser("check-axioms", help="check the editable-space axioms on random maps")
    sp.add_argument("--samples", type=int, default=40)
    sp.add_argument("--tolerance", type=float, default=1e-9)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_check_axioms)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 0) is None:
        args.jobs = default_jobs()
    try:
        return args.func(args)
    except ValidationFailure as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return 2
    except (tio.SchemaError, TreeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
