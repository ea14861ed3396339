"""Edit distance between merge trees decorated with L1 weight functions."""
from .builders import (
    PointCloud,
    ScalarField1D,
    betti_weights,
    cardinality_weights,
    merge_tree_from_field,
    single_linkage,
    sublevel_measure_weights,
    truncate_dendrogram,
    unit_weights,
)
from .distance import (
    EditPlan,
    MatchedChain,
    StabilityReport,
    brute_force_distance,
    edit_distance,
    plan_cost,
    stability_check,
)
from .editable import (
    PiecewiseMap,
    pw_add,
    pw_check_axioms,
    pw_l1_distance,
    pw_norm,
    pw_truncate,
)
from .pruning import PruningResult, calibrate_epsilon, prune, pruning_error
from .trees import (
    Dendrogram,
    MergeTree,
    TreeError,
    TreeStructure,
    binarize,
    canonicalize,
    delete_edge,
    display_distance,
    ghost_vertex,
    split_edge,
    tree_norm,
    validate,
)

__all__ = [
    "betti_weights",
    "binarize",
    "brute_force_distance",
    "calibrate_epsilon",
    "canonicalize",
    "cardinality_weights",
    "delete_edge",
    "Dendrogram",
    "display_distance",
    "edit_distance",
    "EditPlan",
    "ghost_vertex",
    "MatchedChain",
    "merge_tree_from_field",
    "MergeTree",
    "PiecewiseMap",
    "plan_cost",
    "PointCloud",
    "prune",
    "pruning_error",
    "PruningResult",
    "pw_add",
    "pw_check_axioms",
    "pw_l1_distance",
    "pw_norm",
    "pw_truncate",
    "ScalarField1D",
    "single_linkage",
    "split_edge",
    "stability_check",
    "StabilityReport",
    "sublevel_measure_weights",
    "tree_norm",
    "TreeError",
    "TreeStructure",
    "truncate_dendrogram",
    "unit_weights",
    "validate",
]

__version__ = "0.1.0"
