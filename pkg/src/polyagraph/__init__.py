"""Preferential attachment graphs with i.i.d. out-degrees, their exact
Polya-urn representations, and the Polya point tree that describes their
local limit.

Public surface: model parameters (params), sequential graph generators
(generators), urn constructions (urn), limit-tree sampling (point_tree),
neighborhood extraction and pattern counting (neighborhoods), exact
small-graph probabilities (exact), and statistical analytics (analytics).
"""

from .analytics import (
    AgeDensity,
    DegreeLaw,
    DensityEstimate,
    TailFit,
    build_degree_law,
    couple_D_E,
    couple_D_F,
    coupled_mismatch_fractions,
    coupling_tv_bound,
    coupling_tv_envelope,
    empirical_older_neighbor_law,
    empirical_root_degree_law,
    empirical_survival,
    empirical_younger_neighbor_law,
    fit_log_log_slope,
    mixed_poisson_pmf,
    no_further_edge_factor,
    older_neighbor_pmf,
    root_degree_pmf,
    rppt_tree_density,
    total_variation,
    write_coupling_report,
    write_degree_law_table,
    younger_neighbor_pmf,
)
from .errors import ParameterError, ResourceError, TruncationError
from .exact import (
    GraphEvent,
    enumerate_feasible,
    pre_image_family,
    prob_model_A_closed,
    prob_model_B_closed,
    prob_model_D_closed,
    prob_pu_closed,
    write_equivalence_report,
)
from .generators import EvolvingGraph, generate, generate_batch
from .neighborhoods import (
    RootedNeighborhood,
    TreePattern,
    ahu_signature,
    count_patterns,
    extract_ball,
    load_pattern,
    rooted_isomorphic,
    save_pattern,
    two_ball_disjointness,
    write_pattern_counts,
)
from .params import (
    DerivedConstants,
    ModelSpec,
    OutDegreeLaw,
    derive_constants,
    lambda_fn,
    parse_degree_dist,
    sample_out_degrees,
    stream,
)
from .point_tree import (
    MarkedTree,
    RpptNode,
    UlamHarrisLabel,
    regularity_report,
    sample_poisson_ages,
    sample_rppt,
    sample_rppt_forest,
)
from .urn import BetaSchedule, CollapseMap, UrnState, build_cpu, build_pu, collapse

__version__ = "0.1.0"

__all__ = [
    "ParameterError",
    "ResourceError",
    "TruncationError",
    "OutDegreeLaw",
    "ModelSpec",
    "DerivedConstants",
    "derive_constants",
    "lambda_fn",
    "parse_degree_dist",
    "sample_out_degrees",
    "stream",
    "EvolvingGraph",
    "generate",
    "generate_batch",
    "BetaSchedule",
    "CollapseMap",
    "UrnState",
    "build_pu",
    "build_cpu",
    "collapse",
    "UlamHarrisLabel",
    "RpptNode",
    "MarkedTree",
    "sample_rppt",
    "sample_rppt_forest",
    "sample_poisson_ages",
    "regularity_report",
    "RootedNeighborhood",
    "TreePattern",
    "extract_ball",
    "rooted_isomorphic",
    "ahu_signature",
    "count_patterns",
    "write_pattern_counts",
    "save_pattern",
    "load_pattern",
    "two_ball_disjointness",
    "GraphEvent",
    "enumerate_feasible",
    "pre_image_family",
    "prob_model_A_closed",
    "prob_model_B_closed",
    "prob_model_D_closed",
    "prob_pu_closed",
    "write_equivalence_report",
    "AgeDensity",
    "DegreeLaw",
    "DensityEstimate",
    "TailFit",
    "build_degree_law",
    "couple_D_E",
    "couple_D_F",
    "coupled_mismatch_fractions",
    "coupling_tv_bound",
    "coupling_tv_envelope",
    "empirical_older_neighbor_law",
    "empirical_root_degree_law",
    "empirical_survival",
    "empirical_younger_neighbor_law",
    "fit_log_log_slope",
    "mixed_poisson_pmf",
    "no_further_edge_factor",
    "older_neighbor_pmf",
    "root_degree_pmf",
    "rppt_tree_density",
    "total_variation",
    "write_coupling_report",
    "write_degree_law_table",
    "younger_neighbor_pmf",
    "__version__",
]
