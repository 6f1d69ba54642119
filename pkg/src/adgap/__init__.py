"""Exact oracles and experiments for the adaptivity gap of influence maximization
under the independent cascade model with full-adoption feedback."""
from .cascade_engine import (
    LiveEdgeGraph,
    SpreadEstimate,
    enumerate_live_edges,
    per_node_activation,
    reachable,
    sample_live_edges,
    spread_exact,
    spread_mc,
)
from .exact_oracles import (
    OptResult,
    applicable_gap_bound,
    bipartite_Fu_closed_form,
    eq15_inequality_check,
    lemma41_upper_bound,
    multilinear_exact,
    multilinear_node_exact,
    opt_a_exact,
    opt_a_naive,
    opt_n_exact,
    telescoping_identity_check,
    weak_concavity_check,
)
from .feedback_model import (
    EdgeState,
    PartialRealization,
    active_set,
    boundary,
    conditional_marginal_gain,
    observe,
    realize,
)
from .gap_lab import (
    GapReport,
    invariant_suite,
    lower_bound_experiment,
    measure_gap,
    multilinear_ratio_experiment,
    random_walk_ratio_experiment,
)
from .graph_model import (
    GraphError,
    GraphKind,
    InfluenceGraph,
    load_graph,
    make_line_instance,
    random_family,
    reach_prob_path,
    save_graph,
    validate_kind,
)
from .policy_suite import (
    Policy,
    adaptive_greedy_policy,
    front_policy,
    independent_rounding_policy,
    nonadaptive_greedy,
    poisson_process_run,
    random_walk_transform,
)
from .reports import Report
from .runtime import CapExceeded

__version__ = "0.1.0"
