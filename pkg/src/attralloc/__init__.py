"""Budget-constrained sample allocation for multi-attribute selection.

A decision maker must pick the best of m alternatives described by k
integer-valued attributes, observing attributes only through noisy
integer samples under a fixed sampling budget. This package provides
the discrete Bayesian belief machinery, uniform and one-step-lookahead
allocation policies (with hybrids between them), benchmark problem
sets, and a replication harness with statistical comparisons.
"""

from .pmf import (
    ErrorModel,
    Pmf,
    ZeroLikelihood,
    bayes_update,
    cdf_at,
    cdf_below,
    expectation,
    predictive_sample_dist,
)
from .preference import (
    UTILITY_KINDS,
    VALUE_KINDS,
    OutOfRange,
    UtilityFunctionSpec,
    ValueFunctionSpec,
    ValueLattice,
    best_alternatives,
    enumerate_utility_distribution,
    single_attr_value,
    true_utility,
    utility,
    utility_distribution,
    value,
)
from .belief import (
    BeliefState,
    apply_sample,
    expected_utilities,
    init_uniform,
    prob_best,
    select_rule_I,
    select_rule_II,
    state_from_json,
    state_to_json,
)
from .policies import (
    NotMultiple,
    PolicyConfig,
    lookahead_scores,
    next_pair,
    run_policy,
    standard_policies,
    uniform_schedule,
)
from .instances import (
    MAX_MAGNITUDE,
    PROBLEM_SETS,
    Instance,
    ProblemSetSpec,
    UnknownSet,
    draw_sample,
    error_table,
    generate_instance,
    load_instance,
    problem_set,
    save_instance,
    true_utility_ranks,
    ukind_code,
)
from .trace import TRACE_COLUMNS, RunTrace, allocation_entropy
from .sim import (
    ComparisonResult,
    InsufficientData,
    SamplingBehavior,
    SummaryRow,
    aggregate,
    child_seed,
    compare,
    final_rows,
    read_trace_csv,
    run_experiment,
    run_unit,
    sampling_behavior,
    write_trace_csv,
)

__version__ = "0.1.0"
