"""Doob decompositions, compensators and predictable stopping times on
finite dyadic filtrations, with exactly machine-checkable certificates."""

from .compensator import (
    CompensatorApproximation,
    ConvexWeights,
    ForwardCombination,
    approximate_compensator,
    exact_compensator,
    forward_convex_combinations,
    select_dominated_subsequence,
)
from .diagnostics import (
    ContinuityReport,
    NaturalityPartitionReport,
    PredictableMartingaleReport,
    SpecialDecomposition,
    compensator_continuity_defect,
    naturality_basis_defect,
    naturality_defect_continuous,
    naturality_defect_discrete,
    naturality_partition_report,
    predictable_martingale_check,
    right_endpoint_identity_defect,
    special_decomposition,
)
from .doob import (
    DoobDecomposition,
    DyadicStepProcess,
    discrete_doob,
    extend_doob,
    is_grid_predictable,
)
from .dyadic import DyadicGrid, as_fraction, grid_predecessor, grid_successor
from . import errors
from .hitting import (
    ClosedSet,
    IntervalUnion,
    exhaust_jumps,
    first_approach_time,
    localize_bounded,
    next_jump_time,
)
from .paths import (
    INF_IDX,
    GridStoppingTime,
    OptionalPartition,
    ProcessPaths,
    evaluate_at,
    is_pi_predictable,
    jordan_split,
    jump_at,
    jump_process,
    left_limit_process,
    martingale_basis,
    martingale_defect,
    merge_optional_partitions,
    optional_partition_sum,
    partition_sum,
    stieltjes_left,
    variation_process,
)
from .scenarios import (
    ExperimentReport,
    ReportRow,
    Scenario,
    ScenarioConfig,
    emit_report,
    generate_scenario,
    render_report,
    run_convergence_experiment,
)
from .selftest import run_selftest
from .space import FilteredSpace, build_filtered_space
from .stopping import (
    StoppingClassification,
    announcing_sequence,
    classify_stopping_time,
    dyadic_stop_approx,
    fairness_basis_defect,
    fairness_defect,
    verify_announcing,
)

__version__ = "0.1.0"
