"""Split-and-group multi-robot path planning on fully occupied grids."""
from .errors import (
    BijectionError,
    BranchError,
    ConflictError,
    CycleError,
    DisjointnessError,
    GroupTooLarge,
    InfeasibleError,
    InstanceError,
    OverlapError,
    SagError,
    SizeError,
    SizeMismatch,
)
from .grid import (
    Configuration,
    GridGraph,
    Instance,
    Move,
    Plan,
    VerificationReport,
    apply_step,
    make_instance,
    metrics,
    verify_plan,
)
from .oracle import distance_lower_bound, makespan_lower_bound, optimal_makespan
from .primitives import (
    EmbeddedTree,
    PathSegment,
    build_exchange_table,
    flip,
    herd,
    line_shift,
    tree_shift,
)
from .routing import (
    count_demands,
    find_bundles,
    build_trees,
    match_exits,
    resolve_crossovers,
    schedule_iteration,
    split,
)
from .solver import SolveReport, sag, solve, solve_small

__version__ = "0.1.0"
