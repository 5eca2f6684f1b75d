"""Crash-tolerant consensus on directed graphs: connectivity conditions,
synchronous and asynchronous simulators, and an impossibility checker."""

from .async_engine import (
    AsyncCrash,
    AsyncTrace,
    DelayPolicy,
    WaConfig,
    check_epsilon_verdict,
    check_heard_intersection,
    condition_wait,
    p_end_bound,
    run_wa,
)
from .conditions import (
    AsyncViolationWitness,
    CtViolationWitness,
    Partition3,
    async_condition,
    boundary,
    ct_node_connectivity,
    ct_violation_witness,
    fault_diameter,
    height,
    propagates,
    reach_set,
    sources,
)
from .errors import (
    ConsensusError,
    GraphFormatError,
    IncompleteTable,
    InfeasibleGraph,
    InvalidArgument,
    InvalidFaultSet,
    InvalidInput,
    InvalidPartition,
    InvalidSchedule,
    NotARoot,
    VerificationFailure,
)
from .graph import DiGraph, FaultSet, ReducedGraph, complete, cycle, empty, load, loads, reduced_graph
from .impossibility import (
    BinaryMultiset,
    IterativeRun,
    TransitionTable,
    counterexample_graph,
    enumerate_transition_tables,
    run_fixed_iterative,
    verify_impossibility,
)
from .sync_engine import (
    CrashSchedule,
    SyncCrashEvent,
    SyncTrace,
    Verdict,
    check_mvc_invariants,
    check_verdict,
    generate_schedules,
    run_min_max,
    run_mvc,
)

__version__ = "0.1.0"
