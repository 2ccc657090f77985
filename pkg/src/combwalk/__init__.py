"""Simulation and exact verification of random-walk collisions on wedge combs.

The package pairs a deterministic Monte Carlo engine (scalar reference in
:mod:`combwalk.walk` / :mod:`combwalk.collisions`, batched kernels in
:mod:`combwalk.batch`) with exact finite-Markov-chain oracles
(:mod:`combwalk.oracle`) for every checkable quantity: hitting and exit
times, collision events and counts, local times, and killed kernels.
:mod:`combwalk.runner` orchestrates reproducible replica runs and
:mod:`combwalk.acceptance` bundles the statistical verification suite.
"""

from .comb import (
    Classification,
    Constant,
    IidSample,
    LinLog,
    NLogN,
    Power,
    Profile,
    Table,
    Verdict,
    Vertex,
    breve_f,
    classify_profile,
    enumerate_truncation,
    neighbors,
    parity,
    profile_from_json,
    profile_from_json_dict,
    reciprocal_partial_sum,
    tooth_height,
)
from .collisions import (
    CollisionSummary,
    PairRun,
    TripleRun,
    collision_summary,
    dump_collision_events_csv,
    inclusion_violations,
    psi_event,
    run_pair,
    run_triple,
    sigma_times,
    tooth_collision_count,
    upsilon_windows,
    z_kh_count,
)
from .errors import (
    CombwalkError,
    ConfigError,
    DomainError,
    EstimationError,
    ResourceBudgetError,
    SingularChainError,
)
from .oracle import (
    FiniteChain,
    absorption_probability,
    comb_chain,
    expected_tooth_collisions,
    green_function,
    interval_chain,
    kernel_decay_check,
    killed_kernel,
    psi0_probability_bracket,
    tooth_product_chain,
)
from .rng import RngStream, derive_seed
from .runner import (
    Estimate,
    EstimatorSpec,
    ExperimentConfig,
    run_estimator,
    sweep,
    validate_config,
)
from .walk import (
    StopRecord,
    StopSpec,
    Trajectory,
    dump_trajectory_csv,
    embedded_walk,
    excursion_durations,
    local_time,
    simulate,
    step,
)

__version__ = "0.1.0"
