//! Contextual hidden-variable repositories for Bell-type experiments.
//!
//! The crate models behaviors `P(a⃗|x⃗)`, the deterministic assignments they
//! mix, the signaling structure of those assignments, and decompositions of
//! no-signaling behaviors into assignments that respect a fixed time ordering
//! of the agents. A [`repository::Repository`] stores such decompositions and
//! actualizes one assignment per experimental round; [`sim`] runs multi-agent
//! experiments against it and measures whether the agents' input choices stay
//! independent of the actualized assignment.

pub mod assignment;
pub mod behavior;
pub mod decomposition;
pub mod error;
pub mod ordering;
pub mod repository;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod stats;

pub use assignment::{
    classify, dependency_graph, enumerate_local_assignments, enumerate_ordered_strategies, has_cycle, respects_order,
    AssignmentClass, AssignmentKind, DeterministicAssignment, SignalingGraph,
};
pub use behavior::{
    behavior_from_assignment, chsh_value, is_no_signaling, make_pr_box, make_singlet_behavior, make_tsirelson, mix,
    validate, Behavior, NoSignalingReport, ValidationReport, EPS_NORM,
};
pub use decomposition::{
    chain_factors, decompose_ordered, in_local_polytope_2222, in_ordered_polytope, reconstruct, ChainFactors,
    Decomposition, DecompositionTerm,
};
pub use error::{Error, Result};
pub use ordering::{all_orderings, Ordering};
pub use repository::{
    build_repository, query, resolve_forced, ContextKey, ForcePolicy, FreeChoiceViolation, QueryResult, Repository,
    RepositoryMode, RoundAssignment,
};
pub use scenario::Scenario;
pub use sim::{
    derive_ordering, empirical_behavior, independence_test, mutual_information, run_experiment, AgentSpec,
    ExperimentConfig, Policy, RoundLog, StatsReport, TimingDist, Variable,
};
