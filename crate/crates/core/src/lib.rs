//! Verification of population protocols.
//!
//! Decides membership in the class of well-specified, strongly silent
//! protocols (WSSS) by two constraint-solving checks — LayeredTermination and
//! StrongConsensus — and checks that a protocol computes a given predicate.
//! An explicit-state oracle provides ground truth on small inputs.
//!
//! Module map:
//! - [`protocol`]: protocols, configurations and step semantics.
//! - [`predicate`]: threshold/remainder predicates closed under boolean connectives.
//! - [`families`]: benchmark protocol generators and combinators.
//! - [`structural`]: flow equations, traps, siphons, potential reachability.
//! - [`smtlink`]: linear constraints, SMT-LIB2 emission, external solver sessions.
//! - [`layered`], [`consensus`], [`correctness`]: the three checks.
//! - [`oracle`]: reachability graphs and bottom-SCC classification.
//! - [`format`]: JSON documents for protocols and verdicts.

pub mod consensus;
pub mod correctness;
pub mod families;
pub mod format;
pub mod layered;
pub mod oracle;
pub mod predicate;
pub mod protocol;
pub mod scalar;
pub mod smtlink;
pub mod structural;

pub use consensus::{
    audit_counterexample, check_strong_consensus, ConsensusVerdict, RefinementOptions,
};
pub use correctness::{check_correctness, eval_predicate, CorrectnessVerdict};
pub use layered::{
    find_layered_termination, verify_partition, OrderedPartition, RankingCertificate,
};
pub use oracle::{classify_input, explore, oracle_well_specified};
pub use predicate::Predicate;
pub use protocol::{normalize, Configuration, InputAssignment, Protocol, StateSet, TransitionSet};
pub use smtlink::{SmtError, SolverConfig};
pub use structural::{check_flow, check_potential_reachability, FlowAssignment};

/// Exact rationals, used for LP solutions and solver models.
pub type Rational = num_rational::BigRational;
/// Constraints with machine-integer coefficients (the integer checks).
pub type IntFormula = smtlink::Formula<i64>;
pub type IntTerm = smtlink::LinTerm<i64>;
pub type IntProblem = smtlink::Problem<i64>;
/// Constraints with exact rational coefficients (the LP test).
pub type RatFormula = smtlink::Formula<Rational>;
pub type RatTerm = smtlink::LinTerm<Rational>;
pub type RatProblem = smtlink::Problem<Rational>;
