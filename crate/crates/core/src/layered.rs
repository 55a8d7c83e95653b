//! LayeredTermination: search for an ordered partition of the transitions in
//! which every layer on its own only has silent executions and no layer can
//! re-enable an earlier one, plus an independent polynomial-time checker for
//! candidate partitions.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info};

use crate::protocol::{Configuration, Protocol, TransitionId, TransitionSet};
use crate::smtlink::{
    Cmp, Formula, LinTerm, Outcome, Session, SmtError, SolverConfig, SolverStats, Sort,
};
use crate::structural::{has_nonsilent_invariant_cycle, u_dead_violation};

/// `(T₁, …, Tₙ)`: disjoint, nonempty layers covering every transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedPartition {
    pub layers: Vec<TransitionSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("partition has no layers")]
    NoLayers,
    #[error("layer {0} is empty")]
    EmptyLayer(usize),
    #[error("transition {0} appears in more than one layer")]
    Overlap(String),
    #[error("transition {0} is not in any layer")]
    Uncovered(String),
    #[error("transition index {0} out of range")]
    UnknownTransition(usize),
}

impl OrderedPartition {
    pub fn new(layers: Vec<TransitionSet>) -> Self {
        OrderedPartition { layers }
    }

    /// Build from the non-silent layers; every silent transition joins layer 1.
    pub fn with_silent_in_first(p: &Protocol, non_silent_layers: Vec<TransitionSet>) -> Self {
        let mut layers = non_silent_layers;
        if layers.is_empty() {
            layers.push(TransitionSet::new());
        }
        let silent = (0..p.transitions().len()).filter(|&t| p.transition(t).is_silent());
        layers[0].extend(silent);
        OrderedPartition { layers }
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// 1-based layer of `t`.
    pub fn layer_of(&self, t: TransitionId) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.contains(&t))
            .map(|i| i + 1)
    }

    pub fn validate(&self, p: &Protocol) -> Result<(), PartitionError> {
        if self.layers.is_empty() {
            return Err(PartitionError::NoLayers);
        }
        let n = p.transitions().len();
        let mut seen = vec![false; n];
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(PartitionError::EmptyLayer(i + 1));
            }
            for &t in layer {
                if t >= n {
                    return Err(PartitionError::UnknownTransition(t));
                }
                if std::mem::replace(&mut seen[t], true) {
                    return Err(PartitionError::Overlap(p.transition(t).label.clone()));
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(t) => Err(PartitionError::Uncovered(p.transition(t).label.clone())),
            None => Ok(()),
        }
    }
}

/// Ranking vectors `yᵢ : Q → ℕ`, one per layer: every non-silent transition of
/// layer `i` strictly decreases `Σ_q yᵢ(q)·C(q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingCertificate {
    /// `vectors[i][q]` for layer `i + 1`, dense over states.
    pub vectors: Vec<Vec<u64>>,
}

impl RankingCertificate {
    pub fn rank(&self, layer: usize, c: &Configuration) -> u128 {
        c.iter()
            .map(|(q, n)| self.vectors[layer - 1][q] as u128 * n as u128)
            .sum()
    }

    /// Whether every non-silent transition of each layer decreases that layer's rank.
    pub fn check(&self, p: &Protocol, op: &OrderedPartition) -> bool {
        self.vectors.len() == op.len()
            && op.layers.iter().zip(&self.vectors).all(|(layer, y)| {
                y.len() == p.num_states()
                    && layer
                        .iter()
                        .filter(|&&t| !p.transition(t).is_silent())
                        .all(|&t| {
                            p.transition(t)
                                .effect()
                                .iter()
                                .map(|&(q, d)| y[q] as i128 * d as i128)
                                .sum::<i128>()
                                < 0
                        })
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayeredOutcome {
    Found {
        partition: OrderedPartition,
        ranking: RankingCertificate,
    },
    /// Every `k` up to the bound is unsatisfiable.
    None,
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredReport {
    pub outcome: LayeredOutcome,
    /// Largest number of layers tried.
    pub k_reached: usize,
    pub stats: SolverStats,
    pub elapsed: Duration,
}

fn y_var(i: usize, q: usize) -> String {
    format!("y{i}_q{q}")
}

fn b_var(t: TransitionId) -> String {
    format!("b_t{t}")
}

/// `U'(t, u) = { u' ∈ U : pre(u') ≤ pre(t) + (pre(u) ⊖ post(t)) }`.
pub fn enabling_set(
    p: &Protocol,
    u_set: &[TransitionId],
    t: TransitionId,
    u: TransitionId,
) -> Vec<TransitionId> {
    let rt = p.transition(t);
    let start = &rt.pre.to_configuration()
        + &p.transition(u)
            .pre
            .to_configuration()
            .monus(&rt.post.to_configuration());
    u_set
        .iter()
        .copied()
        .filter(|&u2| start.contains_pair(p.transition(u2).pre))
        .collect()
}

/// The constraint system for `k` layers over the non-silent transitions.
pub fn layered_constraints(p: &Protocol, k: usize) -> (BTreeMap<String, Sort>, Vec<Formula<i64>>) {
    let u_set = p.non_silent();
    let mut decls = BTreeMap::new();
    let mut out = Vec::new();
    for i in 1..=k {
        for q in 0..p.num_states() {
            decls.insert(y_var(i, q), Sort::Nat);
        }
    }
    for &t in &u_set {
        decls.insert(b_var(t), Sort::Nat);
    }
    let b = |t: TransitionId| LinTerm::<i64>::var(b_var(t));
    // (ii) 1 ≤ b(t) ≤ k
    for &t in &u_set {
        out.push(Formula::cmp_const(b(t), Cmp::Ge, 1));
        out.push(Formula::cmp_const(b(t), Cmp::Le, k as i64));
    }
    // (i) b(t) = i → Σ_q yᵢ(q)·Δt(q) < 0
    for i in 1..=k {
        for &t in &u_set {
            let mut rank = LinTerm::zero();
            for (q, d) in p.transition(t).effect() {
                rank.add_term(d, y_var(i, q));
            }
            let body = Formula::Atom(rank, Cmp::Lt);
            out.push(if k == 1 {
                body
            } else {
                Formula::implies(Formula::cmp_const(b(t), Cmp::Eq, i as i64), body)
            });
        }
    }
    // (iii) b(u) < b(t) → ⋁_{u' ∈ U'(t,u)} b(u) = b(u')
    if k > 1 {
        for &t in &u_set {
            for &u in &u_set {
                let enabled = enabling_set(p, &u_set, t, u);
                if enabled.contains(&u) {
                    continue;
                }
                let guard = Formula::lt(b(u), &b(t));
                out.push(if enabled.is_empty() {
                    Formula::not(guard)
                } else {
                    Formula::implies(
                        guard,
                        Formula::or(enabled.iter().map(|&u2| Formula::eq(b(u), &b(u2)))),
                    )
                });
            }
        }
    }
    (decls, out)
}

/// Search `k = 1, 2, …, k_max` for a layered partition. `k_max` defaults to
/// the number of non-silent transitions.
pub fn find_layered_termination(
    p: &Protocol,
    k_max: Option<usize>,
    solver: &SolverConfig,
) -> Result<LayeredReport, SmtError> {
    let start = Instant::now();
    let u_set = p.non_silent();
    let mut stats = SolverStats::default();
    if u_set.is_empty() {
        let partition = OrderedPartition::with_silent_in_first(p, Vec::new());
        let ranking = RankingCertificate {
            vectors: vec![vec![0; p.num_states()]],
        };
        return Ok(LayeredReport {
            outcome: LayeredOutcome::Found { partition, ranking },
            k_reached: 1,
            stats,
            elapsed: start.elapsed(),
        });
    }
    let k_max = k_max.unwrap_or(u_set.len()).max(1);
    for k in 1..=k_max {
        let (decls, constraints) = layered_constraints(p, k);
        let mut session: Session<i64> = Session::new(solver, "QF_LIA", &format!("layered-k{k}"))?;
        for (name, sort) in &decls {
            session.declare(name, *sort)?;
        }
        for f in constraints {
            session.assert(f)?;
        }
        let outcome = session.check()?;
        stats.merge(&session.stats());
        debug!(k, sat = outcome.is_sat(), "layered termination");
        match outcome {
            Outcome::Unsat => continue,
            Outcome::Unknown(why) => {
                return Ok(LayeredReport {
                    outcome: LayeredOutcome::Unknown(why),
                    k_reached: k,
                    stats,
                    elapsed: start.elapsed(),
                })
            }
            Outcome::Sat(model) => {
                let (partition, ranking) = extract(p, k, &model);
                info!(k, layers = partition.len(), "layered partition found");
                return Ok(LayeredReport {
                    outcome: LayeredOutcome::Found { partition, ranking },
                    k_reached: k,
                    stats,
                    elapsed: start.elapsed(),
                });
            }
        }
    }
    Ok(LayeredReport {
        outcome: LayeredOutcome::None,
        k_reached: k_max,
        stats,
        elapsed: start.elapsed(),
    })
}

/// Turn a layer assignment into a partition with compacted layer indices.
fn extract(
    p: &Protocol,
    k: usize,
    model: &crate::smtlink::Model,
) -> (OrderedPartition, RankingCertificate) {
    let mut by_layer: BTreeMap<u64, TransitionSet> = BTreeMap::new();
    for t in p.non_silent() {
        by_layer.entry(model.nat(&b_var(t))).or_default().insert(t);
    }
    let used: Vec<u64> = by_layer.keys().copied().collect();
    debug_assert!(used.iter().all(|&i| i >= 1 && i as usize <= k));
    let partition = OrderedPartition::with_silent_in_first(p, by_layer.into_values().collect());
    let vectors = used
        .iter()
        .map(|&i| {
            (0..p.num_states())
                .map(|q| model.nat(&y_var(i as usize, q)))
                .collect()
        })
        .collect();
    (partition, RankingCertificate { vectors })
}

/// Which half of the layer condition fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerCondition {
    /// (a) the layer on its own has a non-silent execution.
    #[serde(rename = "a")]
    Cycle,
    /// (b) the layer can enable a non-silent transition of an earlier layer.
    #[serde(rename = "b")]
    Dead,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerWitness {
    /// Nonzero `x ≥ 0` over the layer with zero net effect.
    Cycle(BTreeMap<TransitionId, BigRational>),
    /// Firing `s` from `pre(s) + (pre(u) ⊖ post(s))`, a configuration dead for
    /// the earlier layers, enables `u`.
    Enables { s: TransitionId, u: TransitionId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionVerdict {
    Ok,
    Fails {
        layer: usize,
        condition: LayerCondition,
        witness: LayerWitness,
    },
}

impl PartitionVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, PartitionVerdict::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Smt(#[from] SmtError),
}

/// Check both layer conditions with the polynomial tests: an LP for the
/// absence of non-silent cycles inside each layer, and the U-dead test
/// against the union of the earlier layers.
pub fn verify_partition(
    p: &Protocol,
    op: &OrderedPartition,
    solver: &SolverConfig,
) -> Result<PartitionVerdict, VerifyError> {
    op.validate(p)?;
    let mut earlier = TransitionSet::new();
    for (i, layer) in op.layers.iter().enumerate() {
        if let Some(x) = has_nonsilent_invariant_cycle(p, layer, solver)? {
            return Ok(PartitionVerdict::Fails {
                layer: i + 1,
                condition: LayerCondition::Cycle,
                witness: LayerWitness::Cycle(x),
            });
        }
        if let Some((s, u)) = u_dead_violation(p, layer, &earlier) {
            return Ok(PartitionVerdict::Fails {
                layer: i + 1,
                condition: LayerCondition::Dead,
                witness: LayerWitness::Enables { s, u },
            });
        }
        earlier.extend(layer.iter().copied());
    }
    Ok(PartitionVerdict::Ok)
}
