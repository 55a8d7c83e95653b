//! StrongConsensus: no initial configuration potentially reaches two terminal
//! configurations, one with a 1-output agent and one with a 0-output agent.
//!
//! The flow-equation over-approximation is tightened on demand: whenever a
//! model uses a trap that ends up empty after being marked, or empties a siphon
//! that starts empty, the corresponding guarded constraint is added for every
//! (source, target, flow) triple and the system is solved again.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use tracing::{debug, info};

use crate::protocol::{Configuration, Protocol, StateSet, TransitionId};
use crate::smtlink::{
    Cmp, Formula, LinTerm, Model, Outcome, Session, SmtError, SolverConfig, SolverStats, Sort,
};
use crate::structural::{
    audit_potential_reachability, consumers, maximal_siphon_in_zero, maximal_trap_in_zero,
    producers, siphon_around, trap_around, FlowAssignment, ReachAudit,
};

pub(crate) fn conf_var(prefix: &str, q: usize) -> String {
    format!("{prefix}_q{q}")
}

pub(crate) fn flow_var(prefix: &str, t: TransitionId) -> String {
    format!("{prefix}_t{t}")
}

type F = Formula<i64>;
type T = LinTerm<i64>;

/// `Σ_{q ∈ set} c(q)`
pub(crate) fn count_term(prefix: &str, set: impl IntoIterator<Item = usize>) -> T {
    T::sum_of(set.into_iter().map(|q| conf_var(prefix, q)))
}

fn flow_sum(prefix: &str, set: impl IntoIterator<Item = TransitionId>) -> T {
    T::sum_of(set.into_iter().map(|t| flow_var(prefix, t)))
}

/// Names of one configuration pair and the flow vector between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Triple {
    pub src: String,
    pub tgt: String,
    pub flow: String,
}

impl Triple {
    pub fn new(src: &str, tgt: &str, flow: &str) -> Self {
        Triple {
            src: src.into(),
            tgt: tgt.into(),
            flow: flow.into(),
        }
    }

    pub fn source(&self, p: &Protocol, m: &Model) -> Configuration {
        read_configuration(p, &self.src, m)
    }

    pub fn target(&self, p: &Protocol, m: &Model) -> Configuration {
        read_configuration(p, &self.tgt, m)
    }

    pub fn flow_of(&self, p: &Protocol, m: &Model) -> FlowAssignment {
        p.non_silent()
            .into_iter()
            .map(|t| (t, m.nat(&flow_var(&self.flow, t))))
            .collect()
    }
}

pub(crate) fn read_configuration(p: &Protocol, prefix: &str, m: &Model) -> Configuration {
    (0..p.num_states())
        .map(|q| (q, m.nat(&conf_var(prefix, q))))
        .collect()
}

pub(crate) fn declare_configuration(
    p: &Protocol,
    s: &mut Session<i64>,
    prefix: &str,
) -> Result<(), SmtError> {
    (0..p.num_states()).try_for_each(|q| s.declare(&conf_var(prefix, q), Sort::Nat))
}

pub(crate) fn declare_flow(
    p: &Protocol,
    s: &mut Session<i64>,
    prefix: &str,
) -> Result<(), SmtError> {
    p.non_silent()
        .into_iter()
        .try_for_each(|t| s.declare(&flow_var(prefix, t), Sort::Nat))
}

/// At least two agents, all in initial states.
pub(crate) fn initial(p: &Protocol, c: &str) -> F {
    let init = p.initial_states();
    let mut parts = vec![F::cmp_const(count_term(c, 0..p.num_states()), Cmp::Ge, 2)];
    for q in (0..p.num_states()).filter(|q| !init.contains(q)) {
        parts.push(F::cmp_const(T::var(conf_var(c, q)), Cmp::Eq, 0));
    }
    F::and(parts)
}

/// No non-silent transition is enabled.
pub(crate) fn terminal(p: &Protocol, c: &str) -> F {
    F::and(p.non_silent().into_iter().map(|t| {
        let pre = p.transition(t).pre;
        F::or(
            pre.entries()
                .into_iter()
                .map(|(q, n)| F::cmp_const(T::var(conf_var(c, q)), Cmp::Lt, n as i64)),
        )
    }))
}

/// Some agent is in a state with output `b`.
pub(crate) fn populated_output(p: &Protocol, c: &str, b: bool) -> F {
    F::cmp_const(count_term(c, p.states_with_output(b)), Cmp::Gt, 0)
}

/// `c'(q) = c(q) + Σ_t x(t)·Δt(q)` for every state.
pub(crate) fn flow_equation(p: &Protocol, tr: &Triple) -> F {
    let mut terms: Vec<T> = (0..p.num_states())
        .map(|q| T::var(conf_var(&tr.src, q)))
        .collect();
    for t in p.non_silent() {
        for (q, d) in p.transition(t).effect() {
            terms[q].add_term(d, flow_var(&tr.flow, t));
        }
    }
    F::and(
        terms
            .into_iter()
            .enumerate()
            .map(|(q, rhs)| F::eq(T::var(conf_var(&tr.tgt, q)), &rhs)),
    )
}

/// If the flow marks `r` and never takes from `r` without giving back, `r` is
/// populated at the target.
pub(crate) fn u_trap(p: &Protocol, r: &StateSet, tr: &Triple) -> F {
    let ns = p.non_silent();
    let pre: BTreeSet<_> = ns
        .iter()
        .copied()
        .filter(|&t| p.transition(t).produces_into(r))
        .collect();
    let post_only = ns
        .iter()
        .copied()
        .filter(|&t| p.transition(t).consumes_from(r) && !pre.contains(&t));
    F::implies(
        F::and([
            F::cmp_const(flow_sum(&tr.flow, pre.iter().copied()), Cmp::Gt, 0),
            F::cmp_const(flow_sum(&tr.flow, post_only), Cmp::Eq, 0),
        ]),
        F::cmp_const(count_term(&tr.tgt, r.iter().copied()), Cmp::Gt, 0),
    )
}

/// If the flow takes from `s` and never gives to `s` without taking, `s` is
/// populated at the source.
pub(crate) fn u_siphon(p: &Protocol, s: &StateSet, tr: &Triple) -> F {
    let ns = p.non_silent();
    let post: BTreeSet<_> = ns
        .iter()
        .copied()
        .filter(|&t| p.transition(t).consumes_from(s))
        .collect();
    let pre_only = ns
        .iter()
        .copied()
        .filter(|&t| p.transition(t).produces_into(s) && !post.contains(&t));
    F::implies(
        F::and([
            F::cmp_const(flow_sum(&tr.flow, post.iter().copied()), Cmp::Gt, 0),
            F::cmp_const(flow_sum(&tr.flow, pre_only), Cmp::Eq, 0),
        ]),
        F::cmp_const(count_term(&tr.src, s.iter().copied()), Cmp::Gt, 0),
    )
}

/// Limits for the refinement loop.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RefinementOptions {
    /// Stop with an unknown verdict after this many refinement rounds.
    pub max_refinements: Option<usize>,
}

pub(crate) enum LoopEnd {
    Unsat,
    Stable(Model),
    Unknown(String),
}

pub(crate) struct LoopResult {
    pub end: LoopEnd,
    pub traps: Vec<StateSet>,
    pub siphons: Vec<StateSet>,
    pub rounds: usize,
    pub stats: SolverStats,
}

/// Solve, and while the model violates a trap or siphon condition on some
/// triple, add that set's constraint for every triple and solve again.
pub(crate) fn refine(
    p: &Protocol,
    session: &mut Session<i64>,
    triples: &[Triple],
    opts: &RefinementOptions,
) -> Result<LoopResult, SmtError> {
    let mut traps: Vec<StateSet> = Vec::new();
    let mut siphons: Vec<StateSet> = Vec::new();
    let mut rounds = 0;
    let end = loop {
        let model = match session.check()? {
            Outcome::Unsat => break LoopEnd::Unsat,
            Outcome::Unknown(why) => break LoopEnd::Unknown(why),
            Outcome::Sat(m) => m,
        };
        let mut new_traps: Vec<StateSet> = Vec::new();
        let mut new_siphons: Vec<StateSet> = Vec::new();
        // The maximal violated set detects a violation; the small sets grown
        // around each of its marked (resp. emptied) states generalise better,
        // since their guards mention fewer transitions.
        for tr in triples {
            let x = tr.flow_of(p, &model);
            let u = x.transitions();
            let n = p.num_states();
            let trap = maximal_trap_in_zero(p, &u, &tr.target(p, &model).zero_set(n));
            if !producers(p, &trap, &u).is_empty() {
                let marked = trap
                    .iter()
                    .copied()
                    .filter(|&q| !producers(p, &[q].into(), &u).is_empty());
                let small: Vec<StateSet> = marked.map(|q| trap_around(p, &u, &trap, q)).collect();
                for r in std::iter::once(trap.clone()).chain(small) {
                    if !new_traps.contains(&r) {
                        assert!(!traps.contains(&r), "refinement trap repeated");
                        new_traps.push(r);
                    }
                }
            }
            let siphon = maximal_siphon_in_zero(p, &u, &tr.source(p, &model).zero_set(n));
            if !consumers(p, &siphon, &u).is_empty() {
                let emptied = siphon
                    .iter()
                    .copied()
                    .filter(|&q| !consumers(p, &[q].into(), &u).is_empty());
                let small: Vec<StateSet> =
                    emptied.map(|q| siphon_around(p, &u, &siphon, q)).collect();
                for s in std::iter::once(siphon.clone()).chain(small) {
                    if !new_siphons.contains(&s) {
                        assert!(!siphons.contains(&s), "refinement siphon repeated");
                        new_siphons.push(s);
                    }
                }
            }
        }
        if new_traps.is_empty() && new_siphons.is_empty() {
            break LoopEnd::Stable(model);
        }
        if opts.max_refinements.is_some_and(|max| rounds >= max) {
            break LoopEnd::Unknown(format!("refinement limit of {rounds} rounds reached"));
        }
        rounds += 1;
        debug!(
            round = rounds,
            traps = new_traps.len(),
            siphons = new_siphons.len(),
            "refinement"
        );
        let mut added = Vec::new();
        for r in &new_traps {
            added.extend(triples.iter().map(|tr| u_trap(p, r, tr)));
        }
        for s in &new_siphons {
            added.extend(triples.iter().map(|tr| u_siphon(p, s, tr)));
        }
        // each round must cut off the current model
        assert!(
            added.iter().any(|f| f.eval(&model) == Ok(false)),
            "refinement constraints do not exclude the current model"
        );
        for f in added {
            session.assert(f)?;
        }
        traps.extend(new_traps);
        siphons.extend(new_siphons);
    };
    Ok(LoopResult {
        end,
        traps,
        siphons,
        rounds,
        stats: session.stats(),
    })
}

/// Two potentially reachable terminal configurations with different outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub c0: Configuration,
    /// Terminal, with an agent of output 1.
    pub c1: Configuration,
    /// Terminal, with an agent of output 0.
    pub c2: Configuration,
    pub x1: FlowAssignment,
    pub x2: FlowAssignment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsensusOutcome {
    Holds,
    Fails {
        counterexample: Counterexample,
        audit: [ReachAudit; 2],
    },
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusVerdict {
    pub outcome: ConsensusOutcome,
    /// Traps added by refinement, in discovery order.
    pub traps: Vec<StateSet>,
    pub siphons: Vec<StateSet>,
    /// Number of refinement rounds.
    pub iterations: usize,
    pub stats: SolverStats,
    pub elapsed: Duration,
}

impl ConsensusVerdict {
    pub fn holds(&self) -> bool {
        matches!(self.outcome, ConsensusOutcome::Holds)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match &self.outcome {
            ConsensusOutcome::Fails { counterexample, .. } => Some(counterexample),
            _ => None,
        }
    }
}

/// Decide StrongConsensus by refinement.
pub fn check_strong_consensus(
    p: &Protocol,
    solver: &SolverConfig,
    opts: &RefinementOptions,
) -> Result<ConsensusVerdict, SmtError> {
    let start = Instant::now();
    let mut s: Session<i64> = Session::new(solver, "QF_LIA", "consensus")?;
    for c in ["c0", "c1", "c2"] {
        declare_configuration(p, &mut s, c)?;
    }
    for x in ["x1", "x2"] {
        declare_flow(p, &mut s, x)?;
    }
    let triples = [Triple::new("c0", "c1", "x1"), Triple::new("c0", "c2", "x2")];
    s.assert(initial(p, "c0"))?;
    s.assert(terminal(p, "c1"))?;
    s.assert(terminal(p, "c2"))?;
    s.assert(populated_output(p, "c1", true))?;
    s.assert(populated_output(p, "c2", false))?;
    for tr in &triples {
        s.assert(flow_equation(p, tr))?;
    }
    let res = refine(p, &mut s, &triples, opts)?;
    let outcome = match res.end {
        LoopEnd::Unsat => ConsensusOutcome::Holds,
        LoopEnd::Unknown(why) => ConsensusOutcome::Unknown(why),
        LoopEnd::Stable(m) => {
            let counterexample = Counterexample {
                c0: triples[0].source(p, &m),
                c1: triples[0].target(p, &m),
                c2: triples[1].target(p, &m),
                x1: triples[0].flow_of(p, &m),
                x2: triples[1].flow_of(p, &m),
            };
            let audit = audit_pair(p, &counterexample);
            ConsensusOutcome::Fails {
                counterexample,
                audit,
            }
        }
    };
    info!(
        iterations = res.rounds,
        holds = matches!(outcome, ConsensusOutcome::Holds),
        "strong consensus"
    );
    let verdict = ConsensusVerdict {
        outcome,
        traps: res.traps,
        siphons: res.siphons,
        iterations: res.rounds,
        stats: res.stats,
        elapsed: start.elapsed(),
    };
    if let Some(cx) = verdict.counterexample() {
        assert!(
            audit_counterexample(p, cx),
            "counterexample failed its own audit"
        );
    }
    Ok(verdict)
}

fn audit_pair(p: &Protocol, cx: &Counterexample) -> [ReachAudit; 2] {
    [
        audit_potential_reachability(p, &cx.c0, &cx.c1, &cx.x1),
        audit_potential_reachability(p, &cx.c0, &cx.c2, &cx.x2),
    ]
}

/// Replay a counterexample with exact arithmetic: `c0` initial, `c1` and `c2`
/// terminal with an output-1 resp. output-0 agent, and both potentially
/// reachable from `c0` through their flows.
pub fn audit_counterexample(p: &Protocol, cx: &Counterexample) -> bool {
    let n = p.num_states();
    let in_range = |c: &Configuration| c.support().all(|q| q < n);
    if ![&cx.c0, &cx.c1, &cx.c2].into_iter().all(in_range) {
        return false;
    }
    let init = p.initial_states();
    let initial = cx.c0.size() >= 2 && cx.c0.support().all(|q| init.contains(&q));
    let terminal = |c: &Configuration| c.size() >= 2 && p.is_terminal(c);
    initial
        && terminal(&cx.c1)
        && terminal(&cx.c2)
        && cx.c1.count_in(&p.states_with_output(true)) > 0
        && cx.c2.count_in(&p.states_with_output(false)) > 0
        && audit_pair(p, cx).iter().all(|a| a.verdict().is_ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(v: i64) -> num_rational::BigRational {
        num_rational::BigRational::from_integer(v.into())
    }
    use crate::families::gen_majority;
    use crate::structural::check_potential_reachability;

    fn var_model(p: &Protocol, assign: &[(&str, &Configuration)]) -> Model {
        let mut m = Model::new();
        for (prefix, c) in assign {
            for q in 0..p.num_states() {
                m.insert(conf_var(prefix, q), rat(c.get(q) as i64));
            }
        }
        m
    }

    #[test]
    fn terminal_encoding() {
        let p = gen_majority();
        let f = terminal(&p, "c");
        let term = p.configuration(&[("b", 3)]).unwrap();
        let live = p.configuration(&[("A", 1), ("B", 1)]).unwrap();
        assert_eq!(f.eval(&var_model(&p, &[("c", &term)])), Ok(true));
        assert_eq!(f.eval(&var_model(&p, &[("c", &live)])), Ok(false));
    }

    #[test]
    fn initial_encoding() {
        let p = gen_majority();
        let f = initial(&p, "c");
        let ok = p.configuration(&[("A", 1), ("B", 1)]).unwrap();
        let small = p.configuration(&[("A", 1)]).unwrap();
        let non_init = p.configuration(&[("A", 1), ("a", 1)]).unwrap();
        assert_eq!(f.eval(&var_model(&p, &[("c", &ok)])), Ok(true));
        assert_eq!(f.eval(&var_model(&p, &[("c", &small)])), Ok(false));
        assert_eq!(f.eval(&var_model(&p, &[("c", &non_init)])), Ok(false));
    }

    #[test]
    fn trap_constraint_excludes_spurious_model() {
        // c0 = {A, B}, c1 = {a, a}, x(t_AB) = x(t_Ab) = 1
        let p = gen_majority();
        let c0 = p.configuration(&[("A", 1), ("B", 1)]).unwrap();
        let c1 = p.configuration(&[("a", 2)]).unwrap();
        let mut m = var_model(&p, &[("c0", &c0), ("c1", &c1)]);
        for t in p.non_silent() {
            let used = ["t_AB", "t_Ab"].contains(&p.transition(t).label.as_str());
            m.insert(flow_var("x1", t), rat(used as i64));
        }
        let tr = Triple::new("c0", "c1", "x1");
        assert_eq!(flow_equation(&p, &tr).eval(&m), Ok(true));
        let u = tr.flow_of(&p, &m).transitions();
        let trap = maximal_trap_in_zero(&p, &u, &c1.zero_set(4));
        assert_eq!(u_trap(&p, &trap, &tr).eval(&m), Ok(false));
        assert!(!check_potential_reachability(&p, &c0, &c1, &tr.flow_of(&p, &m)).is_ok());
    }

    #[test]
    fn audit_rejects_tampering() {
        let p = gen_majority();
        let c = p.configuration(&[("b", 2)]).unwrap();
        let cx = Counterexample {
            c0: p.configuration(&[("B", 2)]).unwrap(),
            c1: c.clone(),
            c2: c,
            x1: FlowAssignment::new(),
            x2: FlowAssignment::new(),
        };
        // flow equation fails: B B never becomes b b with x = 0
        assert!(!audit_counterexample(&p, &cx));
    }
}
