//! Does a protocol compute a given predicate? Searches for an input `X` and a
//! terminal configuration potentially reachable from `I(X)` that holds an
//! agent whose output disagrees with `φ(X)`, with the same trap/siphon
//! refinement as the consensus check.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use tracing::info;

use crate::consensus::{
    conf_var, declare_configuration, declare_flow, flow_equation, populated_output, refine,
    terminal, LoopEnd, RefinementOptions, Triple,
};
use crate::predicate::Predicate;
use crate::protocol::{Configuration, InputAssignment, Protocol};
use crate::smtlink::{Cmp, Formula, LinTerm, Session, SmtError, SolverConfig, SolverStats, Sort};
use crate::structural::{audit_potential_reachability, FlowAssignment, ReachAudit};

pub use crate::predicate::eval_predicate;

type F = Formula<i64>;
type T = LinTerm<i64>;

/// Variable holding the count of input symbol `sigma`.
pub fn input_var(sigma: usize) -> String {
    format!("X_s{sigma}")
}

/// A predicate compiled to linear arithmetic over the input variables.
///
/// Each remainder atom `Σ aᵢxᵢ ≡ c (mod m)` gets a quotient `k` and a residue
/// `r` defined by `Σ aᵢxᵢ = k·m + r ∧ 0 ≤ r < m` (in `definitions`, asserted
/// unconditionally) and becomes the atom `r = c mod m` inside `formula`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateEncoding {
    pub aux: BTreeMap<String, Sort>,
    pub definitions: Vec<F>,
    pub formula: F,
}

fn weighted(p: &Protocol, coeffs: &BTreeMap<String, i64>) -> T {
    let mut t = T::zero();
    for (sym, &a) in coeffs {
        let sigma = p
            .symbol_index(sym)
            .expect("predicate validated against the alphabet");
        t.add_term(a, input_var(sigma));
    }
    t
}

/// Compile `pd`; coefficient symbols must belong to the protocol's alphabet.
pub fn encode_predicate(p: &Protocol, pd: &Predicate) -> PredicateEncoding {
    let mut enc = PredicateEncoding {
        aux: BTreeMap::new(),
        definitions: Vec::new(),
        formula: F::True,
    };
    enc.formula = encode_node(p, pd, &mut enc);
    enc
}

fn encode_node(p: &Protocol, pd: &Predicate, enc: &mut PredicateEncoding) -> F {
    match pd {
        Predicate::Threshold { coeffs, c } => F::cmp_const(weighted(p, coeffs), Cmp::Lt, *c),
        Predicate::Remainder { coeffs, c, m } => {
            let id = enc.aux.len() / 2;
            let (k, r) = (format!("rem{id}_k"), format!("rem{id}_r"));
            enc.aux.insert(k.clone(), Sort::Int);
            enc.aux.insert(r.clone(), Sort::Int);
            let rhs = T::zero().plus(*m, k).plus(1, r.clone());
            enc.definitions.push(F::eq(weighted(p, coeffs), &rhs));
            enc.definitions
                .push(F::cmp_const(T::var(r.clone()), Cmp::Ge, 0));
            enc.definitions
                .push(F::cmp_const(T::var(r.clone()), Cmp::Lt, *m));
            F::cmp_const(T::var(r), Cmp::Eq, c.rem_euclid(*m))
        }
        Predicate::Not(inner) => F::not(encode_node(p, inner, enc)),
        Predicate::And(ps) => {
            let [a, b] = &**ps;
            F::and([encode_node(p, a, enc), encode_node(p, b, enc)])
        }
        Predicate::Or(ps) => {
            let [a, b] = &**ps;
            F::or([encode_node(p, a, enc), encode_node(p, b, enc)])
        }
    }
}

/// Input `X`, the terminal configuration `c` with a wrong-output agent, and
/// the flow `x` from `I(X)` to `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessCounterexample {
    pub input: InputAssignment,
    pub c0: Configuration,
    pub c: Configuration,
    pub x: FlowAssignment,
    /// `φ(X)`.
    pub expected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorrectnessOutcome {
    Holds,
    Fails {
        counterexample: CorrectnessCounterexample,
        audit: ReachAudit,
    },
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessVerdict {
    pub outcome: CorrectnessOutcome,
    pub traps: Vec<crate::protocol::StateSet>,
    pub siphons: Vec<crate::protocol::StateSet>,
    pub iterations: usize,
    pub stats: SolverStats,
    pub elapsed: Duration,
}

impl CorrectnessVerdict {
    pub fn holds(&self) -> bool {
        matches!(self.outcome, CorrectnessOutcome::Holds)
    }
}

/// Check that `p` computes `pd`. Exact when `p` is in WSSS: then every
/// terminal configuration reachable from an initial one is a consensus, so one
/// wrong-output agent suffices.
pub fn check_correctness(
    p: &Protocol,
    pd: &Predicate,
    solver: &SolverConfig,
    opts: &RefinementOptions,
) -> Result<CorrectnessVerdict, SmtError> {
    let start = Instant::now();
    let enc = encode_predicate(p, pd);
    let mut s: Session<i64> = Session::new(solver, "QF_LIA", "correctness")?;
    for sigma in 0..p.alphabet().len() {
        s.declare(&input_var(sigma), Sort::Nat)?;
    }
    for (name, sort) in &enc.aux {
        s.declare(name, *sort)?;
    }
    declare_configuration(p, &mut s, "c0")?;
    declare_configuration(p, &mut s, "c")?;
    declare_flow(p, &mut s, "x")?;
    let all_inputs = T::sum_of((0..p.alphabet().len()).map(input_var));
    s.assert(F::cmp_const(all_inputs, Cmp::Ge, 2))?;
    // c0 = I(X)
    for q in 0..p.num_states() {
        let feeding = (0..p.alphabet().len())
            .filter(|&sigma| p.input_state(sigma) == q)
            .map(input_var);
        s.assert(F::eq(T::var(conf_var("c0", q)), &T::sum_of(feeding)))?;
    }
    for f in enc.definitions.iter().cloned() {
        s.assert(f)?;
    }
    let tr = Triple::new("c0", "c", "x");
    s.assert(terminal(p, "c"))?;
    s.assert(flow_equation(p, &tr))?;
    s.assert(F::or([
        F::and([enc.formula.clone(), populated_output(p, "c", false)]),
        F::and([F::not(enc.formula.clone()), populated_output(p, "c", true)]),
    ]))?;
    let res = refine(p, &mut s, std::slice::from_ref(&tr), opts)?;
    let outcome = match res.end {
        LoopEnd::Unsat => CorrectnessOutcome::Holds,
        LoopEnd::Unknown(why) => CorrectnessOutcome::Unknown(why),
        LoopEnd::Stable(m) => {
            let input: InputAssignment = (0..p.alphabet().len())
                .map(|sigma| (sigma, m.nat(&input_var(sigma))))
                .collect();
            let cx = CorrectnessCounterexample {
                expected: eval_predicate(p, pd, &input),
                input,
                c0: tr.source(p, &m),
                c: tr.target(p, &m),
                x: tr.flow_of(p, &m),
            };
            let audit = audit_potential_reachability(p, &cx.c0, &cx.c, &cx.x);
            CorrectnessOutcome::Fails {
                counterexample: cx,
                audit,
            }
        }
    };
    if let CorrectnessOutcome::Fails { counterexample, .. } = &outcome {
        assert!(
            audit_correctness_counterexample(p, pd, counterexample),
            "counterexample failed its own audit"
        );
    }
    info!(
        iterations = res.rounds,
        holds = matches!(outcome, CorrectnessOutcome::Holds),
        "correctness"
    );
    Ok(CorrectnessVerdict {
        outcome,
        traps: res.traps,
        siphons: res.siphons,
        iterations: res.rounds,
        stats: res.stats,
        elapsed: start.elapsed(),
    })
}

/// Replay: `c0 = I(X)`, `c` terminal and potentially reachable through `x`,
/// and `c` holds an agent whose output differs from `φ(X)`.
pub fn audit_correctness_counterexample(
    p: &Protocol,
    pd: &Predicate,
    cx: &CorrectnessCounterexample,
) -> bool {
    let Ok(c0) = p.initialize(&cx.input) else {
        return false;
    };
    let n = p.num_states();
    c0 == cx.c0
        && cx.c.support().all(|q| q < n)
        && p.is_terminal(&cx.c)
        && eval_predicate(p, pd, &cx.input) == cx.expected
        && cx.c.count_in(&p.states_with_output(!cx.expected)) > 0
        && audit_potential_reachability(p, &cx.c0, &cx.c, &cx.x)
            .verdict()
            .is_ok()
}
