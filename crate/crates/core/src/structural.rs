//! Flow equations, traps and siphons, and the polynomial subroutines of both verifiers.
//!
//! For a state set `P`, a transition *consumes from* `P` when its pre-multiset
//! meets `P` and *produces into* `P` when its post-multiset does. `P` is a
//! `U`-trap when every transition of `U` consuming from `P` also produces into
//! it; a `U`-siphon when every transition of `U` producing into `P` also
//! consumes from it.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::protocol::{Configuration, Protocol, StateIdx, StateSet, TransitionId, TransitionSet};
use crate::smtlink::{Cmp, Formula, LinTerm, Outcome, Problem, SmtError, SolverConfig, Sort};

pub use crate::protocol::FlowAssignment;

impl FlowAssignment {
    /// `supp(x)`
    pub fn transitions(&self) -> TransitionSet {
        self.support().collect()
    }
}

/// `C2(q) = C(q) + Σ_t x(t)·(post(t)(q) − pre(t)(q))` for every state `q`.
pub fn check_flow(p: &Protocol, c: &Configuration, c2: &Configuration, x: &FlowAssignment) -> bool {
    let mut net: Vec<i128> = (0..p.num_states()).map(|q| c.get(q) as i128).collect();
    for (t, n) in x.iter() {
        if t >= p.transitions().len() {
            return false;
        }
        for (q, d) in p.transition(t).effect() {
            net[q] += d as i128 * n as i128;
        }
    }
    c.support().chain(c2.support()).all(|q| q < p.num_states())
        && net.iter().enumerate().all(|(q, &v)| v == c2.get(q) as i128)
}

pub fn is_trap(p: &Protocol, set: &StateSet, u: &TransitionSet) -> bool {
    u.iter().all(|&t| {
        let r = p.transition(t);
        !r.consumes_from(set) || r.produces_into(set)
    })
}

pub fn is_siphon(p: &Protocol, set: &StateSet, u: &TransitionSet) -> bool {
    u.iter().all(|&t| {
        let r = p.transition(t);
        !r.produces_into(set) || r.consumes_from(set)
    })
}

/// `•P ∩ U`: transitions of `U` producing into `set`.
pub fn producers(p: &Protocol, set: &StateSet, u: &TransitionSet) -> TransitionSet {
    u.iter()
        .copied()
        .filter(|&t| p.transition(t).produces_into(set))
        .collect()
}

/// `P• ∩ U`: transitions of `U` consuming from `set`.
pub fn consumers(p: &Protocol, set: &StateSet, u: &TransitionSet) -> TransitionSet {
    u.iter()
        .copied()
        .filter(|&t| p.transition(t).consumes_from(set))
        .collect()
}

/// Largest `U`-trap contained in `zero`.
pub fn maximal_trap_in_zero(p: &Protocol, u: &TransitionSet, zero: &StateSet) -> StateSet {
    let order: Vec<TransitionId> = u.iter().copied().collect();
    maximal_trap_with_order(p, &order, zero)
}

/// Largest `U`-siphon contained in `zero`.
pub fn maximal_siphon_in_zero(p: &Protocol, u: &TransitionSet, zero: &StateSet) -> StateSet {
    let order: Vec<TransitionId> = u.iter().copied().collect();
    maximal_siphon_with_order(p, &order, zero)
}

/// Greedy fixpoint: a transition that consumes from the candidate set without
/// producing into it cannot be part of any trap inside the set, so its
/// consumed states are dropped. `order` is the scan order over `U`.
pub fn maximal_trap_with_order(p: &Protocol, order: &[TransitionId], zero: &StateSet) -> StateSet {
    let mut set = zero.clone();
    loop {
        let mut changed = false;
        for &t in order {
            let r = p.transition(t);
            if r.consumes_from(&set) && !r.produces_into(&set) {
                for q in r.pre.states() {
                    changed |= set.remove(&q);
                }
            }
        }
        if !changed {
            return set;
        }
    }
}

pub fn maximal_siphon_with_order(
    p: &Protocol,
    order: &[TransitionId],
    zero: &StateSet,
) -> StateSet {
    let mut set = zero.clone();
    loop {
        let mut changed = false;
        for &t in order {
            let r = p.transition(t);
            if r.produces_into(&set) && !r.consumes_from(&set) {
                for q in r.post.states() {
                    changed |= set.remove(&q);
                }
            }
        }
        if !changed {
            return set;
        }
    }
}

/// A small `U`-trap inside the `U`-trap `within` that contains `q ∈ within`:
/// starting from `{q}`, every transition of `U` that consumes from the set
/// without producing into it contributes its first post-state in `within`.
pub fn trap_around(p: &Protocol, u: &TransitionSet, within: &StateSet, q: StateIdx) -> StateSet {
    debug_assert!(within.contains(&q) && is_trap(p, within, u));
    let mut set: StateSet = [q].into_iter().collect();
    loop {
        let grow = u.iter().find_map(|&t| {
            let r = p.transition(t);
            (r.consumes_from(&set) && !r.produces_into(&set))
                .then(|| r.post.states().into_iter().find(|s| within.contains(s)))
                .flatten()
        });
        match grow {
            Some(s) => {
                set.insert(s);
            }
            None => return set,
        }
    }
}

/// A small `U`-siphon inside the `U`-siphon `within` that contains `q`; dual
/// of [`trap_around`].
pub fn siphon_around(p: &Protocol, u: &TransitionSet, within: &StateSet, q: StateIdx) -> StateSet {
    debug_assert!(within.contains(&q) && is_siphon(p, within, u));
    let mut set: StateSet = [q].into_iter().collect();
    loop {
        let grow = u.iter().find_map(|&t| {
            let r = p.transition(t);
            (r.produces_into(&set) && !r.consumes_from(&set))
                .then(|| r.pre.states().into_iter().find(|s| within.contains(s)))
                .flatten()
        });
        match grow {
            Some(s) => {
                set.insert(s);
            }
            None => return set,
        }
    }
}

/// Which clause of potential reachability fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReachCondition {
    /// (a) the flow equation.
    Flow,
    /// (b) an emptied trap that some used transition marks.
    Trap,
    /// (c) an initially empty siphon that some used transition empties.
    Siphon,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reachability {
    Ok,
    Fails {
        condition: ReachCondition,
        witness: Option<StateSet>,
    },
}

impl Reachability {
    pub fn is_ok(&self) -> bool {
        matches!(self, Reachability::Ok)
    }
}

/// Per-condition results of the potential reachability test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachAudit {
    pub flow: bool,
    /// Maximal `supp(x)`-trap inside the zero set of the target.
    pub max_trap: StateSet,
    pub trap_ok: bool,
    /// Maximal `supp(x)`-siphon inside the zero set of the source.
    pub max_siphon: StateSet,
    pub siphon_ok: bool,
}

impl ReachAudit {
    pub fn verdict(&self) -> Reachability {
        if !self.flow {
            Reachability::Fails {
                condition: ReachCondition::Flow,
                witness: None,
            }
        } else if !self.trap_ok {
            Reachability::Fails {
                condition: ReachCondition::Trap,
                witness: Some(self.max_trap.clone()),
            }
        } else if !self.siphon_ok {
            Reachability::Fails {
                condition: ReachCondition::Siphon,
                witness: Some(self.max_siphon.clone()),
            }
        } else {
            Reachability::Ok
        }
    }
}

pub fn audit_potential_reachability(
    p: &Protocol,
    c: &Configuration,
    c2: &Configuration,
    x: &FlowAssignment,
) -> ReachAudit {
    let flow = check_flow(p, c, c2, x);
    let u: TransitionSet = x
        .transitions()
        .into_iter()
        .filter(|&t| t < p.transitions().len())
        .collect();
    let max_trap = maximal_trap_in_zero(p, &u, &c2.zero_set(p.num_states()));
    let trap_ok = producers(p, &max_trap, &u).is_empty();
    let max_siphon = maximal_siphon_in_zero(p, &u, &c.zero_set(p.num_states()));
    let siphon_ok = consumers(p, &max_siphon, &u).is_empty();
    ReachAudit {
        flow,
        max_trap,
        trap_ok,
        max_siphon,
        siphon_ok,
    }
}

/// Whether `c2` is potentially reachable from `c` through `x`.
pub fn check_potential_reachability(
    p: &Protocol,
    c: &Configuration,
    c2: &Configuration,
    x: &FlowAssignment,
) -> Reachability {
    audit_potential_reachability(p, c, c2, x).verdict()
}

/// A nonzero `x ≥ 0` over the non-silent transitions of `u` whose net effect is
/// zero, if one exists. Such an `x` exists exactly when the sub-protocol
/// restricted to `u` has a non-silent execution. Decided as a linear program
/// over the rationals with `Σ x ≥ 1` in place of `x ≠ 0`.
pub fn has_nonsilent_invariant_cycle(
    p: &Protocol,
    u: &TransitionSet,
    solver: &SolverConfig,
) -> Result<Option<BTreeMap<TransitionId, BigRational>>, SmtError> {
    let u: Vec<TransitionId> = u
        .iter()
        .copied()
        .filter(|&t| !p.transition(t).is_silent())
        .collect();
    if u.is_empty() {
        return Ok(None);
    }
    let var = |t: TransitionId| format!("x_t{t}");
    let one = || BigRational::from_integer(1.into());
    let mut prob: Problem<BigRational> = Problem::new();
    for &t in &u {
        prob.declare(var(t), Sort::NonNegReal)?;
    }
    let total = LinTerm::sum_of(u.iter().map(|&t| var(t)));
    prob.assert(Formula::Atom(total.plus_const(-one()), Cmp::Ge))?;
    let mut per_state: BTreeMap<usize, LinTerm<BigRational>> = BTreeMap::new();
    for &t in &u {
        for (q, d) in p.transition(t).effect() {
            let e = per_state.entry(q).or_default();
            e.add_term(BigRational::from_integer(d.into()), var(t));
        }
    }
    for (_, term) in per_state {
        prob.assert(Formula::Atom(term, Cmp::Eq))?;
    }
    match crate::smtlink::solve(&prob, solver)? {
        Outcome::Unsat => Ok(None),
        Outcome::Sat(model) => Ok(Some(
            u.iter()
                .map(|&t| (t, model.get(&var(t)).cloned().unwrap_or_default()))
                .collect(),
        )),
        Outcome::Unknown(why) => Err(SmtError::Inconclusive(why)),
    }
}

/// Net effect of a rational combination of transitions.
pub fn net_effect(p: &Protocol, x: &BTreeMap<TransitionId, BigRational>) -> Vec<BigRational> {
    let mut out = vec![BigRational::default(); p.num_states()];
    for (&t, v) in x {
        for (q, d) in p.transition(t).effect() {
            out[q] += v * BigRational::from_integer(d.into());
        }
    }
    out
}

/// A pair `(s, u)` showing that firing `s` from a `U`-dead configuration can
/// enable the non-silent `u`: from `pre(s) + (pre(u) ⊖ post(s))`, which
/// enables no non-silent transition of `U`, firing `s` enables `u`.
pub fn u_dead_violation(
    p: &Protocol,
    s_set: &TransitionSet,
    u_set: &TransitionSet,
) -> Option<(TransitionId, TransitionId)> {
    let live_u: Vec<TransitionId> = u_set
        .iter()
        .copied()
        .filter(|&u| !p.transition(u).is_silent())
        .collect();
    for &s in s_set {
        let rs = p.transition(s);
        for &u in &live_u {
            let ru = p.transition(u);
            let start = &rs.pre.to_configuration()
                + &ru.pre.to_configuration().monus(&rs.post.to_configuration());
            if live_u
                .iter()
                .all(|&u2| !start.contains_pair(p.transition(u2).pre))
            {
                return Some((s, u));
            }
        }
    }
    None
}

/// Taking transitions of `s_set` from a configuration where every transition of
/// `u_set` is silent never enables a non-silent transition of `u_set`.
pub fn is_u_dead(p: &Protocol, s_set: &TransitionSet, u_set: &TransitionSet) -> bool {
    u_dead_violation(p, s_set, u_set).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::gen_majority;
    use crate::protocol::{normalize, RawTransition, Transition};

    fn ts(p: &Protocol, names: &[&str]) -> TransitionSet {
        names
            .iter()
            .map(|n| p.transition_named(n).unwrap())
            .collect()
    }

    fn flow(p: &Protocol, entries: &[(&str, u64)]) -> FlowAssignment {
        entries
            .iter()
            .map(|&(n, k)| (p.transition_named(n).unwrap(), k))
            .collect()
    }

    fn ping_pong() -> Protocol {
        let mut raw = gen_majority().to_raw();
        raw.states.push("b'".into());
        raw.output.insert("b'".into(), true);
        raw.transitions.push(RawTransition::from(Transition::named(
            "t_bb",
            ["b", "b"],
            ["b'", "b'"],
        )));
        raw.transitions.push(RawTransition::from(Transition::named(
            "t_b'b'",
            ["b'", "b'"],
            ["b", "b"],
        )));
        normalize(raw).unwrap()
    }

    #[test]
    fn flow_example() {
        let p = gen_majority();
        let c = p.configuration(&[("A", 1), ("B", 1)]).unwrap();
        let c2 = p.configuration(&[("a", 2)]).unwrap();
        assert!(check_flow(
            &p,
            &c,
            &c2,
            &flow(&p, &[("t_AB", 1), ("t_Ab", 1)])
        ));
        assert!(!check_flow(&p, &c, &c2, &flow(&p, &[("t_AB", 1)])));
        assert!(check_flow(&p, &c, &c, &FlowAssignment::new()));
    }

    #[test]
    fn traps() {
        let p = gen_majority();
        let u = ts(&p, &["t_AB", "t_Ab"]);
        assert!(is_trap(&p, &p.state_set(&["A", "b"]).unwrap(), &u));
        assert!(is_trap(&p, &StateSet::new(), &u));
        assert!(is_trap(
            &p,
            &p.state_set(&["B"]).unwrap(),
            &TransitionSet::new()
        ));
        assert!(!is_trap(
            &p,
            &p.state_set(&["B"]).unwrap(),
            &ts(&p, &["t_AB"])
        ));
    }

    #[test]
    fn siphons() {
        let p = gen_majority();
        let all: TransitionSet = p.non_silent().into_iter().collect();
        assert!(is_siphon(&p, &StateSet::new(), &all));
        assert!(is_siphon(&p, &p.state_set(&["A", "B"]).unwrap(), &all));
        // dual of the failing trap example on the reversed protocol
        let r = p.reversed();
        let t = r
            .transition_between(
                p.transition(p.transition_named("t_AB").unwrap()).post,
                p.transition(p.transition_named("t_AB").unwrap()).pre,
            )
            .unwrap();
        let u: TransitionSet = [t].into();
        assert!(!is_siphon(&r, &r.state_set(&["B"]).unwrap(), &u));
    }

    #[test]
    fn maximal_trap_examples() {
        let p = gen_majority();
        let u = ts(&p, &["t_AB", "t_Ab"]);
        let z = p.state_set(&["A", "B", "b"]).unwrap();
        assert_eq!(maximal_trap_in_zero(&p, &u, &z), z);
        assert_eq!(
            maximal_trap_in_zero(&p, &u, &StateSet::new()),
            StateSet::new()
        );
        assert_eq!(maximal_trap_in_zero(&p, &TransitionSet::new(), &z), z);
    }

    #[test]
    fn maximal_siphon_examples() {
        let p = gen_majority();
        let u = ts(&p, &["t_AB", "t_Ab"]);
        // t_Ab produces a from {A, b}, t_AB produces a, b from {A, B}
        let z = p.state_set(&["a", "b"]).unwrap();
        assert_eq!(maximal_siphon_in_zero(&p, &u, &z), StateSet::new());
        assert_eq!(
            maximal_siphon_in_zero(&p, &u, &StateSet::new()),
            StateSet::new()
        );
        assert_eq!(maximal_siphon_in_zero(&p, &TransitionSet::new(), &z), z);
    }

    #[test]
    fn potential_reachability_example() {
        let p = gen_majority();
        let c = p.configuration(&[("A", 1), ("B", 1)]).unwrap();
        let c2 = p.configuration(&[("a", 2)]).unwrap();
        let x = flow(&p, &[("t_AB", 1), ("t_Ab", 1)]);
        match check_potential_reachability(&p, &c, &c2, &x) {
            Reachability::Fails {
                condition: ReachCondition::Trap,
                witness: Some(w),
            } => {
                assert!(w.is_superset(&p.state_set(&["A", "b"]).unwrap()));
            }
            other => panic!("expected trap failure, got {other:?}"),
        }
        assert!(check_potential_reachability(&p, &c, &c, &FlowAssignment::new()).is_ok());
    }

    #[test]
    fn u_dead_examples() {
        let p = gen_majority();
        let t1 = ts(&p, &["t_AB", "t_Ab"]);
        let t2 = ts(&p, &["t_Ba", "t_ba"]);
        assert!(is_u_dead(&p, &t2, &t1));
        assert!(is_u_dead(&p, &TransitionSet::new(), &t1));
        let q = ping_pong();
        assert!(!is_u_dead(&q, &ts(&q, &["t_b'b'"]), &ts(&q, &["t_bb"])));
    }
}
