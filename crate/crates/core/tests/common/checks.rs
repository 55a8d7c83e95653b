//! Structural property checks, shared between the property tests and the
//! acceptance suite. Each returns a description of the first violation.

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::{configurations, random_shape};
use ppcheck::protocol::{Configuration, FlowAssignment, Protocol, StateSet, TransitionId, TransitionSet};
use ppcheck::structural::{
    audit_potential_reachability, is_siphon, is_trap, is_u_dead, maximal_siphon_in_zero, maximal_siphon_with_order,
    maximal_trap_in_zero, maximal_trap_with_order, u_dead_violation,
};

pub type Check = Result<(), String>;

pub fn subset<T: Copy + Ord>(items: &[T], mask: u64) -> BTreeSet<T> {
    items
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &x)| x)
        .collect()
}

pub fn all_states(p: &Protocol) -> Vec<usize> {
    (0..p.num_states()).collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Unions of two `U`-traps (resp. `U`-siphons) are `U`-traps (resp. `U`-siphons).
pub fn union_closure(p: &Protocol, u_mask: u64, a_mask: u64, b_mask: u64) -> Check {
    let u: TransitionSet = subset(&p.non_silent(), u_mask);
    let (a, b) = (subset(&all_states(p), a_mask), subset(&all_states(p), b_mask));
    let union: StateSet = a.union(&b).copied().collect();
    if is_trap(p, &a, &u) && is_trap(p, &b, &u) {
        ensure(is_trap(p, &union, &u), || format!("trap union {a:?} ∪ {b:?} is no trap for {u:?}"))?;
    }
    if is_siphon(p, &a, &u) && is_siphon(p, &b, &u) {
        ensure(is_siphon(p, &union, &u), || format!("siphon union {a:?} ∪ {b:?} is no siphon for {u:?}"))?;
    }
    Ok(())
}

/// The greedy maximal trap/siphon inside `zero` is the union of all traps
/// (siphons) inside `zero`, found by enumeration, for any scan order.
pub fn maximal_sets_exhaustive(p: &Protocol, u_mask: u64, z_mask: u64, seed: u64) -> Check {
    let u: TransitionSet = subset(&p.non_silent(), u_mask);
    let zero = subset(&all_states(p), z_mask);
    let elems: Vec<usize> = zero.iter().copied().collect();
    let union_of = |pred: &dyn Fn(&StateSet) -> bool| -> StateSet {
        (0..1u64 << elems.len())
            .map(|m| subset(&elems, m))
            .filter(|s| pred(s))
            .flatten()
            .collect()
    };
    let best_trap = union_of(&|s| is_trap(p, s, &u));
    let best_siphon = union_of(&|s| is_siphon(p, s, &u));
    let mut order: Vec<TransitionId> = u.iter().copied().collect();
    order.shuffle(&mut StdRng::seed_from_u64(seed));
    let found = [
        maximal_trap_in_zero(p, &u, &zero),
        maximal_trap_with_order(p, &order, &zero),
        maximal_siphon_in_zero(p, &u, &zero),
        maximal_siphon_with_order(p, &order, &zero),
    ];
    let expected = [&best_trap, &best_trap, &best_siphon, &best_siphon];
    for (f, e) in found.iter().zip(expected) {
        ensure(f == e, || format!("maximal set {f:?} differs from exhaustive {e:?} (U = {u:?}, zero = {zero:?})"))?;
    }
    Ok(())
}

/// Random real executions are potentially reachable, from every point on.
pub fn executions_are_potentially_reachable(seed: u64, executions: usize) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..executions {
        let p = random_shape(&mut rng, 6, 10).build();
        let n = p.num_states();
        let mut c = Configuration::new();
        for _ in 0..rng.gen_range(2..=7) {
            c.insert(rng.gen_range(0..n), 1);
        }
        let mut trace = vec![c.clone()];
        let mut steps: Vec<TransitionId> = Vec::new();
        for _ in 0..rng.gen_range(0..25) {
            let enabled: Vec<TransitionId> = p
                .enabled_transitions(&c)
                .into_iter()
                .filter(|&t| !p.transition(t).is_silent())
                .collect();
            let Some(&t) = enabled.choose(&mut rng) else { break };
            c = p.step(&c, t).map_err(|e| e.to_string())?;
            trace.push(c.clone());
            steps.push(t);
        }
        for start in 0..trace.len() {
            let mut x = FlowAssignment::new();
            for &t in &steps[start..] {
                x.insert(t, 1);
            }
            let audit = audit_potential_reachability(&p, &trace[start], &c, &x);
            ensure(audit.verdict().is_ok(), || {
                format!("{} ⇝ {} via {x:?} rejected: {audit:?}", p.show(&trace[start]), p.show(&c))
            })?;
        }
    }
    Ok(())
}

fn dead_for(p: &Protocol, c: &Configuration, u: &TransitionSet) -> bool {
    u.iter().all(|&t| p.transition(t).is_silent() || !p.is_enabled(c, t))
}

/// Whether some `S`-sequence of length ≤ `depth` from a `U`-dead configuration
/// with at most `max_agents` agents reaches one where `U` is enabled again.
pub fn simulated_violation(p: &Protocol, s: &TransitionSet, u: &TransitionSet, max_agents: u64, depth: usize) -> bool {
    for size in 2..=max_agents {
        for c0 in configurations(p.num_states(), size) {
            if !dead_for(p, &c0, u) {
                continue;
            }
            let mut frontier = vec![c0];
            for _ in 0..depth {
                let mut next = Vec::new();
                for c in &frontier {
                    for &t in s {
                        if p.is_enabled(c, t) {
                            let c2 = p.step(c, t).unwrap();
                            if !dead_for(p, &c2, u) {
                                return true;
                            }
                            if !next.contains(&c2) {
                                next.push(c2);
                            }
                        }
                    }
                }
                frontier = next;
            }
        }
    }
    false
}

/// `is_u_dead` agrees with bounded simulation (≤ 5 states, ≤ 4 agents,
/// depth 6), and every reported witness is a real one-step violation.
/// Returns the number of protocols with a violation.
pub fn u_dead_matches_simulation(seed: u64, cases: usize) -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut with_violation = 0;
    for _ in 0..cases {
        let p = random_shape(&mut rng, 5, 7).build();
        let ns = p.non_silent();
        let s: TransitionSet = ns.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let u: TransitionSet = ns.iter().copied().filter(|t| !s.contains(t) && rng.gen_bool(0.6)).collect();
        let simulated = simulated_violation(&p, &s, &u, 4, 6);
        ensure(is_u_dead(&p, &s, &u) == !simulated, || {
            format!("is_u_dead disagrees with simulation for S = {s:?}, U = {u:?} in {:?}", p.to_raw())
        })?;
        if let Some((t, v)) = u_dead_violation(&p, &s, &u) {
            let rs = p.transition(t);
            let start = &rs.pre.to_configuration()
                + &p.transition(v).pre.to_configuration().monus(&rs.post.to_configuration());
            ensure(dead_for(&p, &start, &u), || format!("witness start {} is not dead", p.show(&start)))?;
            let after = p.step(&start, t).map_err(|e| e.to_string())?;
            ensure(p.is_enabled(&after, v), || "witness does not enable its transition".into())?;
            with_violation += 1;
        }
    }
    Ok(with_violation)
}
