//! Solver-free properties of traps, siphons, potential reachability and U-deadness.

mod common;

use proptest::prelude::*;

use common::checks::{
    all_states, executions_are_potentially_reachable, maximal_sets_exhaustive, subset, u_dead_matches_simulation,
    union_closure,
};
use common::protocols;
use ppcheck::protocol::TransitionSet;
use ppcheck::structural::{
    consumers, is_siphon, is_trap, maximal_siphon_in_zero, maximal_trap_in_zero, producers, siphon_around,
    trap_around,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn traps_and_siphons_are_closed_under_union(
        p in protocols(6, 8), u_mask: u64, a_mask: u64, b_mask: u64,
    ) {
        prop_assert_eq!(union_closure(&p, u_mask, a_mask, b_mask), Ok(()));
    }

    #[test]
    fn traps_are_siphons_of_the_reversed_protocol(p in protocols(6, 8), u_mask: u64, s_mask: u64) {
        let r = p.reversed();
        let u: TransitionSet = subset(&p.non_silent(), u_mask);
        let u_rev: TransitionSet = u
            .iter()
            .map(|&t| {
                let rule = p.transition(t);
                r.transition_between(rule.post, rule.pre).expect("reversed rule exists")
            })
            .collect();
        let s = subset(&all_states(&p), s_mask);
        prop_assert_eq!(is_trap(&p, &s, &u), is_siphon(&r, &s, &u_rev));
        prop_assert_eq!(is_siphon(&p, &s, &u), is_trap(&r, &s, &u_rev));
    }

    #[test]
    fn maximal_sets_agree_with_exhaustive_search(p in protocols(10, 14), u_mask: u64, z_mask: u64, seed: u64) {
        prop_assert_eq!(maximal_sets_exhaustive(&p, u_mask, z_mask, seed), Ok(()));
    }

    #[test]
    fn small_sets_stay_inside_the_maximal_ones(p in protocols(8, 12), u_mask: u64, z_mask: u64) {
        let u: TransitionSet = subset(&p.non_silent(), u_mask);
        let zero = subset(&all_states(&p), z_mask);
        let trap = maximal_trap_in_zero(&p, &u, &zero);
        for &q in &trap {
            let r = trap_around(&p, &u, &trap, q);
            prop_assert!(r.contains(&q) && r.is_subset(&trap) && is_trap(&p, &r, &u));
            if !producers(&p, &[q].into(), &u).is_empty() {
                prop_assert!(!producers(&p, &r, &u).is_empty());
            }
        }
        let siphon = maximal_siphon_in_zero(&p, &u, &zero);
        for &q in &siphon {
            let s = siphon_around(&p, &u, &siphon, q);
            prop_assert!(s.contains(&q) && s.is_subset(&siphon) && is_siphon(&p, &s, &u));
            if !consumers(&p, &[q].into(), &u).is_empty() {
                prop_assert!(!consumers(&p, &s, &u).is_empty());
            }
        }
    }
}

#[test]
fn potential_reachability_holds_on_random_executions() {
    executions_are_potentially_reachable(0x5eed, 1000).unwrap();
}

#[test]
fn u_dead_agrees_with_bounded_simulation() {
    let with_violation = u_dead_matches_simulation(7, 300).unwrap();
    assert!(with_violation > 10, "generator too tame: {with_violation}");
}
