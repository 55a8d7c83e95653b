//! End-to-end runs of both verifiers and the correctness check against the solver.

use ppcheck::consensus::{
    audit_counterexample, check_strong_consensus, ConsensusOutcome, RefinementOptions,
};
use ppcheck::correctness::{check_correctness, CorrectnessOutcome};
use ppcheck::families::{
    flock_predicate, gen_broadcast, gen_flock_cms, gen_majority, gen_remainder, RemainderSpec,
};
use ppcheck::layered::{
    find_layered_termination, verify_partition, LayerCondition, LayeredOutcome, OrderedPartition,
    PartitionVerdict,
};
use ppcheck::predicate::Predicate;
use ppcheck::protocol::{
    normalize, Protocol, RawProtocol, RawTransition, Transition, TransitionSet,
};
use ppcheck::smtlink::SolverConfig;

fn solver() -> SolverConfig {
    SolverConfig::default()
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

fn two_state() -> Protocol {
    normalize(RawProtocol {
        states: vec!["p".into(), "q".into()],
        transitions: vec![],
        alphabet: vec!["p".into(), "q".into()],
        input: [("p".into(), "p".into()), ("q".into(), "q".into())].into(),
        output: [("p".into(), false), ("q".into(), true)].into(),
    })
    .unwrap()
}

fn ts(p: &Protocol, names: &[&str]) -> TransitionSet {
    names
        .iter()
        .map(|n| p.transition_named(n).unwrap())
        .collect()
}

#[test]
fn majority_layered() {
    let p = gen_majority();
    let report = find_layered_termination(&p, None, &solver()).unwrap();
    let LayeredOutcome::Found { partition, ranking } = report.outcome else {
        panic!("{report:?}")
    };
    assert_eq!(partition.len(), 2);
    assert!(ranking.check(&p, &partition));
    assert_eq!(
        verify_partition(&p, &partition, &solver()).unwrap(),
        PartitionVerdict::Ok
    );
}

#[test]
fn majority_partitions() {
    let p = gen_majority();
    let t1 = ts(&p, &["t_AB", "t_Ab"]);
    let t2 = ts(&p, &["t_Ba", "t_ba"]);
    let good = OrderedPartition::with_silent_in_first(&p, vec![t1.clone(), t2.clone()]);
    assert!(verify_partition(&p, &good, &solver()).unwrap().is_ok());
    let swapped = OrderedPartition::with_silent_in_first(&p, vec![t2, t1.clone()]);
    match verify_partition(&p, &swapped, &solver()).unwrap() {
        PartitionVerdict::Fails {
            layer: 2,
            condition: LayerCondition::Dead,
            ..
        } => {}
        other => panic!("{other:?}"),
    }
    let single =
        OrderedPartition::with_silent_in_first(&p, vec![p.non_silent().into_iter().collect()]);
    match verify_partition(&p, &single, &solver()).unwrap() {
        PartitionVerdict::Fails {
            layer: 1,
            condition: LayerCondition::Cycle,
            ..
        } => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn ping_pong_has_no_layering() {
    let p = ping_pong();
    let report = find_layered_termination(&p, None, &solver()).unwrap();
    assert_eq!(report.outcome, LayeredOutcome::None);
    assert_eq!(report.k_reached, 6);
}

#[test]
fn all_silent_is_trivially_layered() {
    let p = two_state();
    let report = find_layered_termination(&p, None, &solver()).unwrap();
    let LayeredOutcome::Found { partition, .. } = report.outcome else {
        panic!()
    };
    assert_eq!(partition.len(), 1);
    assert!(verify_partition(&p, &partition, &solver()).unwrap().is_ok());
}

#[test]
fn majority_consensus_holds_after_refinement() {
    let p = gen_majority();
    let v = check_strong_consensus(&p, &solver(), &RefinementOptions::default()).unwrap();
    assert!(v.holds(), "{v:?}");
    assert!(v.iterations >= 1);
}

#[test]
fn two_state_consensus_fails() {
    let p = two_state();
    let v = check_strong_consensus(&p, &solver(), &RefinementOptions::default()).unwrap();
    let ConsensusOutcome::Fails { counterexample, .. } = &v.outcome else {
        panic!("{v:?}")
    };
    assert!(audit_counterexample(&p, counterexample));
    assert!(counterexample.x1.is_empty() && counterexample.x2.is_empty());
    let mut tampered = counterexample.clone();
    tampered.c1.insert(0, 1);
    assert!(!audit_counterexample(&p, &tampered));
}

#[test]
fn small_families_hold() {
    for p in [
        gen_broadcast(),
        gen_remainder(&RemainderSpec::benchmark(5, 1)).unwrap(),
        gen_flock_cms(5).unwrap(),
    ] {
        let v = check_strong_consensus(&p, &solver(), &RefinementOptions::default()).unwrap();
        assert!(v.holds(), "{v:?}");
    }
}

#[test]
fn correctness() {
    let p = gen_majority();
    let pd = Predicate::threshold([("A", -1), ("B", 1)], 0).negate();
    let opts = RefinementOptions::default();
    assert!(check_correctness(&p, &pd, &solver(), &opts)
        .unwrap()
        .holds());
    let wrong = check_correctness(&p, &pd.clone().negate(), &solver(), &opts).unwrap();
    assert!(matches!(wrong.outcome, CorrectnessOutcome::Fails { .. }));
    let flock = gen_flock_cms(4).unwrap();
    assert!(
        check_correctness(&flock, &flock_predicate(4), &solver(), &opts)
            .unwrap()
            .holds()
    );
    let rem = RemainderSpec::benchmark(5, 1);
    let p = gen_remainder(&rem).unwrap();
    assert!(check_correctness(&p, &rem.predicate(), &solver(), &opts)
        .unwrap()
        .holds());
}
