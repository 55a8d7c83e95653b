//! Properties that need the SMT solver: agreement of the solver link with brute
//! force, the emitted layered script, and the layered search against exhaustive
//! partition enumeration and explicit-state exploration.

mod common;

use num_rational::BigRational;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use common::{configurations, protocols, random_shape, solver};
use ppcheck::families::{gen_majority, gen_remainder, RemainderSpec};
use ppcheck::layered::{
    find_layered_termination, layered_constraints, verify_partition, LayeredOutcome, OrderedPartition,
};
use ppcheck::oracle::{classify_graph, explore, inputs_of_size};
use ppcheck::protocol::{Configuration, Protocol, TransitionId, TransitionSet};
use ppcheck::smtlink::{emit_script, solve, Cmp, Formula, LinTerm, Model, Outcome, Problem, Sort};

// ---------------------------------------------------------------- smtlink

#[derive(Debug, Clone)]
struct Atom {
    coeffs: [i64; 3],
    op: Cmp,
    c: i64,
}

fn atom_strategy() -> impl Strategy<Value = Atom> {
    (
        prop::array::uniform3(-3i64..=3),
        prop::sample::select(vec![Cmp::Lt, Cmp::Le, Cmp::Eq, Cmp::Ge, Cmp::Gt]),
        -6i64..=6,
    )
        .prop_map(|(coeffs, op, c)| Atom { coeffs, op, c })
}

const VARS: [&str; 3] = ["a", "b", "c"];
const BOUND: i64 = 4;

fn atom_formula(a: &Atom) -> Formula<i64> {
    let mut t = LinTerm::zero();
    for (k, v) in a.coeffs.iter().zip(VARS) {
        t.add_term(*k, v);
    }
    Formula::cmp_const(t, a.op, a.c)
}

fn atom_holds(a: &Atom, x: [i64; 3]) -> bool {
    let v: i64 = a.coeffs.iter().zip(x).map(|(k, x)| k * x).sum();
    match a.op {
        Cmp::Lt => v < a.c,
        Cmp::Le => v <= a.c,
        Cmp::Eq => v == a.c,
        Cmp::Ge => v >= a.c,
        Cmp::Gt => v > a.c,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// A disjunction of conjunctions of atoms over bounded naturals is
    /// satisfiable for the solver exactly when brute force finds a point.
    #[test]
    fn solver_agrees_with_brute_force(
        clauses in prop::collection::vec(prop::collection::vec(atom_strategy(), 1..=3), 1..=3),
        negate_first: bool,
    ) {
        let mut pb: Problem<i64> = Problem::new();
        for v in VARS {
            pb.declare(v, Sort::Nat).unwrap();
            pb.assert(Formula::cmp_const(LinTerm::var(v), Cmp::Le, BOUND)).unwrap();
        }
        let clause_formula = |atoms: &Vec<Atom>| Formula::and(atoms.iter().map(atom_formula));
        let mut disjuncts: Vec<Formula<i64>> = clauses.iter().map(clause_formula).collect();
        if negate_first {
            disjuncts[0] = Formula::not(disjuncts[0].clone());
        }
        pb.assert(Formula::or(disjuncts)).unwrap();
        let holds = |x: [i64; 3]| {
            clauses.iter().enumerate().any(|(i, atoms)| {
                let all = atoms.iter().all(|a| atom_holds(a, x));
                if i == 0 && negate_first { !all } else { all }
            })
        };
        let mut brute = false;
        for a in 0..=BOUND {
            for b in 0..=BOUND {
                for c in 0..=BOUND {
                    brute |= holds([a, b, c]);
                }
            }
        }
        match solve(&pb, &solver()).unwrap() {
            Outcome::Sat(m) => {
                prop_assert!(brute);
                prop_assert!(pb.check_model(&m).is_ok());
                let x = [m.nat("a") as i64, m.nat("b") as i64, m.nat("c") as i64];
                prop_assert!(holds(x));
            }
            Outcome::Unsat => prop_assert!(!brute),
            Outcome::Unknown(why) => prop_assert!(false, "unknown: {}", why),
        }
    }
}

// ---------------------------------------------------------- golden script

#[test]
fn majority_two_layer_script_is_stable() {
    let p = gen_majority();
    let (decls, constraints) = layered_constraints(&p, 2);
    let mut pb: Problem<i64> = Problem::new();
    for (name, sort) in decls {
        pb.declare(name, sort).unwrap();
    }
    for f in constraints {
        pb.assert(f).unwrap();
    }
    let script = emit_script(&pb);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/majority_k2.smt2");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(path, &script).unwrap();
    }
    let golden = std::fs::read_to_string(path).unwrap();
    assert_eq!(script, golden, "layered script for majority, k = 2, changed");
}

// --------------------------------------------------- layered search checks

/// All ordered partitions of `items` into nonempty blocks.
fn ordered_partitions(items: &[TransitionId]) -> Vec<Vec<TransitionSet>> {
    let n = items.len();
    let mut out = Vec::new();
    // assign each item a block index in 0..n, keep surjective assignments onto 0..k
    let total = (n as u32).max(1).pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let blocks: Vec<usize> = (0..n)
            .map(|_| {
                let b = c as usize % n;
                c /= n as u32;
                b
            })
            .collect();
        let k = blocks.iter().max().map_or(0, |m| m + 1);
        if (0..k).all(|b| blocks.contains(&b)) {
            out.push(
                (0..k)
                    .map(|b| (0..n).filter(|&i| blocks[i] == b).map(|i| items[i]).collect())
                    .collect(),
            );
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The layered search finds a partition exactly when one of the ordered
    /// partitions passes the polynomial verification.
    #[test]
    fn layered_search_agrees_with_enumeration(p in protocols(4, 4)) {
        let ns = p.non_silent();
        prop_assume!(!ns.is_empty() && ns.len() <= 4);
        let report = find_layered_termination(&p, None, &solver()).unwrap();
        let exists = ordered_partitions(&ns).into_iter().any(|layers| {
            let op = OrderedPartition::with_silent_in_first(&p, layers);
            verify_partition(&p, &op, &solver()).unwrap().is_ok()
        });
        match report.outcome {
            LayeredOutcome::Found { partition, ranking } => {
                prop_assert!(exists);
                prop_assert!(verify_partition(&p, &partition, &solver()).unwrap().is_ok());
                prop_assert!(ranking.check(&p, &partition));
            }
            LayeredOutcome::None => prop_assert!(!exists),
            LayeredOutcome::Unknown(why) => prop_assert!(false, "unknown: {}", why),
        }
    }
}

/// Layered termination guarantees that fair executions are silent (not that
/// every execution is finite): from every configuration, each bottom strongly
/// connected component of the step graph is a single terminal configuration.
fn fairly_silent_from(p: &Protocol, c0: &Configuration) -> bool {
    let g = explore(p, c0, 100_000).unwrap();
    classify_graph(p, &g).silent
}

#[test]
fn layered_termination_implies_fair_silence() {
    let mut rng = StdRng::seed_from_u64(11);
    let (mut certified, mut refuted) = (0, 0);
    for _ in 0..60 {
        let p = random_shape(&mut rng, 4, 5).build();
        let report = find_layered_termination(&p, None, &solver()).unwrap();
        let found = matches!(report.outcome, LayeredOutcome::Found { .. });
        let mut silent = true;
        for size in 2..=5u64 {
            for c0 in configurations(p.num_states(), size) {
                silent &= fairly_silent_from(&p, &c0);
            }
        }
        if found {
            assert!(silent, "certified protocol has a non-silent fair execution: {:?}", p.to_raw());
            certified += 1;
        } else {
            refuted += !silent as usize;
        }
    }
    assert!(certified > 5, "too few certified protocols: {certified}");
    assert!(refuted > 0, "no non-silent protocol sampled");
}

#[test]
fn ranking_decreases_along_random_steps() {
    let cases = [
        gen_majority(),
        gen_remainder(&RemainderSpec::benchmark(4, 1)).unwrap(),
        ppcheck::families::gen_broadcast(),
    ];
    let mut rng = StdRng::seed_from_u64(3);
    for p in cases {
        let LayeredOutcome::Found { partition, ranking } =
            find_layered_termination(&p, None, &solver()).unwrap().outcome
        else {
            panic!("expected a layered certificate");
        };
        let n = p.num_states();
        for _ in 0..500 {
            let mut c = Configuration::new();
            for _ in 0..rng.gen_range(2..=8) {
                c.insert(rng.gen_range(0..n), 1);
            }
            let enabled: Vec<TransitionId> = p
                .enabled_transitions(&c)
                .into_iter()
                .filter(|&t| !p.transition(t).is_silent())
                .collect();
            let Some(&t) = enabled.choose(&mut rng) else { continue };
            let layer = partition.layer_of(t).unwrap();
            let c2 = p.step(&c, t).unwrap();
            assert!(ranking.rank(layer, &c2) < ranking.rank(layer, &c));
        }
    }
}

#[test]
fn oracle_inputs_have_the_requested_size() {
    for n in 2..=5u64 {
        let xs = inputs_of_size(2, n);
        assert_eq!(xs.len() as u64, n + 1);
        assert!(xs.iter().all(|x| x.size() == n));
    }
    // a model read back through the term layer keeps exact rationals
    let mut m = Model::new();
    m.insert("v", BigRational::new(3.into(), 2.into()));
    let t: LinTerm<i64> = LinTerm::var("v").plus(2, "v");
    assert_eq!(t.eval(&m).unwrap(), BigRational::new(9.into(), 2.into()));
}
