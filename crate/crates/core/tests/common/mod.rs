//! Random protocol generation shared by the property tests.
#![allow(dead_code)]

pub mod checks;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::Rng;

use ppcheck::protocol::{normalize, Configuration, Protocol, RawProtocol, RawTransition, Transition};
use ppcheck::smtlink::SolverConfig;

pub fn solver() -> SolverConfig {
    SolverConfig::default()
}

pub fn state_name(i: usize) -> String {
    format!("q{i}")
}

/// Shape of a random protocol: transitions as state index quadruples, one
/// output bit per state, and the initial state of each input symbol.
#[derive(Debug, Clone)]
pub struct Shape {
    pub states: usize,
    pub transitions: Vec<[usize; 4]>,
    pub outputs: Vec<bool>,
    pub inputs: Vec<usize>,
}

impl Shape {
    pub fn build(&self) -> Protocol {
        let name = |i: usize| state_name(i % self.states);
        let transitions = self
            .transitions
            .iter()
            .map(|&[a, b, c, d]| {
                RawTransition::from(Transition::new(
                    [&name(a), &name(b)],
                    [&name(c), &name(d)],
                ))
            })
            .collect();
        let alphabet: Vec<String> = (0..self.inputs.len()).map(|i| format!("x{i}")).collect();
        normalize(RawProtocol {
            states: (0..self.states).map(|i| state_name(i).into()).collect(),
            transitions,
            input: alphabet
                .iter()
                .zip(&self.inputs)
                .map(|(s, &q)| (s.clone(), name(q).into()))
                .collect(),
            alphabet,
            output: (0..self.states)
                .map(|i| (state_name(i).into(), self.outputs[i]))
                .collect(),
        })
        .expect("generated protocols are valid")
    }
}

/// Protocols with `2..=max_states` states and up to `max_transitions` declared transitions.
pub fn shapes(max_states: usize, max_transitions: usize) -> impl Strategy<Value = Shape> {
    (2..=max_states).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::array::uniform4(0..n), 0..=max_transitions),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(0..n, 1..=2),
        )
            .prop_map(move |(transitions, outputs, inputs)| Shape {
                states: n,
                transitions,
                outputs,
                inputs,
            })
    })
}

pub fn protocols(max_states: usize, max_transitions: usize) -> impl Strategy<Value = Protocol> {
    shapes(max_states, max_transitions).prop_map(|s| s.build())
}

/// A random shape drawn from `rng`, for loops that do not need shrinking.
pub fn random_shape(rng: &mut StdRng, max_states: usize, max_transitions: usize) -> Shape {
    let n = rng.gen_range(2..=max_states);
    let m = rng.gen_range(0..=max_transitions);
    Shape {
        states: n,
        transitions: (0..m)
            .map(|_| std::array::from_fn(|_| rng.gen_range(0..n)))
            .collect(),
        outputs: (0..n).map(|_| rng.gen()).collect(),
        inputs: (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(0..n)).collect(),
    }
}

/// Every configuration over `n` states with exactly `size` agents.
pub fn configurations(n: usize, size: u64) -> Vec<Configuration> {
    fn go(q: usize, n: usize, left: u64, acc: &mut Vec<u64>, out: &mut Vec<Configuration>) {
        if q + 1 == n {
            acc.push(left);
            out.push(Configuration::from_dense(acc));
            acc.pop();
            return;
        }
        for k in 0..=left {
            acc.push(k);
            go(q + 1, n, left - k, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, size, &mut Vec::new(), &mut out);
    out
}
