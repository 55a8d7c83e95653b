//! Protocol and configuration model.
//!
//! A protocol is built from a [`RawProtocol`] by [`normalize`], which
//! validates it, deduplicates declared transitions by their `(pre, post)`
//! multiset pair and completes the transition relation with implicit silent
//! transitions for every pair of states that has no declared transition.
//!
//! States, symbols and transitions are addressed by dense indices. States
//! and symbols are sorted lexicographically by name, transitions by their
//! `(pre, post)` index pairs, so every derived artifact is reproducible.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a state in [`Protocol::states`].
pub type StateIdx = usize;
/// Index of a transition in [`Protocol::transitions`].
pub type TransitionId = usize;
/// A set of states, by index.
pub type StateSet = BTreeSet<StateIdx>;
/// A set of transitions, by index.
pub type TransitionSet = BTreeSet<TransitionId>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("protocol declares no states")]
    NoStates,
    #[error("invalid state name {0:?}")]
    InvalidStateName(String),
    #[error("duplicate state {0:?}")]
    DuplicateState(String),
    #[error("transition {transition} refers to unknown state {state:?}")]
    UnknownStateInTransition { transition: String, state: String },
    #[error("transition {transition} has {field} of size {size}, expected 2")]
    NonBinaryTransition {
        transition: String,
        field: &'static str,
        size: usize,
    },
    #[error("input alphabet is empty")]
    EmptyAlphabet,
    #[error("duplicate input symbol {0:?}")]
    DuplicateSymbol(String),
    #[error("input symbol {0:?} has no initial state")]
    MissingInput(String),
    #[error("input map mentions undeclared symbol {0:?}")]
    UnknownSymbol(String),
    #[error("input symbol {symbol:?} maps to unknown state {state:?}")]
    UnknownStateInInput { symbol: String, state: String },
    #[error("state {0:?} has no output value")]
    MissingOutput(String),
    #[error("output map mentions unknown state {0:?}")]
    UnknownStateInOutput(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("transition {transition} not enabled: missing {missing:?}")]
    NotEnabled {
        transition: String,
        missing: Vec<(String, u64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PopulationError {
    #[error("population of size {0} is too small, at least 2 agents are required")]
    TooSmall(u64),
    #[error("unknown index {0}")]
    UnknownIndex(usize),
}

/// Symbolic state name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(String);

impl StateId {
    pub fn new(name: impl Into<String>) -> Self {
        StateId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StateId {
    fn from(s: &str) -> Self {
        StateId(s.to_string())
    }
}

impl From<String> for StateId {
    fn from(s: String) -> Self {
        StateId(s)
    }
}

/// Multiset of exactly two states, stored in sorted order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair([StateIdx; 2]);

impl Pair {
    pub fn new(p: StateIdx, q: StateIdx) -> Self {
        if p <= q {
            Pair([p, q])
        } else {
            Pair([q, p])
        }
    }

    pub fn states(&self) -> [StateIdx; 2] {
        self.0
    }

    /// Multiplicity of `q` in the pair.
    pub fn count(&self, q: StateIdx) -> u64 {
        (self.0[0] == q) as u64 + (self.0[1] == q) as u64
    }

    pub fn contains(&self, q: StateIdx) -> bool {
        self.0[0] == q || self.0[1] == q
    }

    /// True when both agents are in the same state.
    pub fn is_double(&self) -> bool {
        self.0[0] == self.0[1]
    }

    /// Distinct states of the pair with their multiplicities.
    pub fn entries(&self) -> Vec<(StateIdx, u64)> {
        if self.is_double() {
            vec![(self.0[0], 2)]
        } else {
            vec![(self.0[0], 1), (self.0[1], 1)]
        }
    }

    pub fn intersects(&self, set: &StateSet) -> bool {
        set.contains(&self.0[0]) || set.contains(&self.0[1])
    }

    pub fn to_configuration(&self) -> Configuration {
        let mut c = Configuration::new();
        c.insert(self.0[0], 1);
        c.insert(self.0[1], 1);
        c
    }
}

/// A transition as declared, with ordered endpoints `(p, q) -> (p', q')`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub pre: [StateId; 2],
    pub post: [StateId; 2],
}

impl Transition {
    pub fn new(pre: [&str; 2], post: [&str; 2]) -> Self {
        Transition {
            name: None,
            pre: [pre[0].into(), pre[1].into()],
            post: [post[0].into(), post[1].into()],
        }
    }

    pub fn named(name: &str, pre: [&str; 2], post: [&str; 2]) -> Self {
        Transition {
            name: Some(name.to_string()),
            ..Transition::new(pre, post)
        }
    }

    pub fn is_silent(&self) -> bool {
        let mut a = self.pre.clone();
        let mut b = self.post.clone();
        a.sort();
        b.sort();
        a == b
    }
}

/// A transition with unchecked arity, as read from a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTransition {
    pub name: Option<String>,
    pub pre: Vec<StateId>,
    pub post: Vec<StateId>,
}

impl From<Transition> for RawTransition {
    fn from(t: Transition) -> Self {
        RawTransition {
            name: t.name,
            pre: t.pre.to_vec(),
            post: t.post.to_vec(),
        }
    }
}

/// Unvalidated protocol description.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawProtocol {
    pub states: Vec<StateId>,
    pub transitions: Vec<RawTransition>,
    pub alphabet: Vec<String>,
    pub input: BTreeMap<String, StateId>,
    pub output: BTreeMap<StateId, bool>,
}

/// Semantic transition: a distinct `(pre, post)` multiset pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub pre: Pair,
    pub post: Pair,
    /// Display name: the first declared name, or the rendered endpoints.
    pub label: String,
    /// Indices into [`Protocol::declared`] that collapsed onto this rule.
    /// Empty for implicit silent transitions.
    pub declared: Vec<usize>,
}

impl Rule {
    pub fn is_silent(&self) -> bool {
        self.pre == self.post
    }

    pub fn is_implicit(&self) -> bool {
        self.declared.is_empty()
    }

    /// `post(t)(q) - pre(t)(q)`.
    pub fn delta(&self, q: StateIdx) -> i64 {
        self.post.count(q) as i64 - self.pre.count(q) as i64
    }

    /// Nonzero entries of the effect vector, sorted by state.
    pub fn effect(&self) -> Vec<(StateIdx, i64)> {
        let mut out: BTreeMap<StateIdx, i64> = BTreeMap::new();
        for q in self.pre.states() {
            *out.entry(q).or_default() -= 1;
        }
        for q in self.post.states() {
            *out.entry(q).or_default() += 1;
        }
        out.into_iter().filter(|&(_, d)| d != 0).collect()
    }

    /// Whether the rule takes an agent out of some state in `set`.
    pub fn consumes_from(&self, set: &StateSet) -> bool {
        self.pre.intersects(set)
    }

    /// Whether the rule puts an agent into some state in `set`.
    pub fn produces_into(&self, set: &StateSet) -> bool {
        self.post.intersects(set)
    }
}

/// A validated, normalized population protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Protocol {
    states: Vec<StateId>,
    index: HashMap<StateId, StateIdx>,
    declared: Vec<Transition>,
    rules: Vec<Rule>,
    alphabet: Vec<String>,
    input: Vec<StateIdx>,
    output: Vec<bool>,
}

fn valid_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c.is_control())
}

/// Validate a raw protocol and complete it with implicit silent transitions.
pub fn normalize(raw: RawProtocol) -> Result<Protocol, ProtocolError> {
    if raw.states.is_empty() {
        return Err(ProtocolError::NoStates);
    }
    let mut states = raw.states.clone();
    for s in &states {
        if !valid_token(s.as_str()) {
            return Err(ProtocolError::InvalidStateName(s.0.clone()));
        }
    }
    states.sort();
    for w in states.windows(2) {
        if w[0] == w[1] {
            return Err(ProtocolError::DuplicateState(w[0].0.clone()));
        }
    }
    let index: HashMap<StateId, StateIdx> = states
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();

    let mut declared = Vec::with_capacity(raw.transitions.len());
    let mut by_pair: BTreeMap<(Pair, Pair), Vec<usize>> = BTreeMap::new();
    for (k, t) in raw.transitions.into_iter().enumerate() {
        let label = t.name.clone().unwrap_or_else(|| format!("#{k}"));
        for (field, side) in [("pre", &t.pre), ("post", &t.post)] {
            if side.len() != 2 {
                return Err(ProtocolError::NonBinaryTransition {
                    transition: label,
                    field,
                    size: side.len(),
                });
            }
        }
        let lookup = |s: &StateId| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| ProtocolError::UnknownStateInTransition {
                    transition: label.clone(),
                    state: s.0.clone(),
                })
        };
        let pre = Pair::new(lookup(&t.pre[0])?, lookup(&t.pre[1])?);
        let post = Pair::new(lookup(&t.post[0])?, lookup(&t.post[1])?);
        by_pair.entry((pre, post)).or_default().push(k);
        declared.push(Transition {
            name: t.name,
            pre: [t.pre[0].clone(), t.pre[1].clone()],
            post: [t.post[0].clone(), t.post[1].clone()],
        });
    }

    let covered: BTreeSet<Pair> = by_pair.keys().map(|(pre, _)| *pre).collect();
    let mut rules: Vec<Rule> = Vec::new();
    for ((pre, post), ids) in by_pair {
        let label = ids
            .iter()
            .find_map(|&k| declared[k].name.clone())
            .unwrap_or_else(|| render(&states, pre, post));
        rules.push(Rule {
            pre,
            post,
            label,
            declared: ids,
        });
    }
    for p in 0..states.len() {
        for q in p..states.len() {
            let pair = Pair::new(p, q);
            if !covered.contains(&pair) {
                rules.push(Rule {
                    pre: pair,
                    post: pair,
                    label: render(&states, pair, pair),
                    declared: Vec::new(),
                });
            }
        }
    }
    rules.sort_by(|a, b| (a.pre, a.post).cmp(&(b.pre, b.post)));

    if raw.alphabet.is_empty() {
        return Err(ProtocolError::EmptyAlphabet);
    }
    let mut alphabet = raw.alphabet.clone();
    alphabet.sort();
    for w in alphabet.windows(2) {
        if w[0] == w[1] {
            return Err(ProtocolError::DuplicateSymbol(w[0].clone()));
        }
    }
    for sym in raw.input.keys() {
        if alphabet.binary_search(sym).is_err() {
            return Err(ProtocolError::UnknownSymbol(sym.clone()));
        }
    }
    let mut input = Vec::with_capacity(alphabet.len());
    for sym in &alphabet {
        let state = raw
            .input
            .get(sym)
            .ok_or_else(|| ProtocolError::MissingInput(sym.clone()))?;
        let q = index
            .get(state)
            .copied()
            .ok_or_else(|| ProtocolError::UnknownStateInInput {
                symbol: sym.clone(),
                state: state.0.clone(),
            })?;
        input.push(q);
    }
    for s in raw.output.keys() {
        if !index.contains_key(s) {
            return Err(ProtocolError::UnknownStateInOutput(s.0.clone()));
        }
    }
    let output = states
        .iter()
        .map(|s| {
            raw.output
                .get(s)
                .copied()
                .ok_or_else(|| ProtocolError::MissingOutput(s.0.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Protocol {
        states,
        index,
        declared,
        rules,
        alphabet,
        input,
        output,
    })
}

fn render(states: &[StateId], pre: Pair, post: Pair) -> String {
    let [a, b] = pre.states();
    let [c, d] = post.states();
    format!(
        "({},{})->({},{})",
        states[a], states[b], states[c], states[d]
    )
}

impl Protocol {
    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, q: StateIdx) -> &str {
        self.states[q].as_str()
    }

    pub fn state_index(&self, name: &str) -> Option<StateIdx> {
        self.index.get(&StateId::from(name)).copied()
    }

    /// Declared transitions, verbatim and in declaration order.
    pub fn declared(&self) -> &[Transition] {
        &self.declared
    }

    /// All semantic transitions, including implicit silent ones.
    pub fn transitions(&self) -> &[Rule] {
        &self.rules
    }

    pub fn transition(&self, t: TransitionId) -> &Rule {
        &self.rules[t]
    }

    /// Find a transition by label.
    pub fn transition_named(&self, label: &str) -> Option<TransitionId> {
        self.rules.iter().position(|r| r.label == label)
    }

    /// Find the transition with the given multiset endpoints.
    pub fn transition_between(&self, pre: Pair, post: Pair) -> Option<TransitionId> {
        self.rules
            .binary_search_by(|r| (r.pre, r.post).cmp(&(pre, post)))
            .ok()
    }

    /// Non-silent transitions in index order.
    pub fn non_silent(&self) -> Vec<TransitionId> {
        (0..self.rules.len())
            .filter(|&t| !self.rules[t].is_silent())
            .collect()
    }

    /// Number of non-silent transitions, the `|T|` reported for benchmarks.
    pub fn non_silent_count(&self) -> usize {
        self.rules.iter().filter(|r| !r.is_silent()).count()
    }

    /// Declared (deduplicated) transitions, silent or not.
    pub fn declared_rules(&self) -> Vec<TransitionId> {
        (0..self.rules.len())
            .filter(|&t| !self.rules[t].is_implicit())
            .collect()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn symbol_index(&self, sym: &str) -> Option<usize> {
        self.alphabet.binary_search_by(|s| s.as_str().cmp(sym)).ok()
    }

    /// Initial state of input symbol `sigma`.
    pub fn input_state(&self, sigma: usize) -> StateIdx {
        self.input[sigma]
    }

    /// The image `I(Σ)` of the input map.
    pub fn initial_states(&self) -> StateSet {
        self.input.iter().copied().collect()
    }

    pub fn output(&self, q: StateIdx) -> bool {
        self.output[q]
    }

    pub fn outputs(&self) -> &[bool] {
        &self.output
    }

    /// States with the given output value.
    pub fn states_with_output(&self, b: bool) -> StateSet {
        (0..self.states.len())
            .filter(|&q| self.output[q] == b)
            .collect()
    }

    /// Back to an unvalidated description with the declared transitions.
    pub fn to_raw(&self) -> RawProtocol {
        RawProtocol {
            states: self.states.clone(),
            transitions: self
                .declared
                .iter()
                .cloned()
                .map(RawTransition::from)
                .collect(),
            alphabet: self.alphabet.clone(),
            input: self
                .alphabet
                .iter()
                .zip(&self.input)
                .map(|(s, &q)| (s.clone(), self.states[q].clone()))
                .collect(),
            output: self
                .states
                .iter()
                .cloned()
                .zip(self.output.iter().copied())
                .collect(),
        }
    }

    /// The protocol with every declared transition reversed.
    pub fn reversed(&self) -> Protocol {
        let mut raw = self.to_raw();
        for t in &mut raw.transitions {
            std::mem::swap(&mut t.pre, &mut t.post);
        }
        normalize(raw).expect("reversal preserves validity")
    }

    pub fn is_enabled(&self, c: &Configuration, t: TransitionId) -> bool {
        c.contains_pair(self.rules[t].pre)
    }

    /// Fire `t` at `c`.
    pub fn step(&self, c: &Configuration, t: TransitionId) -> Result<Configuration, StepError> {
        let rule = &self.rules[t];
        if !c.contains_pair(rule.pre) {
            let missing = rule
                .pre
                .entries()
                .into_iter()
                .filter(|&(q, n)| c.get(q) < n)
                .map(|(q, n)| (self.states[q].0.clone(), n - c.get(q)))
                .collect();
            return Err(StepError::NotEnabled {
                transition: rule.label.clone(),
                missing,
            });
        }
        let mut next = c.clone();
        for q in rule.pre.states() {
            next.remove(q, 1);
        }
        for q in rule.post.states() {
            next.insert(q, 1);
        }
        Ok(next)
    }

    /// All transitions, declared and implicit, enabled at `c`.
    pub fn enabled_transitions(&self, c: &Configuration) -> Vec<TransitionId> {
        (0..self.rules.len())
            .filter(|&t| c.contains_pair(self.rules[t].pre))
            .collect()
    }

    /// Every enabled transition is silent.
    pub fn is_terminal(&self, c: &Configuration) -> bool {
        !self
            .rules
            .iter()
            .any(|r| !r.is_silent() && c.contains_pair(r.pre))
    }

    /// Common output of the supported states, if they agree.
    pub fn consensus_output(&self, c: &Configuration) -> Option<bool> {
        let mut outputs = c.support().map(|q| self.output[q]);
        let first = outputs.next()?;
        outputs.all(|b| b == first).then_some(first)
    }

    /// `I(X)`: the initial configuration of input `x`.
    pub fn initialize(&self, x: &InputAssignment) -> Result<Configuration, PopulationError> {
        if x.size() < 2 {
            return Err(PopulationError::TooSmall(x.size()));
        }
        let mut c = Configuration::new();
        for (sigma, n) in x.iter() {
            if sigma >= self.alphabet.len() {
                return Err(PopulationError::UnknownIndex(sigma));
            }
            c.insert(self.input[sigma], n);
        }
        Ok(c)
    }

    /// Render a configuration as `{name: count, ...}`.
    pub fn show(&self, c: &Configuration) -> String {
        let parts: Vec<String> = c
            .iter()
            .map(|(q, n)| format!("{}: {}", self.states[q], n))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }

    /// Configuration from `(state name, count)` pairs.
    pub fn configuration(&self, entries: &[(&str, u64)]) -> Option<Configuration> {
        let mut c = Configuration::new();
        for &(name, n) in entries {
            c.insert(self.state_index(name)?, n);
        }
        Some(c)
    }

    /// Input assignment from `(symbol, count)` pairs.
    pub fn input_assignment(&self, entries: &[(&str, u64)]) -> Option<InputAssignment> {
        let mut x = InputAssignment::new();
        for &(name, n) in entries {
            x.insert(self.symbol_index(name)?, n);
        }
        Some(x)
    }

    /// State set from names.
    pub fn state_set(&self, names: &[&str]) -> Option<StateSet> {
        names.iter().map(|n| self.state_index(n)).collect()
    }
}

macro_rules! sparse_counts {
    ($name:ident) => {
        #[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name {
            counts: BTreeMap<usize, u64>,
        }

        impl $name {
            pub fn new() -> Self {
                Self::default()
            }

            pub fn get(&self, k: usize) -> u64 {
                self.counts.get(&k).copied().unwrap_or(0)
            }

            pub fn set(&mut self, k: usize, n: u64) {
                if n == 0 {
                    self.counts.remove(&k);
                } else {
                    self.counts.insert(k, n);
                }
            }

            pub fn insert(&mut self, k: usize, n: u64) {
                let v = self.get(k) + n;
                self.set(k, v);
            }

            /// Panics when fewer than `n` are present.
            pub fn remove(&mut self, k: usize, n: u64) {
                let v = self.get(k).checked_sub(n).expect("count underflow");
                self.set(k, v);
            }

            /// Total number of elements.
            pub fn size(&self) -> u64 {
                self.counts.values().sum()
            }

            pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
                self.counts.keys().copied()
            }

            pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
                self.counts.iter().map(|(&k, &n)| (k, n))
            }

            pub fn is_empty(&self) -> bool {
                self.counts.is_empty()
            }

            pub fn from_dense(counts: &[u64]) -> Self {
                let mut out = Self::new();
                for (k, &n) in counts.iter().enumerate() {
                    out.set(k, n);
                }
                out
            }

            pub fn to_dense(&self, len: usize) -> Vec<u64> {
                let mut out = vec![0; len];
                for (k, n) in self.iter() {
                    out[k] = n;
                }
                out
            }
        }

        impl FromIterator<(usize, u64)> for $name {
            fn from_iter<I: IntoIterator<Item = (usize, u64)>>(iter: I) -> Self {
                let mut out = Self::new();
                for (k, n) in iter {
                    out.insert(k, n);
                }
                out
            }
        }

        impl Add for &$name {
            type Output = $name;

            fn add(self, rhs: &$name) -> $name {
                let mut out = self.clone();
                for (k, n) in rhs.iter() {
                    out.insert(k, n);
                }
                out
            }
        }
    };
}

sparse_counts!(Configuration);
sparse_counts!(InputAssignment);

// Occurrence counts per transition: the vector `x` of the flow equation.
sparse_counts!(FlowAssignment);

impl Configuration {
    /// `C(P)`: number of agents in states of `set`.
    pub fn count_in(&self, set: &StateSet) -> u64 {
        set.iter().map(|&q| self.get(q)).sum()
    }

    /// `pre ≤ C`.
    pub fn contains_pair(&self, pair: Pair) -> bool {
        pair.entries().into_iter().all(|(q, n)| self.get(q) >= n)
    }

    /// States with zero agents among the first `num_states`.
    pub fn zero_set(&self, num_states: usize) -> StateSet {
        (0..num_states).filter(|&q| self.get(q) == 0).collect()
    }

    pub fn le(&self, other: &Configuration) -> bool {
        self.iter().all(|(q, n)| other.get(q) >= n)
    }

    /// Multiset difference `self ⊖ other`, truncated at zero.
    pub fn monus(&self, other: &Configuration) -> Configuration {
        self.iter()
            .map(|(q, n)| (q, n.saturating_sub(other.get(q))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::gen_majority;

    fn maj() -> Protocol {
        gen_majority()
    }

    #[test]
    fn majority_has_four_non_silent() {
        let p = maj();
        assert_eq!(p.num_states(), 4);
        assert_eq!(p.non_silent_count(), 4);
        // 10 unordered pairs, 4 covered by declared transitions.
        assert_eq!(
            p.transitions().iter().filter(|r| r.is_implicit()).count(),
            6
        );
    }

    #[test]
    fn no_declared_transitions_is_all_silent() {
        let raw = RawProtocol {
            states: vec!["p".into(), "q".into()],
            transitions: vec![],
            alphabet: vec!["p".into()],
            input: [("p".to_string(), StateId::from("p"))].into(),
            output: [(StateId::from("p"), false), (StateId::from("q"), true)].into(),
        };
        let p = normalize(raw).unwrap();
        assert_eq!(p.non_silent_count(), 0);
        assert_eq!(p.transitions().len(), 3);
    }

    #[test]
    fn validation_errors_name_the_offender() {
        let base = maj().to_raw();

        let mut raw = base.clone();
        raw.states.push("A".into());
        assert_eq!(
            normalize(raw),
            Err(ProtocolError::DuplicateState("A".into()))
        );

        let mut raw = base.clone();
        raw.transitions[0].post[1] = "Z".into();
        assert!(matches!(
            normalize(raw),
            Err(ProtocolError::UnknownStateInTransition { state, .. }) if state == "Z"
        ));

        let mut raw = base.clone();
        raw.transitions[1].pre.push("A".into());
        assert!(matches!(
            normalize(raw),
            Err(ProtocolError::NonBinaryTransition {
                field: "pre",
                size: 3,
                ..
            })
        ));

        let mut raw = base.clone();
        raw.alphabet.clear();
        raw.input.clear();
        assert_eq!(normalize(raw), Err(ProtocolError::EmptyAlphabet));

        let mut raw = base;
        raw.output.remove(&StateId::from("b"));
        assert_eq!(
            normalize(raw),
            Err(ProtocolError::MissingOutput("b".into()))
        );
    }

    #[test]
    fn duplicate_orderings_collapse() {
        let mut raw = maj().to_raw();
        raw.transitions
            .push(Transition::new(["B", "A"], ["b", "a"]).into());
        let p = normalize(raw).unwrap();
        assert_eq!(p.non_silent_count(), 4);
        assert_eq!(p.declared().len(), 5);
        let t = p.transition_named("t_AB").unwrap();
        assert_eq!(p.transition(t).declared.len(), 2);
    }

    #[test]
    fn majority_steps() {
        let p = maj();
        let c = p.configuration(&[("A", 1), ("B", 1)]).unwrap();
        let t = p.transition_named("t_AB").unwrap();
        assert_eq!(
            p.step(&c, t).unwrap(),
            p.configuration(&[("a", 1), ("b", 1)]).unwrap()
        );

        let c = p.configuration(&[("b", 1), ("a", 1)]).unwrap();
        let t = p.transition_named("t_ba").unwrap();
        assert_eq!(
            p.step(&c, t).unwrap(),
            p.configuration(&[("b", 2)]).unwrap()
        );

        let c = p.configuration(&[("A", 2)]).unwrap();
        let err = p.step(&c, p.transition_named("t_AB").unwrap()).unwrap_err();
        assert_eq!(
            err,
            StepError::NotEnabled {
                transition: "t_AB".into(),
                missing: vec![("B".into(), 1)]
            }
        );
    }

    #[test]
    fn silent_step_is_identity() {
        let p = maj();
        let c = p.configuration(&[("A", 3), ("a", 1)]).unwrap();
        for t in p.enabled_transitions(&c) {
            if p.transition(t).is_silent() {
                assert_eq!(p.step(&c, t).unwrap(), c);
            }
        }
    }

    #[test]
    fn enabled_sets() {
        let p = maj();
        let c = p.configuration(&[("A", 2)]).unwrap();
        let en = p.enabled_transitions(&c);
        assert_eq!(en.len(), 1);
        assert!(p.transition(en[0]).is_silent());
        assert_eq!(p.transition(en[0]).pre, Pair::new(0, 0));

        let c = p
            .configuration(&[("A", 1), ("B", 1), ("a", 1), ("b", 1)])
            .unwrap();
        let en: Vec<&str> = p
            .enabled_transitions(&c)
            .into_iter()
            .map(|t| p.transition(t).label.as_str())
            .collect();
        for name in ["t_AB", "t_Ab", "t_Ba", "t_ba"] {
            assert!(en.contains(&name), "{name} missing from {en:?}");
        }
    }

    #[test]
    fn terminality_and_consensus() {
        let p = maj();
        assert!(p.is_terminal(&p.configuration(&[("b", 2)]).unwrap()));
        assert!(!p.is_terminal(&p.configuration(&[("A", 1), ("B", 1)]).unwrap()));
        assert_eq!(
            p.consensus_output(&p.configuration(&[("A", 1), ("a", 1)]).unwrap()),
            Some(false)
        );
        assert_eq!(
            p.consensus_output(&p.configuration(&[("a", 1), ("b", 1)]).unwrap()),
            None
        );
        assert_eq!(
            p.consensus_output(&p.configuration(&[("B", 5)]).unwrap()),
            Some(true)
        );
    }

    #[test]
    fn initialize_maps_through_input() {
        let p = maj();
        let x = p.input_assignment(&[("A", 1), ("B", 1)]).unwrap();
        assert_eq!(
            p.initialize(&x).unwrap(),
            p.configuration(&[("A", 1), ("B", 1)]).unwrap()
        );
        let x = p.input_assignment(&[("A", 1)]).unwrap();
        assert_eq!(p.initialize(&x), Err(PopulationError::TooSmall(1)));
    }

    #[test]
    fn initialize_merges_symbols() {
        let raw = RawProtocol {
            states: vec!["q".into(), "r".into()],
            transitions: vec![],
            alphabet: vec!["x".into(), "y".into()],
            input: [
                ("x".to_string(), StateId::from("q")),
                ("y".to_string(), StateId::from("q")),
            ]
            .into(),
            output: [(StateId::from("q"), true), (StateId::from("r"), false)].into(),
        };
        let p = normalize(raw).unwrap();
        let x = p.input_assignment(&[("x", 2), ("y", 3)]).unwrap();
        assert_eq!(
            p.initialize(&x).unwrap(),
            p.configuration(&[("q", 5)]).unwrap()
        );
    }
}
