//! Generators for the benchmark protocol families and the boolean combinators.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::predicate::Predicate;
use crate::protocol::{normalize, Protocol, RawProtocol, RawTransition, StateId, Transition};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FamilyError {
    #[error("threshold predicate needs at least one coefficient")]
    NoCoefficients,
    #[error("remainder modulus {0} is smaller than 2")]
    BadModulus(i64),
    #[error("flock parameter must be at least 1, got {0}")]
    BadFlockParameter(i64),
    #[error("benchmark threshold needs v_max ≥ |c|+1 (v_max = {v_max}, c = {c})")]
    BadThresholdRange { v_max: i64, c: i64 },
    #[error("alphabets differ: {0:?} vs {1:?}")]
    AlphabetMismatch(Vec<String>, Vec<String>),
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
    #[error("family {0} takes no parameter")]
    NoParameter(Family),
    #[error("family {0} needs a parameter")]
    MissingParameter(Family),
}

/// Coefficients `a_1..a_k` and bound `c` of `Σ a_i·x_i < c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdSpec {
    pub coeffs: Vec<i64>,
    pub c: i64,
    /// One input symbol `x_v` per value `v ∈ [-v_max, v_max]` instead of one per coefficient.
    pub benchmark: bool,
}

impl ThresholdSpec {
    pub fn new(coeffs: Vec<i64>, c: i64) -> Self {
        ThresholdSpec {
            coeffs,
            c,
            benchmark: false,
        }
    }

    /// Every coefficient value in `[-v_max, v_max]` present in the input.
    pub fn benchmark(v_max: i64, c: i64) -> Result<Self, FamilyError> {
        if v_max < c.abs() + 1 {
            return Err(FamilyError::BadThresholdRange { v_max, c });
        }
        Ok(ThresholdSpec {
            coeffs: (-v_max..=v_max).collect(),
            c,
            benchmark: true,
        })
    }

    pub fn v_max(&self) -> i64 {
        self.coeffs
            .iter()
            .map(|a| a.abs())
            .chain([self.c.abs() + 1])
            .max()
            .unwrap()
    }

    /// `(symbol, coefficient)` pairs of the input alphabet.
    pub fn symbols(&self) -> Vec<(String, i64)> {
        if self.benchmark {
            let v = self.v_max();
            (-v..=v).map(|a| (format!("x_{a}"), a)).collect()
        } else {
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, &a)| (format!("x{}", i + 1), a))
                .collect()
        }
    }

    /// The predicate the generated protocol computes.
    pub fn predicate(&self) -> Predicate {
        let syms = self.symbols();
        Predicate::threshold(syms.iter().map(|(s, a)| (s.as_str(), *a)), self.c)
    }
}

/// Coefficients, residue and modulus of `Σ a_i·x_i ≡ c (mod m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemainderSpec {
    pub coeffs: Vec<i64>,
    pub c: i64,
    pub m: i64,
    /// One input symbol `x_r` per residue `r ∈ [0, m)`.
    pub benchmark: bool,
}

impl RemainderSpec {
    pub fn new(coeffs: Vec<i64>, c: i64, m: i64) -> Self {
        RemainderSpec {
            coeffs,
            c,
            m,
            benchmark: false,
        }
    }

    pub fn benchmark(m: i64, c: i64) -> Self {
        RemainderSpec {
            coeffs: (0..m.max(0)).collect(),
            c,
            m,
            benchmark: true,
        }
    }

    pub fn symbols(&self) -> Vec<(String, i64)> {
        if self.benchmark {
            self.coeffs.iter().map(|&a| (format!("x_{a}"), a)).collect()
        } else {
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, &a)| (format!("x{}", i + 1), a))
                .collect()
        }
    }

    pub fn predicate(&self) -> Predicate {
        let syms = self.symbols();
        Predicate::remainder(syms.iter().map(|(s, a)| (s.as_str(), *a)), self.c, self.m)
    }
}

/// Accumulates a protocol description; transitions are deduplicated later by [`normalize`].
#[derive(Default)]
struct Builder {
    raw: RawProtocol,
}

impl Builder {
    fn state(&mut self, name: String, output: bool) {
        self.raw.output.insert(StateId::from(name.clone()), output);
        self.raw.states.push(StateId::from(name));
    }

    fn symbol(&mut self, sym: String, state: String) {
        self.raw.input.insert(sym.clone(), StateId::from(state));
        self.raw.alphabet.push(sym);
    }

    fn transition(&mut self, name: Option<String>, pre: [String; 2], post: [String; 2]) {
        let mut a = pre.clone();
        let mut b = post.clone();
        a.sort();
        b.sort();
        // silent instances stay implicit
        if a == b {
            return;
        }
        self.raw.transitions.push(RawTransition {
            name,
            pre: pre.into_iter().map(StateId::from).collect(),
            post: post.into_iter().map(StateId::from).collect(),
        });
    }

    fn finish(mut self) -> Protocol {
        let mut seen = BTreeSet::new();
        self.raw.transitions.retain(|t| {
            let mut pre = t.pre.clone();
            let mut post = t.post.clone();
            pre.sort();
            post.sort();
            seen.insert((pre, post))
        });
        normalize(self.raw).expect("generated protocol is well-formed")
    }
}

fn thr_state(leader: bool, value: i64, opinion: bool) -> String {
    format!("({},{},{})", leader as u8, value, opinion as u8)
}

/// Leader-based threshold protocol over `{0,1} × [-v_max, v_max] × {0,1}`.
pub fn gen_threshold(spec: &ThresholdSpec) -> Result<Protocol, FamilyError> {
    if spec.coeffs.is_empty() {
        return Err(FamilyError::NoCoefficients);
    }
    let v = spec.v_max();
    let c = spec.c;
    let f = |m: i64, n: i64| (m + n).clamp(-v, v);
    let g = |m: i64, n: i64| (m + n) - f(m, n);
    let b = |m: i64, n: i64| f(m, n) < c;

    let mut bld = Builder::default();
    for l in [false, true] {
        for n in -v..=v {
            for o in [false, true] {
                bld.state(thr_state(l, n, o), o);
            }
        }
    }
    for (sym, a) in spec.symbols() {
        bld.symbol(sym, thr_state(true, a, a < c));
    }
    for n in -v..=v {
        for n2 in -v..=v {
            for l in [false, true] {
                for o in [false, true] {
                    for o2 in [false, true] {
                        let out = b(n, n2);
                        bld.transition(
                            None,
                            [thr_state(true, n, o), thr_state(l, n2, o2)],
                            [
                                thr_state(true, f(n, n2), out),
                                thr_state(false, g(n, n2), out),
                            ],
                        );
                    }
                }
            }
        }
    }
    Ok(bld.finish())
}

/// Remainder protocol over `[0, m) ∪ {true, false}`.
pub fn gen_remainder(spec: &RemainderSpec) -> Result<Protocol, FamilyError> {
    let m = spec.m;
    if m < 2 {
        return Err(FamilyError::BadModulus(m));
    }
    let c = spec.c.rem_euclid(m);
    let flag = |b: bool| {
        if b {
            "true".to_string()
        } else {
            "false".to_string()
        }
    };

    let mut bld = Builder::default();
    for n in 0..m {
        bld.state(n.to_string(), n == c);
    }
    bld.state(flag(true), true);
    bld.state(flag(false), false);
    for (sym, a) in spec.symbols() {
        bld.symbol(sym, a.rem_euclid(m).to_string());
    }
    for n in 0..m {
        for n2 in 0..m {
            let s = (n + n2) % m;
            bld.transition(
                None,
                [n.to_string(), n2.to_string()],
                [s.to_string(), flag(s == c)],
            );
        }
        for b in [false, true] {
            bld.transition(
                None,
                [n.to_string(), flag(b)],
                [n.to_string(), flag(n == c)],
            );
        }
    }
    Ok(bld.finish())
}

/// The four-state majority protocol: at least as many `B` as `A`.
pub fn gen_majority() -> Protocol {
    let mut bld = Builder::default();
    for (s, o) in [("A", false), ("B", true), ("a", false), ("b", true)] {
        bld.state(s.into(), o);
    }
    bld.symbol("A".into(), "A".into());
    bld.symbol("B".into(), "B".into());
    let t = |name: &str,
             pre: [&str; 2],
             post: [&str; 2]|
     -> (Option<String>, [String; 2], [String; 2]) {
        (
            Some(name.into()),
            pre.map(String::from),
            post.map(String::from),
        )
    };
    for (name, pre, post) in [
        t("t_AB", ["A", "B"], ["a", "b"]),
        t("t_Ab", ["A", "b"], ["A", "a"]),
        t("t_Ba", ["B", "a"], ["B", "b"]),
        t("t_ba", ["b", "a"], ["b", "b"]),
    ] {
        bld.transition(name, pre, post);
    }
    bld.finish()
}

/// Two-state broadcast: one `top` agent turns every `bot` agent into `top`.
pub fn gen_broadcast() -> Protocol {
    let mut bld = Builder::default();
    bld.state("top".into(), true);
    bld.state("bot".into(), false);
    bld.symbol("top".into(), "top".into());
    bld.symbol("bot".into(), "bot".into());
    bld.transition(
        Some("t_spread".into()),
        ["top".into(), "bot".into()],
        ["top".into(), "top".into()],
    );
    bld.finish()
}

fn flock_base(c: i64) -> Result<Builder, FamilyError> {
    if c < 1 {
        return Err(FamilyError::BadFlockParameter(c));
    }
    let mut bld = Builder::default();
    for q in 0..=c {
        bld.state(q.to_string(), q == c);
    }
    bld.symbol("x".into(), "1".into());
    Ok(bld)
}

/// Flock of birds by summing: agents merge values until one reaches `c`, then `c` spreads.
pub fn gen_flock_cms(c: i64) -> Result<Protocol, FamilyError> {
    let mut bld = flock_base(c)?;
    for i in 1..=c {
        for j in i..=c {
            let pre = [i.to_string(), j.to_string()];
            if i + j < c {
                bld.transition(None, pre, [(i + j).to_string(), "0".into()]);
            } else if (i, j) != (c, c) {
                bld.transition(None, pre, [c.to_string(), c.to_string()]);
            }
        }
    }
    bld.transition(
        None,
        ["0".into(), c.to_string()],
        [c.to_string(), c.to_string()],
    );
    Ok(bld.finish())
}

/// Flock of birds by levels: two agents on level `i` push one of them to `i+1`.
pub fn gen_flock_guidelines(c: i64) -> Result<Protocol, FamilyError> {
    let mut bld = flock_base(c)?;
    for i in 1..c {
        bld.transition(
            None,
            [i.to_string(), i.to_string()],
            [(i + 1).to_string(), i.to_string()],
        );
    }
    for j in 0..c {
        bld.transition(
            None,
            [c.to_string(), j.to_string()],
            [c.to_string(), c.to_string()],
        );
    }
    Ok(bld.finish())
}

/// `x ≥ c` as a predicate over the single flock symbol.
pub fn flock_predicate(c: i64) -> Predicate {
    Predicate::threshold([("x", 1)], c).negate()
}

/// Flip the output of every state.
pub fn negate(p: &Protocol) -> Protocol {
    let mut raw = p.to_raw();
    for o in raw.output.values_mut() {
        *o = !*o;
    }
    normalize(raw).expect("negation preserves validity")
}

/// Name of the product state `(p, q)`.
pub fn product_state(p: &str, q: &str) -> String {
    format!("[{p};{q}]")
}

/// Asynchronous product computing the conjunction of the two predicates.
pub fn conjoin(p1: &Protocol, p2: &Protocol) -> Result<Protocol, FamilyError> {
    if p1.alphabet() != p2.alphabet() {
        return Err(FamilyError::AlphabetMismatch(
            p1.alphabet().to_vec(),
            p2.alphabet().to_vec(),
        ));
    }
    let mut bld = Builder::default();
    for (i, a) in p1.states().iter().enumerate() {
        for (j, b) in p2.states().iter().enumerate() {
            bld.state(
                product_state(a.as_str(), b.as_str()),
                p1.output(i) && p2.output(j),
            );
        }
    }
    for (s, sym) in p1.alphabet().iter().enumerate() {
        let q = product_state(
            p1.state_name(p1.input_state(s)),
            p2.state_name(p2.input_state(s)),
        );
        bld.symbol(sym.clone(), q);
    }
    let lifts = |p: &Protocol| -> Vec<Transition> {
        p.declared()
            .iter()
            .filter(|t| !t.is_silent())
            .cloned()
            .collect()
    };
    for t in lifts(p1) {
        for r in p2.states() {
            for r2 in p2.states() {
                let st = |x: &StateId, y: &StateId| product_state(x.as_str(), y.as_str());
                bld.transition(
                    None,
                    [st(&t.pre[0], r), st(&t.pre[1], r2)],
                    [st(&t.post[0], r), st(&t.post[1], r2)],
                );
            }
        }
    }
    for t in lifts(p2) {
        for r in p1.states() {
            for r2 in p1.states() {
                let st = |x: &StateId, y: &StateId| product_state(y.as_str(), x.as_str());
                bld.transition(
                    None,
                    [st(&t.pre[0], r), st(&t.pre[1], r2)],
                    [st(&t.post[0], r), st(&t.post[1], r2)],
                );
            }
        }
    }
    Ok(bld.finish())
}

/// Named benchmark families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Majority,
    Broadcast,
    /// Parameter: `v_max`, with `c = 1`.
    Threshold,
    /// Parameter: `m`, with `c = 1`.
    Remainder,
    FlockCms,
    FlockGuidelines,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Majority,
        Family::Broadcast,
        Family::Threshold,
        Family::Remainder,
        Family::FlockCms,
        Family::FlockGuidelines,
    ];

    pub fn takes_parameter(self) -> bool {
        !matches!(self, Family::Majority | Family::Broadcast)
    }

    /// Generate an instance together with the predicate it is meant to compute.
    pub fn instance(self, param: Option<i64>) -> Result<(Protocol, Predicate), FamilyError> {
        let need = |p: Option<i64>| p.ok_or(FamilyError::MissingParameter(self));
        if !self.takes_parameter() && param.is_some() {
            return Err(FamilyError::NoParameter(self));
        }
        Ok(match self {
            Family::Majority => (
                gen_majority(),
                Predicate::threshold([("A", -1), ("B", 1)], 0).negate(),
            ),
            Family::Broadcast => (gen_broadcast(), Predicate::threshold([("top", -1)], 0)),
            Family::Threshold => {
                let spec = ThresholdSpec::benchmark(need(param)?, 1)?;
                (gen_threshold(&spec)?, spec.predicate())
            }
            Family::Remainder => {
                let spec = RemainderSpec::benchmark(need(param)?, 1);
                (gen_remainder(&spec)?, spec.predicate())
            }
            Family::FlockCms => {
                let c = need(param)?;
                (gen_flock_cms(c)?, flock_predicate(c))
            }
            Family::FlockGuidelines => {
                let c = need(param)?;
                (gen_flock_guidelines(c)?, flock_predicate(c))
            }
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Majority => "majority",
            Family::Broadcast => "broadcast",
            Family::Threshold => "threshold",
            Family::Remainder => "remainder",
            Family::FlockCms => "flock-cms",
            Family::FlockGuidelines => "flock-guidelines",
        })
    }
}

impl FromStr for Family {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Family::ALL
            .into_iter()
            .find(|f| f.to_string() == norm)
            .ok_or_else(|| FamilyError::UnknownFamily(s.to_string()))
    }
}

/// `val(q)` of a threshold state name, if it is one.
pub fn threshold_value(name: &str) -> Option<i64> {
    let inner = name.strip_prefix('(')?.strip_suffix(')')?;
    let parts: Vec<&str> = inner.split(',').collect();
    (parts.len() == 3).then(|| parts[1].parse().ok()).flatten()
}

/// Whether a threshold state name denotes a leader.
pub fn threshold_is_leader(name: &str) -> bool {
    name.starts_with("(1,")
}

/// Table of `(|Q|, non-silent |T|)` per family instance.
pub fn sizes(p: &Protocol) -> (usize, usize) {
    (p.num_states(), p.non_silent_count())
}
