//! JSON documents: protocols (`.pp.json`) and verdicts (`.verdict.json`).
//!
//! A verdict embeds the protocol it was computed for, so it can be replayed by
//! the independent checkers without any other input.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use num_rational::BigRational;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::consensus::{audit_counterexample, ConsensusOutcome, ConsensusVerdict, Counterexample};
use crate::correctness::{
    audit_correctness_counterexample, CorrectnessCounterexample, CorrectnessOutcome,
    CorrectnessVerdict,
};
use crate::layered::{
    verify_partition, LayerWitness, LayeredOutcome, LayeredReport, OrderedPartition,
    PartitionVerdict, RankingCertificate, VerifyError,
};
use crate::predicate::{Predicate, PredicateError};
use crate::protocol::{
    normalize, Configuration, InputAssignment, Protocol, ProtocolError, RawProtocol, RawTransition,
    StateSet, TransitionId, TransitionSet,
};
use crate::smtlink::{SolverConfig, SolverStats};
use crate::structural::{FlowAssignment, ReachAudit};

pub const PROTOCOL_EXTENSION: &str = ".pp.json";
pub const VERDICT_EXTENSION: &str = ".verdict.json";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}` (line {line}, column {column}): {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("invalid predicate: {0}")]
    Predicate(#[from] PredicateError),
    #[error("unknown {kind} `{name}` in verdict")]
    UnknownName { kind: &'static str, name: String },
    #[error("ambiguous transition name `{0}` in verdict")]
    AmbiguousTransition(String),
}

/// An output value written as `0` or `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bit(pub bool);

impl Serialize for Bit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.0 as u8)
    }
}

impl<'de> Deserialize<'de> for Bit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match u64::deserialize(d)? {
            0 => Ok(Bit(false)),
            1 => Ok(Bit(true)),
            v => Err(de::Error::invalid_value(
                de::Unexpected::Unsigned(v),
                &"0 or 1",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(deserialize_with = "pair")]
    pub pre: [String; 2],
    #[serde(deserialize_with = "pair")]
    pub post: [String; 2],
}

/// Exactly two state names, reported as a schema error otherwise.
fn pair<'de, D: Deserializer<'de>>(d: D) -> Result<[String; 2], D::Error> {
    let v = Vec::<String>::deserialize(d)?;
    <[String; 2]>::try_from(v).map_err(|v| de::Error::invalid_length(v.len(), &"exactly 2 states"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDocument {
    pub states: Vec<String>,
    pub transitions: Vec<TransitionDocument>,
    pub alphabet: Vec<String>,
    pub input: BTreeMap<String, String>,
    pub output: BTreeMap<String, Bit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<Predicate>,
}

impl ProtocolDocument {
    pub fn from_protocol(p: &Protocol, predicate: Option<Predicate>) -> Self {
        let raw = p.to_raw();
        ProtocolDocument {
            states: raw.states.iter().map(|s| s.as_str().to_string()).collect(),
            transitions: raw
                .transitions
                .iter()
                .map(|t| TransitionDocument {
                    name: t.name.clone(),
                    pre: [t.pre[0].as_str().into(), t.pre[1].as_str().into()],
                    post: [t.post[0].as_str().into(), t.post[1].as_str().into()],
                })
                .collect(),
            alphabet: raw.alphabet.clone(),
            input: raw
                .input
                .iter()
                .map(|(k, v)| (k.clone(), v.as_str().to_string()))
                .collect(),
            output: raw
                .output
                .iter()
                .map(|(k, &v)| (k.as_str().to_string(), Bit(v)))
                .collect(),
            predicate,
        }
    }

    /// Validate into a normalized protocol; also checks the embedded predicate.
    pub fn to_protocol(&self) -> Result<Protocol, FormatError> {
        let raw = RawProtocol {
            states: self.states.iter().map(|s| s.as_str().into()).collect(),
            transitions: self
                .transitions
                .iter()
                .map(|t| RawTransition {
                    name: t.name.clone(),
                    pre: t.pre.iter().map(|s| s.as_str().into()).collect(),
                    post: t.post.iter().map(|s| s.as_str().into()).collect(),
                })
                .collect(),
            alphabet: self.alphabet.clone(),
            input: self
                .input
                .iter()
                .map(|(k, v)| (k.clone(), v.as_str().into()))
                .collect(),
            output: self
                .output
                .iter()
                .map(|(k, v)| (k.as_str().into(), v.0))
                .collect(),
        };
        let p = normalize(raw)?;
        if let Some(pd) = &self.predicate {
            pd.validate(p.alphabet())?;
        }
        Ok(p)
    }
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, FormatError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let parsed: Result<T, _> = serde_path_to_error::deserialize(de);
    let value = parsed.map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        match inner.classify() {
            serde_json::error::Category::Data => FormatError::Schema {
                path,
                line,
                column,
                message: strip_position(&inner),
            },
            _ => FormatError::Syntax {
                line,
                column,
                message: strip_position(&inner),
            },
        }
    })?;
    Ok(value)
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents serialize");
    s.push('\n');
    s
}

/// Parse and structurally validate a protocol document.
pub fn parse_protocol(text: &str) -> Result<ProtocolDocument, FormatError> {
    from_json(text)
}

pub fn serialize_protocol(doc: &ProtocolDocument) -> String {
    to_json(doc)
}

/// Parse a predicate document on its own.
pub fn parse_predicate(text: &str) -> Result<Predicate, FormatError> {
    from_json(text)
}

// ---------------------------------------------------------------------------
// Verdicts

/// Counts per state or transition name; zero entries omitted.
pub type Counts = BTreeMap<String, u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Holds,
    Fails,
    Unknown,
}

impl VerdictKind {
    /// Combine property verdicts: any failure fails, else any unknown is unknown.
    pub fn all(kinds: impl IntoIterator<Item = VerdictKind>) -> VerdictKind {
        let kinds: Vec<_> = kinds.into_iter().collect();
        if kinds.contains(&VerdictKind::Fails) {
            VerdictKind::Fails
        } else if kinds.contains(&VerdictKind::Unknown) {
            VerdictKind::Unknown
        } else {
            VerdictKind::Holds
        }
    }

    /// Process exit status for this verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            VerdictKind::Holds => 0,
            VerdictKind::Fails => 1,
            VerdictKind::Unknown => 2,
        }
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictKind::Holds => "holds",
            VerdictKind::Fails => "fails",
            VerdictKind::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsDocument {
    pub checks: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub solver_seconds: f64,
    pub wall_seconds: f64,
}

impl StatsDocument {
    pub fn new(s: &SolverStats, wall: Duration) -> Self {
        StatsDocument {
            checks: s.checks,
            sat: s.sat,
            unsat: s.unsat,
            unknown: s.unknown,
            solver_seconds: s.solver_time.as_secs_f64(),
            wall_seconds: wall.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayeredDocument {
    pub kind: VerdictKind,
    /// Number of layers searched up to.
    pub k: usize,
    /// Non-silent transitions per layer; silent transitions belong to layer 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<String>>>,
    /// Ranking vector per layer, zero entries omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Vec<Counts>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub stats: StatsDocument,
}

/// Per-condition results of the potential reachability test for one triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditDocument {
    pub flow: bool,
    pub trap: bool,
    pub siphon: bool,
    pub max_trap: Vec<String>,
    pub max_siphon: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusCounterexampleDocument {
    pub c0: Counts,
    pub c1: Counts,
    pub c2: Counts,
    pub x1: Counts,
    pub x2: Counts,
    pub audit: [AuditDocument; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusDocument {
    pub kind: VerdictKind,
    pub iterations: usize,
    pub traps: Vec<Vec<String>>,
    pub siphons: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<ConsensusCounterexampleDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub stats: StatsDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectnessCounterexampleDocument {
    pub input: Counts,
    pub expected: Bit,
    pub c0: Counts,
    pub c: Counts,
    pub x: Counts,
    pub audit: AuditDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectnessDocument {
    pub kind: VerdictKind,
    pub predicate: Predicate,
    pub iterations: usize,
    pub traps: Vec<Vec<String>>,
    pub siphons: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CorrectnessCounterexampleDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub stats: StatsDocument,
}

/// A complete verdict record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictDocument {
    /// Which command produced it: `check`, `layered`, `consensus` or `correct`.
    pub command: String,
    pub kind: VerdictKind,
    /// The property responsible for a non-holding verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing: Option<String>,
    pub protocol: ProtocolDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layered: Option<LayeredDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus: Option<ConsensusDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correctness: Option<CorrectnessDocument>,
    pub wall_seconds: f64,
}

impl VerdictDocument {
    /// An empty record for `command`; fill in sections, then call [`VerdictDocument::finish`].
    pub fn new(command: &str, protocol: ProtocolDocument) -> Self {
        VerdictDocument {
            command: command.to_string(),
            kind: VerdictKind::Holds,
            failing: None,
            protocol,
            layered: None,
            consensus: None,
            correctness: None,
            wall_seconds: 0.0,
        }
    }

    /// Derive the overall kind and failing property from the sections.
    pub fn finish(&mut self, wall: Duration) {
        let sections = [
            ("LayeredTermination", self.layered.as_ref().map(|s| s.kind)),
            ("StrongConsensus", self.consensus.as_ref().map(|s| s.kind)),
            ("Correctness", self.correctness.as_ref().map(|s| s.kind)),
        ];
        self.kind = VerdictKind::all(sections.iter().filter_map(|(_, k)| *k));
        self.failing = sections
            .iter()
            .filter(|(_, k)| *k == Some(self.kind) && self.kind != VerdictKind::Holds)
            .map(|(n, _)| n.to_string())
            .reduce(|a, b| format!("{a}, {b}"));
        self.wall_seconds = wall.as_secs_f64();
    }
}

pub fn serialize_verdict(v: &VerdictDocument) -> String {
    to_json(v)
}

pub fn parse_verdict(text: &str) -> Result<VerdictDocument, FormatError> {
    from_json(text)
}

// --- conversions -----------------------------------------------------------

fn state_names(p: &Protocol, set: &StateSet) -> Vec<String> {
    set.iter().map(|&q| p.state_name(q).to_string()).collect()
}

fn config_counts(p: &Protocol, c: &Configuration) -> Counts {
    c.iter()
        .map(|(q, n)| (p.state_name(q).to_string(), n))
        .collect()
}

fn flow_counts(p: &Protocol, x: &FlowAssignment) -> Counts {
    x.iter()
        .map(|(t, n)| (p.transition(t).label.clone(), n))
        .collect()
}

fn input_counts(p: &Protocol, x: &InputAssignment) -> Counts {
    x.iter()
        .map(|(s, n)| (p.alphabet()[s].clone(), n))
        .collect()
}

fn audit_document(p: &Protocol, a: &ReachAudit) -> AuditDocument {
    AuditDocument {
        flow: a.flow,
        trap: a.trap_ok,
        siphon: a.siphon_ok,
        max_trap: state_names(p, &a.max_trap),
        max_siphon: state_names(p, &a.max_siphon),
    }
}

fn state_of(p: &Protocol, name: &str) -> Result<usize, FormatError> {
    p.state_index(name).ok_or_else(|| FormatError::UnknownName {
        kind: "state",
        name: name.to_string(),
    })
}

fn transition_of(p: &Protocol, label: &str) -> Result<TransitionId, FormatError> {
    let mut hits = (0..p.transitions().len()).filter(|&t| p.transition(t).label == label);
    match (hits.next(), hits.next()) {
        (Some(t), None) => Ok(t),
        (Some(_), Some(_)) => Err(FormatError::AmbiguousTransition(label.to_string())),
        (None, _) => Err(FormatError::UnknownName {
            kind: "transition",
            name: label.to_string(),
        }),
    }
}

pub fn read_configuration(p: &Protocol, c: &Counts) -> Result<Configuration, FormatError> {
    c.iter()
        .map(|(name, &n)| Ok((state_of(p, name)?, n)))
        .collect()
}

pub fn read_flow(p: &Protocol, x: &Counts) -> Result<FlowAssignment, FormatError> {
    x.iter()
        .map(|(label, &n)| Ok((transition_of(p, label)?, n)))
        .collect()
}

pub fn read_input(p: &Protocol, x: &Counts) -> Result<InputAssignment, FormatError> {
    x.iter()
        .map(|(sym, &n)| {
            let s = p
                .symbol_index(sym)
                .ok_or_else(|| FormatError::UnknownName {
                    kind: "input symbol",
                    name: sym.clone(),
                })?;
            Ok((s, n))
        })
        .collect()
}

/// Rebuild a partition from per-layer transition names; silent transitions
/// not named anywhere join layer 1.
pub fn read_partition(
    p: &Protocol,
    layers: &[Vec<String>],
) -> Result<OrderedPartition, FormatError> {
    let mut out: Vec<TransitionSet> = layers
        .iter()
        .map(|l| {
            l.iter()
                .map(|n| transition_of(p, n))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        out.push(TransitionSet::new());
    }
    let named: TransitionSet = out.iter().flatten().copied().collect();
    let silent: Vec<_> = (0..p.transitions().len())
        .filter(|&t| p.transition(t).is_silent() && !named.contains(&t))
        .collect();
    out[0].extend(silent);
    Ok(OrderedPartition::new(out))
}

pub fn partition_names(p: &Protocol, op: &OrderedPartition) -> Vec<Vec<String>> {
    op.layers
        .iter()
        .map(|l| {
            l.iter()
                .filter(|&&t| !p.transition(t).is_silent())
                .map(|&t| p.transition(t).label.clone())
                .collect()
        })
        .collect()
}

pub fn read_ranking(p: &Protocol, ranking: &[Counts]) -> Result<RankingCertificate, FormatError> {
    let vectors = ranking
        .iter()
        .map(|y| {
            let mut v = vec![0; p.num_states()];
            for (name, &n) in y {
                v[state_of(p, name)?] = n;
            }
            Ok(v)
        })
        .collect::<Result<_, FormatError>>()?;
    Ok(RankingCertificate { vectors })
}

pub fn layered_document(p: &Protocol, r: &LayeredReport) -> LayeredDocument {
    let stats = StatsDocument::new(&r.stats, r.elapsed);
    let base = LayeredDocument {
        kind: VerdictKind::Unknown,
        k: r.k_reached,
        partition: None,
        ranking: None,
        reason: None,
        stats,
    };
    match &r.outcome {
        LayeredOutcome::Found { partition, ranking } => LayeredDocument {
            kind: VerdictKind::Holds,
            partition: Some(partition_names(p, partition)),
            ranking: Some(
                ranking
                    .vectors
                    .iter()
                    .map(|y| {
                        y.iter()
                            .enumerate()
                            .filter(|(_, &n)| n > 0)
                            .map(|(q, &n)| (p.state_name(q).to_string(), n))
                            .collect()
                    })
                    .collect(),
            ),
            ..base
        },
        LayeredOutcome::None => LayeredDocument {
            kind: VerdictKind::Fails,
            reason: Some(format!(
                "no layered partition with at most {} layers",
                r.k_reached
            )),
            ..base
        },
        LayeredOutcome::Unknown(why) => LayeredDocument {
            reason: Some(why.clone()),
            ..base
        },
    }
}

fn sets(p: &Protocol, s: &[StateSet]) -> Vec<Vec<String>> {
    s.iter().map(|x| state_names(p, x)).collect()
}

pub fn consensus_document(p: &Protocol, v: &ConsensusVerdict) -> ConsensusDocument {
    let mut doc = ConsensusDocument {
        kind: VerdictKind::Holds,
        iterations: v.iterations,
        traps: sets(p, &v.traps),
        siphons: sets(p, &v.siphons),
        counterexample: None,
        reason: None,
        stats: StatsDocument::new(&v.stats, v.elapsed),
    };
    match &v.outcome {
        ConsensusOutcome::Holds => {}
        ConsensusOutcome::Fails {
            counterexample: cx,
            audit,
        } => {
            doc.kind = VerdictKind::Fails;
            doc.counterexample = Some(ConsensusCounterexampleDocument {
                c0: config_counts(p, &cx.c0),
                c1: config_counts(p, &cx.c1),
                c2: config_counts(p, &cx.c2),
                x1: flow_counts(p, &cx.x1),
                x2: flow_counts(p, &cx.x2),
                audit: [audit_document(p, &audit[0]), audit_document(p, &audit[1])],
            });
        }
        ConsensusOutcome::Unknown(why) => {
            doc.kind = VerdictKind::Unknown;
            doc.reason = Some(why.clone());
        }
    }
    doc
}

pub fn correctness_document(
    p: &Protocol,
    pd: &Predicate,
    v: &CorrectnessVerdict,
) -> CorrectnessDocument {
    let mut doc = CorrectnessDocument {
        kind: VerdictKind::Holds,
        predicate: pd.clone(),
        iterations: v.iterations,
        traps: sets(p, &v.traps),
        siphons: sets(p, &v.siphons),
        counterexample: None,
        reason: None,
        stats: StatsDocument::new(&v.stats, v.elapsed),
    };
    match &v.outcome {
        CorrectnessOutcome::Holds => {}
        CorrectnessOutcome::Fails {
            counterexample: cx,
            audit,
        } => {
            doc.kind = VerdictKind::Fails;
            doc.counterexample = Some(CorrectnessCounterexampleDocument {
                input: input_counts(p, &cx.input),
                expected: Bit(cx.expected),
                c0: config_counts(p, &cx.c0),
                c: config_counts(p, &cx.c),
                x: flow_counts(p, &cx.x),
                audit: audit_document(p, audit),
            });
        }
        CorrectnessOutcome::Unknown(why) => {
            doc.kind = VerdictKind::Unknown;
            doc.reason = Some(why.clone());
        }
    }
    doc
}

pub fn read_consensus_counterexample(
    p: &Protocol,
    d: &ConsensusCounterexampleDocument,
) -> Result<Counterexample, FormatError> {
    Ok(Counterexample {
        c0: read_configuration(p, &d.c0)?,
        c1: read_configuration(p, &d.c1)?,
        c2: read_configuration(p, &d.c2)?,
        x1: read_flow(p, &d.x1)?,
        x2: read_flow(p, &d.x2)?,
    })
}

pub fn read_correctness_counterexample(
    p: &Protocol,
    d: &CorrectnessCounterexampleDocument,
) -> Result<CorrectnessCounterexample, FormatError> {
    Ok(CorrectnessCounterexample {
        input: read_input(p, &d.input)?,
        c0: read_configuration(p, &d.c0)?,
        c: read_configuration(p, &d.c)?,
        x: read_flow(p, &d.x)?,
        expected: d.expected.0,
    })
}

// --- replay ------------------------------------------------------------------

/// Outcome of replaying one certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayItem {
    pub certificate: &'static str,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

fn witness_text(p: &Protocol, w: &LayerWitness) -> String {
    match w {
        LayerWitness::Cycle(x) => {
            let parts: Vec<String> = x
                .iter()
                .filter(|(_, v)| **v != BigRational::default())
                .map(|(&t, v)| format!("{}={v}", p.transition(t).label))
                .collect();
            format!("zero-effect combination {}", parts.join(", "))
        }
        LayerWitness::Enables { s, u } => {
            format!(
                "{} can enable {}",
                p.transition(*s).label,
                p.transition(*u).label
            )
        }
    }
}

/// Re-check every certificate in `doc` with the independent checkers.
pub fn replay_verdict(
    doc: &VerdictDocument,
    solver: &SolverConfig,
) -> Result<Vec<ReplayItem>, ReplayError> {
    let p = doc.protocol.to_protocol()?;
    let mut out = Vec::new();
    if let Some(l) = &doc.layered {
        if let Some(layers) = &l.partition {
            let op = read_partition(&p, layers)?;
            let (ok, detail) = match verify_partition(&p, &op, solver)? {
                PartitionVerdict::Ok => (true, format!("{} layers verified", op.len())),
                PartitionVerdict::Fails {
                    layer,
                    condition,
                    witness,
                } => (
                    false,
                    format!(
                        "layer {layer} fails condition {condition:?}: {}",
                        witness_text(&p, &witness)
                    ),
                ),
            };
            out.push(ReplayItem {
                certificate: "partition",
                ok,
                detail,
            });
            if let Some(r) = &l.ranking {
                let ranking = read_ranking(&p, r)?;
                let ok = ranking.check(&p, &op);
                out.push(ReplayItem {
                    certificate: "ranking",
                    ok,
                    detail: if ok {
                        "every layer strictly decreases its rank".into()
                    } else {
                        "rank not decreasing".into()
                    },
                });
            }
        }
    }
    if let Some(cx) = doc
        .consensus
        .as_ref()
        .and_then(|c| c.counterexample.as_ref())
    {
        let cx = read_consensus_counterexample(&p, cx)?;
        let ok = audit_counterexample(&p, &cx);
        out.push(ReplayItem {
            certificate: "consensus counterexample",
            ok,
            detail: format!(
                "c0 = {}, c1 = {}, c2 = {}",
                p.show(&cx.c0),
                p.show(&cx.c1),
                p.show(&cx.c2)
            ),
        });
    }
    if let Some(c) = &doc.correctness {
        if let Some(cx) = &c.counterexample {
            c.predicate
                .validate(p.alphabet())
                .map_err(FormatError::from)?;
            let cx = read_correctness_counterexample(&p, cx)?;
            let ok = audit_correctness_counterexample(&p, &c.predicate, &cx);
            out.push(ReplayItem {
                certificate: "correctness counterexample",
                ok,
                detail: format!(
                    "input = {:?}, c = {}",
                    input_counts(&p, &cx.input),
                    p.show(&cx.c)
                ),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::gen_majority;

    fn majority_doc() -> ProtocolDocument {
        let pd = Predicate::threshold([("A", -1), ("B", 1)], 0).negate();
        ProtocolDocument::from_protocol(&gen_majority(), Some(pd))
    }

    #[test]
    fn majority_round_trip() {
        let doc = majority_doc();
        let text = serialize_protocol(&doc);
        let back = parse_protocol(&text).unwrap();
        assert_eq!(back, doc);
        let p = back.to_protocol().unwrap();
        assert_eq!(p.num_states(), 4);
        assert_eq!(p.declared().len(), 4);
        assert!((0..p.alphabet().len()).all(|s| p.state_name(p.input_state(s)) == p.alphabet()[s]));
        assert!(text.contains("\"output\": {\n    \"A\": 0"));
    }

    #[test]
    fn arity_is_a_schema_error() {
        let text = serialize_protocol(&majority_doc()).replacen(
            "\"pre\": [\n        \"A\",",
            "\"pre\": [\n        \"A\", \"A\",",
            1,
        );
        match parse_protocol(&text) {
            Err(FormatError::Schema { path, .. }) => {
                assert!(path.starts_with("transitions["), "{path}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_and_semantic_errors() {
        assert!(matches!(
            parse_protocol("{\"states\": ["),
            Err(FormatError::Syntax { .. })
        ));
        let mut doc = majority_doc();
        doc.transitions[0].post[0] = "Z".into();
        assert!(matches!(
            doc.to_protocol(),
            Err(FormatError::Protocol(
                ProtocolError::UnknownStateInTransition { .. }
            ))
        ));
        let text = serialize_protocol(&majority_doc()).replace("\"A\": 0", "\"A\": 2");
        assert!(matches!(
            parse_protocol(&text),
            Err(FormatError::Schema { .. })
        ));
        let text = serialize_protocol(&majority_doc())
            .replace("\"alphabet\"", "\"alphabet\": [], \"extra\"");
        assert!(parse_protocol(&text).is_err());
    }

    #[test]
    fn verdict_kinds() {
        use VerdictKind::*;
        assert_eq!(VerdictKind::all([Holds, Holds]), Holds);
        assert_eq!(VerdictKind::all([Holds, Unknown]), Unknown);
        assert_eq!(VerdictKind::all([Unknown, Fails]), Fails);
        assert_eq!(
            [Holds, Fails, Unknown].map(VerdictKind::exit_code),
            [0, 1, 2]
        );
        let mut v = VerdictDocument::new("check", majority_doc());
        v.consensus = Some(ConsensusDocument {
            kind: Fails,
            iterations: 0,
            traps: vec![],
            siphons: vec![],
            counterexample: None,
            reason: None,
            stats: StatsDocument::default(),
        });
        v.finish(Duration::from_millis(5));
        assert_eq!(v.kind, Fails);
        assert_eq!(v.failing.as_deref(), Some("StrongConsensus"));
        let back = parse_verdict(&serialize_verdict(&v)).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn partition_names_round_trip() {
        let p = gen_majority();
        let layers = vec![
            vec!["t_AB".to_string(), "t_Ab".into()],
            vec!["t_Ba".into(), "t_ba".into()],
        ];
        let op = read_partition(&p, &layers).unwrap();
        assert_eq!(op.validate(&p), Ok(()));
        assert_eq!(partition_names(&p, &op), layers);
        assert!(matches!(
            read_partition(&p, &[vec!["nope".into()]]),
            Err(FormatError::UnknownName {
                kind: "transition",
                ..
            })
        ));
    }
}
