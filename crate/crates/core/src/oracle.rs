//! Explicit-state ground truth for small inputs.
//!
//! From a fixed initial configuration the reachable configurations form a
//! finite graph. A fair execution eventually stays inside one bottom strongly
//! connected component and visits each of its configurations infinitely
//! often, so the stable behaviour of an input is read off its bottom SCCs.

use std::collections::{BTreeMap, HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{Configuration, InputAssignment, PopulationError, Protocol, TransitionId};

pub const DEFAULT_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("reachability graph exceeds {0} configurations")]
    CapExceeded(usize),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error("at least 2 agents are required, got max_agents = {0}")]
    TooFewAgents(usize),
}

/// Configurations reachable from a root by non-silent steps.
#[derive(Debug, Clone)]
pub struct ReachGraph {
    /// `nodes[0]` is the root; the rest in BFS order.
    pub nodes: Vec<Configuration>,
    /// Outgoing non-silent steps per node.
    pub edges: Vec<Vec<(TransitionId, usize)>>,
    index: HashMap<Configuration, usize>,
}

impl ReachGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_of(&self, c: &Configuration) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Bottom SCCs as sorted node lists, ordered by smallest member.
    pub fn bottom_sccs(&self) -> Vec<Vec<usize>> {
        let mut g: DiGraph<(), ()> = DiGraph::with_capacity(self.len(), 0);
        for _ in 0..self.len() {
            g.add_node(());
        }
        for (u, out) in self.edges.iter().enumerate() {
            for &(_, v) in out {
                g.add_edge(NodeIndex::new(u), NodeIndex::new(v), ());
            }
        }
        let sccs = tarjan_scc(&g);
        let mut comp = vec![0; self.len()];
        for (i, scc) in sccs.iter().enumerate() {
            for n in scc {
                comp[n.index()] = i;
            }
        }
        let mut bottoms: Vec<Vec<usize>> = sccs
            .iter()
            .enumerate()
            .filter(|(i, scc)| {
                scc.iter()
                    .all(|n| self.edges[n.index()].iter().all(|&(_, v)| comp[v] == *i))
            })
            .map(|(_, scc)| {
                let mut v: Vec<usize> = scc.iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        bottoms.sort();
        bottoms
    }
}

/// Breadth-first closure of `c0` under non-silent steps.
pub fn explore(p: &Protocol, c0: &Configuration, cap: usize) -> Result<ReachGraph, OracleError> {
    if c0.size() < 2 {
        return Err(PopulationError::TooSmall(c0.size()).into());
    }
    let mut g = ReachGraph {
        nodes: vec![c0.clone()],
        edges: vec![Vec::new()],
        index: HashMap::new(),
    };
    g.index.insert(c0.clone(), 0);
    let mut queue = VecDeque::from([0usize]);
    let non_silent = p.non_silent();
    while let Some(u) = queue.pop_front() {
        let c = g.nodes[u].clone();
        let mut out = Vec::new();
        for &t in &non_silent {
            if !p.is_enabled(&c, t) {
                continue;
            }
            let next = p.step(&c, t).expect("enabled step");
            let v = match g.index.get(&next) {
                Some(&v) => v,
                None => {
                    if g.nodes.len() >= cap {
                        return Err(OracleError::CapExceeded(cap));
                    }
                    let v = g.nodes.len();
                    g.index.insert(next.clone(), v);
                    g.nodes.push(next);
                    g.edges.push(Vec::new());
                    queue.push_back(v);
                    v
                }
            };
            out.push((t, v));
        }
        g.edges[u] = out;
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilization {
    /// Every fair execution stabilizes to this output.
    Stabilizes(bool),
    /// All bottom SCCs are consensus, but with different values.
    Split,
    /// Some bottom SCC contains a non-consensus configuration.
    NonConsensus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputClassification {
    pub kind: Stabilization,
    /// Every bottom SCC is a single terminal configuration.
    pub silent: bool,
    /// Size of the reachability graph.
    pub configurations: usize,
}

impl InputClassification {
    pub fn value(&self) -> Option<bool> {
        match self.kind {
            Stabilization::Stabilizes(b) => Some(b),
            _ => None,
        }
    }
}

pub fn classify_graph(p: &Protocol, g: &ReachGraph) -> InputClassification {
    let bottoms = g.bottom_sccs();
    let silent = bottoms
        .iter()
        .all(|scc| scc.len() == 1 && g.edges[scc[0]].is_empty());
    let mut values: Vec<Option<bool>> = Vec::new();
    for scc in &bottoms {
        let outs: Vec<Option<bool>> = scc
            .iter()
            .map(|&n| p.consensus_output(&g.nodes[n]))
            .collect();
        if outs.iter().any(Option::is_none) || outs.windows(2).any(|w| w[0] != w[1]) {
            return InputClassification {
                kind: Stabilization::NonConsensus,
                silent,
                configurations: g.len(),
            };
        }
        values.push(outs[0]);
    }
    values.dedup();
    let kind = match values.as_slice() {
        [Some(b)] => Stabilization::Stabilizes(*b),
        _ => Stabilization::Split,
    };
    InputClassification {
        kind,
        silent,
        configurations: g.len(),
    }
}

pub fn classify_input(
    p: &Protocol,
    x: &InputAssignment,
    cap: usize,
) -> Result<InputClassification, OracleError> {
    let c0 = p.initialize(x)?;
    Ok(classify_graph(p, &explore(p, &c0, cap)?))
}

/// Every input with exactly `n` agents, in lexicographic order of count vectors.
pub fn inputs_of_size(symbols: usize, n: u64) -> Vec<InputAssignment> {
    fn rec(k: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<InputAssignment>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(InputAssignment::from_dense(cur));
            cur.pop();
            return;
        }
        for v in (0..=left).rev() {
            cur.push(v);
            rec(k, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if symbols > 0 {
        rec(symbols, n, &mut Vec::new(), &mut out);
    }
    out
}

/// Classification of every input with 2 to `max_agents` agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub entries: BTreeMap<InputAssignment, InputClassification>,
}

impl OracleReport {
    /// The first input (by size, then order) that does not stabilize.
    pub fn witness(&self) -> Option<(&InputAssignment, &InputClassification)> {
        self.entries
            .iter()
            .filter(|(_, c)| c.value().is_none())
            .min_by_key(|(x, _)| (x.size(), (*x).clone()))
    }

    pub fn well_specified(&self) -> bool {
        self.witness().is_none()
    }

    pub fn all_silent(&self) -> bool {
        self.entries.values().all(|c| c.silent)
    }

    /// Stabilized output per input; `None` if some input does not stabilize.
    pub fn table(&self) -> Option<BTreeMap<InputAssignment, bool>> {
        self.entries
            .iter()
            .map(|(x, c)| c.value().map(|b| (x.clone(), b)))
            .collect()
    }
}

/// Exhaustively classify all inputs of 2..=`max_agents` agents, in parallel.
pub fn oracle_well_specified(
    p: &Protocol,
    max_agents: usize,
    cap: usize,
) -> Result<OracleReport, OracleError> {
    if max_agents < 2 {
        return Err(OracleError::TooFewAgents(max_agents));
    }
    let inputs: Vec<InputAssignment> = (2..=max_agents as u64)
        .flat_map(|n| inputs_of_size(p.alphabet().len(), n))
        .collect();
    let entries = inputs
        .into_par_iter()
        .map(|x| classify_input(p, &x, cap).map(|c| (x, c)))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    Ok(OracleReport { entries })
}
