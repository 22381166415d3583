//! Discrete Bayesian belief networks.
//!
//! A network is loaded from JSON, validated once, and is immutable
//! afterwards. Queries run exact variable elimination ([`BayesNet::posterior`])
//! and can be cross-checked against brute-force joint enumeration
//! ([`BayesNet::enumerate_joint`]).
//!
//! # File format
//!
//! ```json
//! {
//!   "nodes": [
//!     { "name": "rain", "states": ["yes", "no"], "parents": [], "cpt": [[0.2, 0.8]] },
//!     { "name": "wet", "states": ["yes", "no"], "parents": ["rain"],
//!       "cpt": [[0.9, 0.1], [0.1, 0.9]] }
//!   ],
//!   "events": [ { "node": "wet", "occurs": "yes" } ]
//! }
//! ```
//!
//! `cpt` holds one row per parent-state combination, row-major with the
//! first listed parent most significant (the last parent varies fastest).
//! Each row is a distribution over the node's own `states`. `events` names
//! the hazardous-event nodes and the state meaning "the event occurs".

mod factor;
mod inference;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

pub use inference::MAX_ENUMERATION_STATES;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetNode<T> {
    pub name: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    pub cpt: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpec {
    pub node: String,
    pub occurs: String,
}

/// Serialized network definition, not yet validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDef<T> {
    pub nodes: Vec<NetNode<T>>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    DuplicateNode,
    TooFewStates(usize),
    DuplicateState(String),
    UnknownParent(String),
    DuplicateParent(String),
    RowCount {
        expected: usize,
        found: usize,
    },
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },
    ProbabilityOutOfRange {
        row: usize,
        value: f64,
    },
    RowSum {
        row: usize,
        sum: f64,
    },
    Cycle,
    UnknownEventNode,
    UnknownEventState(String),
    DuplicateEvent,
}

/// First invariant violation found in a network definition.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct Violation {
    pub node: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node `{}`: ", self.node)?;
        match &self.kind {
            ViolationKind::DuplicateNode => write!(f, "declared more than once"),
            ViolationKind::TooFewStates(n) => write!(f, "needs at least 2 states, has {n}"),
            ViolationKind::DuplicateState(s) => write!(f, "duplicate state label `{s}`"),
            ViolationKind::UnknownParent(p) => write!(f, "unknown parent `{p}`"),
            ViolationKind::DuplicateParent(p) => write!(f, "parent `{p}` listed twice"),
            ViolationKind::RowCount { expected, found } => {
                write!(f, "field `cpt`: expected {expected} rows, found {found}")
            }
            ViolationKind::RowArity {
                row,
                expected,
                found,
            } => write!(
                f,
                "field `cpt` row {row}: expected {expected} entries, found {found}"
            ),
            ViolationKind::ProbabilityOutOfRange { row, value } => {
                write!(
                    f,
                    "field `cpt` row {row}: probability {value} outside [0, 1]"
                )
            }
            ViolationKind::RowSum { row, sum } => {
                write!(f, "field `cpt` row {row}: sums to {sum}, not 1")
            }
            ViolationKind::Cycle => write!(f, "participates in a directed cycle"),
            ViolationKind::UnknownEventNode => write!(f, "event refers to a missing node"),
            ViolationKind::UnknownEventState(s) => {
                write!(f, "event state `{s}` is not a state of the node")
            }
            ViolationKind::DuplicateEvent => write!(f, "listed as an event more than once"),
        }
    }
}

#[derive(Debug, Error)]
pub enum BbnError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid network: {0}")]
    Invalid(#[from] Violation),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has no state `{state}`")]
    UnknownState { node: String, state: String },
    #[error("evidence has zero probability under the network")]
    InconsistentEvidence,
    #[error("joint state space of {0} assignments exceeds the enumeration limit")]
    StateSpaceTooLarge(u128),
    #[error("elimination order must list every hidden variable exactly once")]
    BadEliminationOrder,
}

/// Observed states keyed by node name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub assignments: BTreeMap<String, String>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, node: impl Into<String>, state: impl Into<String>) -> Self {
        self.set(node, state);
        self
    }

    pub fn set(&mut self, node: impl Into<String>, state: impl Into<String>) {
        self.assignments.insert(node.into(), state.into());
    }

    pub fn get(&self, node: &str) -> Option<&str> {
        self.assignments.get(node).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Check every structural and numeric invariant of a definition.
pub fn validate<T: Real>(def: &NetworkDef<T>) -> Result<(), Violation> {
    let mut index = HashMap::new();
    for (i, node) in def.nodes.iter().enumerate() {
        if index.insert(node.name.as_str(), i).is_some() {
            return Err(violation(&node.name, ViolationKind::DuplicateNode));
        }
    }
    for node in &def.nodes {
        let name = &node.name;
        if node.states.len() < 2 {
            return Err(violation(
                name,
                ViolationKind::TooFewStates(node.states.len()),
            ));
        }
        for (i, s) in node.states.iter().enumerate() {
            if node.states[..i].contains(s) {
                return Err(violation(name, ViolationKind::DuplicateState(s.clone())));
            }
        }
        let mut rows = 1usize;
        for (i, p) in node.parents.iter().enumerate() {
            let Some(&pi) = index.get(p.as_str()) else {
                return Err(violation(name, ViolationKind::UnknownParent(p.clone())));
            };
            if node.parents[..i].contains(p) {
                return Err(violation(name, ViolationKind::DuplicateParent(p.clone())));
            }
            rows = rows.saturating_mul(def.nodes[pi].states.len());
        }
        if node.cpt.len() != rows {
            return Err(violation(
                name,
                ViolationKind::RowCount {
                    expected: rows,
                    found: node.cpt.len(),
                },
            ));
        }
        for (r, row) in node.cpt.iter().enumerate() {
            if row.len() != node.states.len() {
                return Err(violation(
                    name,
                    ViolationKind::RowArity {
                        row: r,
                        expected: node.states.len(),
                        found: row.len(),
                    },
                ));
            }
            if let Some(v) = row.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
                return Err(violation(
                    name,
                    ViolationKind::ProbabilityOutOfRange {
                        row: r,
                        value: v.as_f64(),
                    },
                ));
            }
            let sum: f64 = row.iter().map(|v| v.as_f64()).sum();
            // f32 tables cannot meet 1e-9; scale to the scalar's precision
            let tol = ROW_SUM_TOLERANCE.max(T::epsilon().as_f64() * 8.0 * row.len() as f64);
            if (sum - 1.0).abs() > tol {
                return Err(violation(name, ViolationKind::RowSum { row: r, sum }));
            }
        }
    }
    if let Some(name) = find_cycle(def, &index) {
        return Err(violation(&name, ViolationKind::Cycle));
    }
    for (i, ev) in def.events.iter().enumerate() {
        let Some(&ni) = index.get(ev.node.as_str()) else {
            return Err(violation(&ev.node, ViolationKind::UnknownEventNode));
        };
        if !def.nodes[ni].states.contains(&ev.occurs) {
            return Err(violation(
                &ev.node,
                ViolationKind::UnknownEventState(ev.occurs.clone()),
            ));
        }
        if def.events[..i].iter().any(|e| e.node == ev.node) {
            return Err(violation(&ev.node, ViolationKind::DuplicateEvent));
        }
    }
    Ok(())
}

fn violation(node: &str, kind: ViolationKind) -> Violation {
    Violation {
        node: node.to_string(),
        kind,
    }
}

/// Name of a node on a directed cycle, if any.
fn find_cycle<T>(def: &NetworkDef<T>, index: &HashMap<&str, usize>) -> Option<String> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut mark = vec![0u8; def.nodes.len()];
    fn visit<T>(
        i: usize,
        def: &NetworkDef<T>,
        index: &HashMap<&str, usize>,
        mark: &mut [u8],
    ) -> Option<usize> {
        mark[i] = 1;
        for p in &def.nodes[i].parents {
            let pi = index[p.as_str()];
            match mark[pi] {
                1 => return Some(pi),
                0 => {
                    if let Some(c) = visit(pi, def, index, mark) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        mark[i] = 2;
        None
    }
    for i in 0..def.nodes.len() {
        if mark[i] == 0 {
            if let Some(c) = visit(i, def, index, &mut mark) {
                return Some(def.nodes[c].name.clone());
            }
        }
    }
    None
}

/// A validated, immutable network.
#[derive(Debug, Clone)]
pub struct BayesNet<T> {
    def: NetworkDef<T>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    cards: Vec<usize>,
    /// Parents before children.
    topo: Vec<usize>,
    events: Vec<(usize, usize)>,
}

impl<T: Real> BayesNet<T> {
    pub fn new(def: NetworkDef<T>) -> Result<Self, Violation> {
        validate(&def)?;
        let index: HashMap<String, usize> = def
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.clone(), i))
            .collect();
        let parents: Vec<Vec<usize>> = def
            .nodes
            .iter()
            .map(|n| n.parents.iter().map(|p| index[p]).collect())
            .collect();
        let cards = def.nodes.iter().map(|n| n.states.len()).collect();
        let topo = topological_order(&parents);
        let events = def
            .events
            .iter()
            .map(|e| {
                let ni = index[&e.node];
                let si = def.nodes[ni]
                    .states
                    .iter()
                    .position(|s| *s == e.occurs)
                    .expect("validated");
                (ni, si)
            })
            .collect();
        Ok(Self {
            def,
            index,
            parents,
            cards,
            topo,
            events,
        })
    }

    pub fn definition(&self) -> &NetworkDef<T> {
        &self.def
    }

    pub fn len(&self) -> usize {
        self.def.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.def.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &NetNode<T> {
        &self.def.nodes[i]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.cards[i]
    }

    pub fn state_index(&self, node: usize, state: &str) -> Option<usize> {
        self.def.nodes[node].states.iter().position(|s| s == state)
    }

    /// Event nodes as `(node index, occurs-state index)`.
    pub fn event_nodes(&self) -> &[(usize, usize)] {
        &self.events
    }

    pub fn event_names(&self) -> impl Iterator<Item = &str> {
        self.def.events.iter().map(|e| e.node.as_str())
    }

    /// Evidence by name turned into one optional state per node.
    pub fn resolve(&self, ev: &Evidence) -> Result<Vec<Option<usize>>, BbnError> {
        let mut out = vec![None; self.len()];
        for (node, state) in &ev.assignments {
            let ni = self
                .node_index(node)
                .ok_or_else(|| BbnError::UnknownNode(node.clone()))?;
            let si = self
                .state_index(ni, state)
                .ok_or_else(|| BbnError::UnknownState {
                    node: node.clone(),
                    state: state.clone(),
                })?;
            out[ni] = Some(si);
        }
        Ok(out)
    }

    fn target_index(&self, target: &str) -> Result<usize, BbnError> {
        self.node_index(target)
            .ok_or_else(|| BbnError::UnknownNode(target.to_string()))
    }

    /// Exact `P(target | ev)` by variable elimination (min-degree order).
    pub fn posterior(&self, ev: &Evidence, target: &str) -> Result<Vec<T>, BbnError> {
        let observed = self.resolve(ev)?;
        self.posterior_indexed(&observed, self.target_index(target)?)
    }

    pub fn posterior_indexed(
        &self,
        observed: &[Option<usize>],
        target: usize,
    ) -> Result<Vec<T>, BbnError> {
        inference::eliminate(self, observed, target, None)
    }

    /// Variable elimination with a caller-supplied order over the hidden
    /// (unobserved, non-target, relevant) variables. Any order is valid.
    pub fn posterior_with_order(
        &self,
        ev: &Evidence,
        target: &str,
        order: &[usize],
    ) -> Result<Vec<T>, BbnError> {
        let observed = self.resolve(ev)?;
        inference::eliminate(self, &observed, self.target_index(target)?, Some(order))
    }

    /// Hidden variables that elimination would sum out for this query.
    pub fn hidden_variables(&self, ev: &Evidence, target: &str) -> Result<Vec<usize>, BbnError> {
        let observed = self.resolve(ev)?;
        let t = self.target_index(target)?;
        Ok(inference::hidden_variables(self, &observed, t))
    }

    /// Brute-force posterior by summing the full joint. Test oracle.
    pub fn enumerate_joint(&self, ev: &Evidence, target: &str) -> Result<Vec<T>, BbnError> {
        let observed = self.resolve(ev)?;
        inference::enumerate(self, &observed, self.target_index(target)?)
    }

    /// `P(E_i occurs | ev)` for every event node, in declaration order.
    pub fn event_probabilities(&self, observed: &[Option<usize>]) -> Result<Vec<T>, BbnError> {
        self.events
            .iter()
            .map(|&(ni, si)| Ok(self.posterior_indexed(observed, ni)?[si]))
            .collect()
    }

    pub(crate) fn parents_of(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn topo_order(&self) -> &[usize] {
        &self.topo
    }
}

impl<T: Real + Serialize> BayesNet<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.def).expect("network serializes")
    }
}

fn topological_order(parents: &[Vec<usize>]) -> Vec<usize> {
    let n = parents.len();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    fn visit(i: usize, parents: &[Vec<usize>], done: &mut [bool], order: &mut Vec<usize>) {
        if done[i] {
            return;
        }
        done[i] = true;
        for &p in &parents[i] {
            visit(p, parents, done, order);
        }
        order.push(i);
    }
    for i in 0..n {
        visit(i, parents, &mut done, &mut order);
    }
    order
}

/// JSON source of the bundled collision and grounding network.
pub const REFERENCE_NETWORK: &str = include_str!("../../data/reference_network.json");

/// The bundled collision and grounding network.
pub fn reference_network<T: Real + DeserializeOwned>() -> BayesNet<T> {
    load_network(REFERENCE_NETWORK).expect("bundled network is valid")
}

/// Parse and validate a JSON network definition.
pub fn load_network<T: Real + DeserializeOwned>(source: &str) -> Result<BayesNet<T>, BbnError> {
    let def: NetworkDef<T> = serde_json::from_str(source).map_err(|e| BbnError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(BayesNet::new(def)?)
}

#[cfg(test)]
mod tests;
