//! Finite-state controllers: execution, χ-completion heuristics and export.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::CutoffStrategy;
use crate::learner::minimize;
use crate::model::{Distribution, ObsId, ObsSeq, Pomdp};
use crate::teacher::{OutputSymbol, SymbolError};

pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("controller is not total: node {node} lacks an entry for observation {observation}")]
    NotTotal { node: NodeId, observation: ObsId },
    #[error("transition of node {node} on observation {observation} targets unknown node {target}")]
    DanglingNode {
        node: NodeId,
        observation: ObsId,
        target: NodeId,
    },
    #[error("controller has no nodes")]
    Empty,
    #[error("inapplicable controller: node {node}, observation `{observation}` outputs {output}")]
    Inapplicable {
        node: NodeId,
        observation: String,
        output: String,
    },
    #[error("no cut-off strategy with id {0}")]
    MissingCutoff(usize),
    #[error("malformed controller file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("controller file: {0}")]
    Invalid(String),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// A finite-state controller `(N, γ, δ, n0)` over the observations of a POMDP.
///
/// Outputs may still be `†` or `χ_i` while the controller is being learned
/// or completed; see [`Fsc::check_applicable`].
#[derive(Debug, Clone, PartialEq)]
pub struct Fsc {
    num_obs: usize,
    gamma: Vec<Vec<OutputSymbol>>,
    delta: Vec<Vec<NodeId>>,
    initial: NodeId,
}

impl Fsc {
    pub fn new(
        num_obs: usize,
        gamma: Vec<Vec<OutputSymbol>>,
        delta: Vec<Vec<NodeId>>,
        initial: NodeId,
    ) -> Result<Self, ControllerError> {
        if gamma.is_empty() {
            return Err(ControllerError::Empty);
        }
        let n = gamma.len();
        if delta.len() != n || initial >= n {
            return Err(ControllerError::Invalid(
                "output and transition maps disagree on the node set".into(),
            ));
        }
        for node in 0..n {
            if gamma[node].len() != num_obs || delta[node].len() != num_obs {
                let observation = gamma[node].len().min(delta[node].len());
                return Err(ControllerError::NotTotal { node, observation });
            }
            for (z, &target) in delta[node].iter().enumerate() {
                if target >= n {
                    return Err(ControllerError::DanglingNode {
                        node,
                        observation: z,
                        target,
                    });
                }
            }
        }
        Ok(Fsc {
            num_obs,
            gamma,
            delta,
            initial,
        })
    }

    /// A one-node controller playing `policy[z]` on observation `z`.
    pub fn memoryless(policy: Vec<OutputSymbol>) -> Self {
        let num_obs = policy.len();
        Fsc {
            num_obs,
            gamma: vec![policy],
            delta: vec![vec![0; num_obs]],
            initial: 0,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.gamma.len()
    }

    pub fn num_observations(&self) -> usize {
        self.num_obs
    }

    pub fn initial(&self) -> NodeId {
        self.initial
    }

    pub fn output(&self, node: NodeId, z: ObsId) -> &OutputSymbol {
        &self.gamma[node][z]
    }

    pub fn next(&self, node: NodeId, z: ObsId) -> NodeId {
        self.delta[node][z]
    }

    /// Node reached after reading all of `seq` from the initial node.
    pub fn node_after(&self, seq: &[ObsId]) -> NodeId {
        seq.iter().fold(self.initial, |n, &z| self.delta[n][z])
    }

    /// Output on the last symbol of `seq`; `None` for the empty sequence.
    pub fn run(&self, seq: &ObsSeq) -> Option<&OutputSymbol> {
        let (&last, prefix) = seq.as_slice().split_last()?;
        Some(&self.gamma[self.node_after(prefix)][last])
    }

    /// Nodes in breadth-first order from the initial node, observations ascending.
    pub fn bfs_order(&self) -> Vec<NodeId> {
        let mut seen = vec![false; self.num_nodes()];
        let mut order = Vec::with_capacity(self.num_nodes());
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        while let Some(n) = queue.pop_front() {
            order.push(n);
            for &m in &self.delta[n] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        order
    }

    /// Whether any output is a `χ` symbol.
    pub fn has_dont_know(&self) -> bool {
        self.gamma.iter().flatten().any(|o| matches!(o, OutputSymbol::DontKnow(_)))
    }

    /// Applicable controllers output only action distributions over the
    /// enabled actions of each observation.
    pub fn check_applicable(&self, pomdp: &Pomdp) -> Result<(), ControllerError> {
        for node in 0..self.num_nodes() {
            for z in 0..self.num_obs {
                let out = &self.gamma[node][z];
                let ok = match out {
                    OutputSymbol::Actions(d) => {
                        let enabled = pomdp.actions_of_observation(z);
                        d.support().all(|a| enabled.contains(&a))
                    }
                    _ => false,
                };
                if !ok {
                    return Err(ControllerError::Inapplicable {
                        node,
                        observation: pomdp.observation_name(z).to_string(),
                        output: out.render(pomdp),
                    });
                }
            }
        }
        Ok(())
    }

    /// Builds the controller with outputs `f(node, z, γ(node, z))`; structure unchanged.
    pub fn map_outputs(&self, mut f: impl FnMut(NodeId, ObsId, &OutputSymbol) -> OutputSymbol) -> Fsc {
        let gamma = self
            .gamma
            .iter()
            .enumerate()
            .map(|(n, row)| row.iter().enumerate().map(|(z, o)| f(n, z, o)).collect())
            .collect();
        Fsc {
            num_obs: self.num_obs,
            gamma,
            delta: self.delta.clone(),
            initial: self.initial,
        }
    }

    pub fn to_json(&self, pomdp: &Pomdp) -> String {
        let file = FscFile {
            nodes: (0..self.num_nodes()).collect(),
            initial: self.initial,
            transitions: (0..self.num_nodes())
                .flat_map(|node| {
                    (0..self.num_obs).map(move |z| FscTransition {
                        node,
                        observation: pomdp.observation_name(z).to_string(),
                        output: self.gamma[node][z].render(pomdp),
                        next: self.delta[node][z],
                    })
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("controller serialization cannot fail")
    }

    pub fn from_json(text: &str, pomdp: &Pomdp) -> Result<Fsc, ControllerError> {
        let file: FscFile = serde_json::from_str(text)?;
        let index: BTreeMap<usize, NodeId> =
            file.nodes.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        if index.len() != file.nodes.len() {
            return Err(ControllerError::Invalid("duplicate node id".into()));
        }
        let lookup = |id: usize| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| ControllerError::Invalid(format!("unknown node {id}")))
        };
        let n = file.nodes.len();
        let z_count = pomdp.num_observations();
        let mut gamma: Vec<Vec<Option<OutputSymbol>>> = vec![vec![None; z_count]; n];
        let mut delta: Vec<Vec<Option<NodeId>>> = vec![vec![None; z_count]; n];
        for t in &file.transitions {
            let node = lookup(t.node)?;
            let z = pomdp.observation_by_name(&t.observation).ok_or_else(|| {
                ControllerError::Invalid(format!("unknown observation `{}`", t.observation))
            })?;
            gamma[node][z] = Some(OutputSymbol::parse(&t.output, pomdp)?);
            delta[node][z] = Some(lookup(t.next)?);
        }
        let mut g = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for node in 0..n {
            let mut grow = Vec::with_capacity(z_count);
            let mut drow = Vec::with_capacity(z_count);
            for z in 0..z_count {
                match (gamma[node][z].take(), delta[node][z]) {
                    (Some(o), Some(m)) => {
                        grow.push(o);
                        drow.push(m);
                    }
                    _ => return Err(ControllerError::NotTotal { node, observation: z }),
                }
            }
            g.push(grow);
            d.push(drow);
        }
        Fsc::new(z_count, g, d, lookup(file.initial)?)
    }

    /// GraphViz rendering: one vertex per node, one edge per (node, observation)
    /// labelled `obs / output`. The initial node is drawn as a double circle.
    pub fn to_dot(&self, pomdp: &Pomdp) -> String {
        let mut out = String::from("digraph fsc {\n  rankdir=LR;\n");
        for node in 0..self.num_nodes() {
            let shape = if node == self.initial { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  n{node} [label=\"{node}\", shape={shape}];");
        }
        for node in 0..self.num_nodes() {
            for z in 0..self.num_obs {
                let _ = writeln!(
                    out,
                    "  n{} -> n{} [label=\"{} / {}\"];",
                    node,
                    self.delta[node][z],
                    escape(pomdp.observation_name(z)),
                    escape(&self.gamma[node][z].render_dot(pomdp)),
                );
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[derive(Debug, Serialize, Deserialize)]
struct FscFile {
    nodes: Vec<usize>,
    initial: usize,
    transitions: Vec<FscTransition>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FscTransition {
    node: usize,
    observation: String,
    output: String,
    next: usize,
}

/// Heuristic 1: replace each `χ_i` on observation `o` by the empirical action
/// distribution `#(o, a) / #(o)` over the concrete outputs on `o`. A `χ_i`
/// on an observation without concrete outputs is kept.
pub fn apply_h1(f: &Fsc) -> Fsc {
    let mut counts: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); f.num_obs];
    let mut totals = vec![0usize; f.num_obs];
    for row in &f.gamma {
        for (z, out) in row.iter().enumerate() {
            if let OutputSymbol::Actions(d) = out {
                totals[z] += 1;
                for (a, p) in d.iter() {
                    *counts[z].entry(a).or_insert(0.0) += p;
                }
            }
        }
    }
    let replacement: Vec<Option<Distribution>> = (0..f.num_obs)
        .map(|z| {
            (totals[z] > 0).then(|| {
                let total = totals[z] as f64;
                Distribution::normalized(counts[z].iter().map(|(&a, &c)| (a, c / total)))
                    .expect("positive mass")
            })
        })
        .collect();
    f.map_outputs(|_, z, out| match (out, &replacement[z]) {
        (OutputSymbol::DontKnow(_), Some(d)) => OutputSymbol::Actions(d.clone()),
        _ => out.clone(),
    })
}

/// Heuristic 2: relabel every `χ_i` as `†` and minimize.
pub fn apply_h2(f: &Fsc) -> Fsc {
    let relabelled = f.map_outputs(|_, _, out| match out {
        OutputSymbol::DontKnow(_) => OutputSymbol::DontCare,
        _ => out.clone(),
    });
    minimize(&relabelled)
}

/// Exact composition with the cut-off strategies: after the first `χ_i` the
/// controller follows cut-off strategy `i` forever, via one absorbing node per
/// referenced strategy.
pub fn apply_base(f: &Fsc, cutoffs: &[CutoffStrategy]) -> Result<Fsc, ControllerError> {
    let referenced: BTreeSet<usize> = f
        .gamma
        .iter()
        .flatten()
        .filter_map(|o| match o {
            OutputSymbol::DontKnow(i) => Some(*i),
            _ => None,
        })
        .collect();
    if referenced.is_empty() {
        return Ok(f.clone());
    }
    let mut sink_of = BTreeMap::new();
    let mut policies = Vec::new();
    for (k, &i) in referenced.iter().enumerate() {
        let strategy = cutoffs
            .iter()
            .find(|c| c.id == i)
            .ok_or(ControllerError::MissingCutoff(i))?;
        sink_of.insert(i, f.num_nodes() + k);
        policies.push(strategy);
    }
    let mut gamma = f.gamma.clone();
    let mut delta = f.delta.clone();
    for node in 0..f.num_nodes() {
        for z in 0..f.num_obs {
            if let OutputSymbol::DontKnow(i) = gamma[node][z] {
                let strategy = cutoffs.iter().find(|c| c.id == i).expect("checked above");
                gamma[node][z] = OutputSymbol::Actions(strategy.policy[z].clone());
                delta[node][z] = sink_of[&i];
            }
        }
    }
    for (k, strategy) in policies.iter().enumerate() {
        let sink = f.num_nodes() + k;
        gamma.push(strategy.policy.iter().cloned().map(OutputSymbol::Actions).collect());
        delta.push(vec![sink; f.num_obs]);
    }
    Fsc::new(f.num_obs, gamma, delta, f.initial)
}

/// Replaces each `†` by the lexicographically first (by name) enabled action
/// of its observation.
pub fn resolve_dont_care(f: &Fsc, pomdp: &Pomdp) -> Fsc {
    let fallback: Vec<Option<OutputSymbol>> = (0..f.num_obs)
        .map(|z| {
            pomdp
                .actions_of_observation(z)
                .iter()
                .min_by_key(|&&a| pomdp.action_name(a))
                .map(|&a| OutputSymbol::action(a))
        })
        .collect();
    f.map_outputs(|_, z, out| match (out, &fallback[z]) {
        (OutputSymbol::DontCare, Some(a)) => a.clone(),
        _ => out.clone(),
    })
}
