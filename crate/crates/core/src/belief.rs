//! Belief updates, bounded belief-MDP exploration and its optimal strategy.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::controller::Fsc;
use crate::evaluator::{state_values, EvalError};
use crate::model::{
    ActionId, Distribution, ObjectiveKind, ObsId, ObsSeq, Objective, Pomdp, StateId,
    PROB_TOLERANCE,
};
use crate::teacher::OutputSymbol;

pub type BeliefId = usize;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("action `{action}` is not enabled in the support of the belief")]
    ActionNotEnabled { action: String },
    #[error("belief support mixes observations")]
    MixedObservations,
    #[error("exploration budget must allow at least one belief")]
    ZeroBudget,
    #[error("no cut-off strategy with id {0}")]
    MissingCutoff(usize),
    #[error("belief MDP was explored for a different target set")]
    TargetMismatch,
    #[error("value iteration did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("cut-off evaluation failed: {0}")]
    Cutoff(#[from] EvalError),
}

/// A distribution over states that all share one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    dist: Distribution,
    observation: ObsId,
}

/// Canonical hashable form of a belief.
pub type BeliefKey = Vec<(StateId, i64)>;

impl Belief {
    pub fn initial(pomdp: &Pomdp) -> Self {
        let s0 = pomdp.initial();
        Belief {
            dist: Distribution::dirac(s0),
            observation: pomdp.observation(s0),
        }
    }

    pub fn new(dist: Distribution, pomdp: &Pomdp) -> Result<Self, BeliefError> {
        let observation = {
            let mut support = dist.support().map(|s| pomdp.observation(s));
            let observation = support.next().ok_or(BeliefError::MixedObservations)?;
            if support.any(|z| z != observation) {
                return Err(BeliefError::MixedObservations);
            }
            observation
        };
        Ok(Belief { dist, observation })
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }

    pub fn observation(&self) -> ObsId {
        self.observation
    }

    pub fn prob(&self, s: StateId) -> f64 {
        self.dist.prob(s)
    }

    pub fn key(&self) -> BeliefKey {
        self.dist
            .iter()
            .map(|(s, p)| (s, (p / PROB_TOLERANCE).round() as i64))
            .collect()
    }
}

/// Bayesian update of `b` after playing `a` and observing `z`; `None` when
/// `z` has probability zero.
pub fn belief_update(
    pomdp: &Pomdp,
    b: &Belief,
    a: ActionId,
    z: ObsId,
) -> Result<Option<Belief>, BeliefError> {
    let mut mass: BTreeMap<StateId, f64> = BTreeMap::new();
    for (s, p) in b.dist.iter() {
        let next = pomdp.transition(s, a).ok_or_else(|| BeliefError::ActionNotEnabled {
            action: pomdp.action_name(a).to_string(),
        })?;
        for (t, q) in next.iter() {
            if pomdp.observation(t) == z {
                *mass.entry(t).or_insert(0.0) += p * q;
            }
        }
    }
    Ok(Distribution::normalized(mass).map(|dist| Belief { dist, observation: z }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    /// Successors were computed.
    Explored,
    /// Not expanded; its value comes from the cut-off strategy with this id.
    Cutoff(usize),
    /// Support lies inside the target set.
    Target,
}

/// Successors of one action: `(observation, probability, belief)` with
/// observations ascending and probabilities conditioned on the non-target mass.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefEdge {
    pub action: ActionId,
    pub successors: Vec<(ObsId, f64, BeliefId)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNode {
    pub belief: Belief,
    pub depth: usize,
    pub kind: NodeKind,
    /// Probability mass already on target states.
    pub target_mass: f64,
    pub edges: Vec<BeliefEdge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreOptions {
    pub max_beliefs: usize,
    pub max_depth: usize,
    pub cutoff_strategy: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            max_beliefs: 10_000,
            max_depth: usize::MAX,
            cutoff_strategy: 0,
        }
    }
}

/// Finite fragment of the belief MDP reachable from the initial belief.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMdp {
    nodes: Vec<BeliefNode>,
    targets: BTreeSet<StateId>,
}

/// Breadth-first exploration of the belief MDP. A belief is expanded only
/// while fewer than `max_beliefs` beliefs are known and its depth is below
/// `max_depth`; otherwise it becomes a cut-off.
pub fn explore(
    pomdp: &Pomdp,
    objective: &Objective,
    opts: &ExploreOptions,
) -> Result<BeliefMdp, BeliefError> {
    if opts.max_beliefs == 0 {
        return Err(BeliefError::ZeroBudget);
    }
    let targets = &objective.targets;
    let mut nodes = vec![new_node(Belief::initial(pomdp), 0, targets)];
    let mut index: HashMap<BeliefKey, BeliefId> = HashMap::new();
    index.insert(nodes[0].belief.key(), 0);
    let mut queue = VecDeque::from([0]);
    while let Some(id) = queue.pop_front() {
        if nodes[id].kind == NodeKind::Target {
            continue;
        }
        if nodes.len() >= opts.max_beliefs || nodes[id].depth >= opts.max_depth {
            nodes[id].kind = NodeKind::Cutoff(opts.cutoff_strategy);
            continue;
        }
        let belief = nodes[id].belief.clone();
        let depth = nodes[id].depth;
        let live = 1.0 - nodes[id].target_mass;
        let mut edges = Vec::new();
        for &a in pomdp.actions_of_observation(belief.observation) {
            let mut mass: BTreeMap<ObsId, BTreeMap<StateId, f64>> = BTreeMap::new();
            for (s, p) in belief.dist.iter().filter(|(s, _)| !targets.contains(s)) {
                let next = pomdp.transition(s, a).expect("observation action-consistency");
                for (t, q) in next.iter() {
                    *mass.entry(pomdp.observation(t)).or_default().entry(t).or_insert(0.0) +=
                        p * q;
                }
            }
            let mut successors = Vec::with_capacity(mass.len());
            for (z, states) in mass {
                let total: f64 = states.values().sum();
                let Some(dist) = Distribution::normalized(states) else { continue };
                let next = Belief { dist, observation: z };
                let key = next.key();
                let target = match index.get(&key) {
                    Some(&k) => k,
                    None => {
                        let k = nodes.len();
                        nodes.push(new_node(next, depth + 1, targets));
                        index.insert(key, k);
                        queue.push_back(k);
                        k
                    }
                };
                successors.push((z, total / live, target));
            }
            edges.push(BeliefEdge { action: a, successors });
        }
        nodes[id].edges = edges;
    }
    Ok(BeliefMdp {
        nodes,
        targets: targets.clone(),
    })
}

fn new_node(belief: Belief, depth: usize, targets: &BTreeSet<StateId>) -> BeliefNode {
    let target_mass: f64 = belief
        .dist
        .iter()
        .filter(|(s, _)| targets.contains(s))
        .map(|(_, p)| p)
        .sum();
    let all_target = belief.dist.support().all(|s| targets.contains(&s));
    BeliefNode {
        belief,
        depth,
        kind: if all_target { NodeKind::Target } else { NodeKind::Explored },
        target_mass: if all_target { 1.0 } else { target_mass },
        edges: Vec::new(),
    }
}

impl BeliefMdp {
    pub fn initial(&self) -> BeliefId {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, b: BeliefId) -> &BeliefNode {
        &self.nodes[b]
    }

    pub fn nodes(&self) -> &[BeliefNode] {
        &self.nodes
    }

    pub fn targets(&self) -> &BTreeSet<StateId> {
        &self.targets
    }

    pub fn num_cutoffs(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Cutoff(_)))
            .count()
    }

    pub fn num_explored(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Explored).count()
    }

    pub fn successors(&self, b: BeliefId, a: ActionId) -> &[(ObsId, f64, BeliefId)] {
        self.nodes[b]
            .edges
            .iter()
            .find(|e| e.action == a)
            .map(|e| e.successors.as_slice())
            .unwrap_or(&[])
    }

    pub fn successor(&self, b: BeliefId, a: ActionId, z: ObsId) -> Option<BeliefId> {
        self.successors(b, a)
            .iter()
            .find(|&&(y, _, _)| y == z)
            .map(|&(_, _, next)| next)
    }

    /// Shortlex-least observation sequence reaching each belief, following
    /// the strategy's choices when one is given and all actions otherwise.
    pub fn representatives(&self, strategy: Option<&BeliefStrategy>) -> Vec<Option<ObsSeq>> {
        let mut reps: Vec<Option<ObsSeq>> = vec![None; self.nodes.len()];
        let b0 = self.initial();
        reps[b0] = Some(ObsSeq::new(vec![self.nodes[b0].belief.observation]));
        let mut queue = VecDeque::from([b0]);
        while let Some(b) = queue.pop_front() {
            let mut next: Vec<(ObsId, BeliefId)> = match strategy {
                Some(st) => match st.choice(b) {
                    Choice::Action(a) => {
                        self.successors(b, a).iter().map(|&(z, _, n)| (z, n)).collect()
                    }
                    _ => Vec::new(),
                },
                None => self.nodes[b]
                    .edges
                    .iter()
                    .flat_map(|e| e.successors.iter().map(|&(z, _, n)| (z, n)))
                    .collect(),
            };
            next.sort_unstable();
            next.dedup();
            let seq = reps[b].clone().expect("queued beliefs have a representative");
            for (z, n) in next {
                if reps[n].is_none() {
                    reps[n] = Some(seq.pushed(z));
                    queue.push_back(n);
                }
            }
        }
        reps
    }

    /// Beliefs reachable from the initial belief under the strategy.
    pub fn strategy_reachable(&self, strategy: &BeliefStrategy) -> Vec<BeliefId> {
        self.representatives(Some(strategy))
            .iter()
            .enumerate()
            .filter_map(|(b, r)| r.as_ref().map(|_| b))
            .collect()
    }

    /// Shortlex-least sequence reaching `b` under the strategy, or under any
    /// actions if the strategy never visits `b`.
    pub fn representative(&self, b: BeliefId, strategy: &BeliefStrategy) -> Option<ObsSeq> {
        self.representatives(Some(strategy))[b]
            .clone()
            .or_else(|| self.representatives(None)[b].clone())
    }
}

/// A memoryless strategy used to value and complete cut-off beliefs.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffStrategy {
    pub id: usize,
    /// One action distribution per observation.
    pub policy: Vec<Distribution>,
}

impl CutoffStrategy {
    /// Uniform over the enabled actions of each observation.
    pub fn uniform(pomdp: &Pomdp) -> Self {
        CutoffStrategy {
            id: 0,
            policy: (0..pomdp.num_observations())
                .map(|z| Distribution::uniform(pomdp.actions_of_observation(z)))
                .collect(),
        }
    }

    pub fn as_fsc(&self) -> Fsc {
        Fsc::memoryless(self.policy.iter().cloned().map(OutputSymbol::Actions).collect())
    }
}

/// Id 0 is the uniform strategy; ids from 1 are the model's own cut-off strategies.
pub fn cutoff_strategies(pomdp: &Pomdp) -> Vec<CutoffStrategy> {
    std::iter::once(CutoffStrategy::uniform(pomdp))
        .chain(
            pomdp
                .cutoff_policies()
                .iter()
                .enumerate()
                .map(|(k, policy)| CutoffStrategy {
                    id: k + 1,
                    policy: policy.clone(),
                }),
        )
        .collect()
}

/// Strategy decision at a belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Action(ActionId),
    DontKnow(usize),
    Terminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefStrategy {
    choices: Vec<Choice>,
    values: Vec<f64>,
}

impl BeliefStrategy {
    pub fn choice(&self, b: BeliefId) -> Choice {
        self.choices[b]
    }

    pub fn value_at(&self, b: BeliefId) -> f64 {
        self.values[b]
    }

    /// Optimal value of the initial belief.
    pub fn value(&self) -> f64 {
        self.values[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: 1e-8,
            max_iterations: 1_000_000,
        }
    }
}

/// Optimal values and a deterministic strategy of the explored belief MDP.
///
/// Ties between optimal actions are broken towards actions making progress
/// to the target (for objectives where the target is desirable), then by
/// lowest action index.
pub fn solve(
    pomdp: &Pomdp,
    bmdp: &BeliefMdp,
    objective: &Objective,
    cutoffs: &[CutoffStrategy],
    opts: &SolveOptions,
) -> Result<BeliefStrategy, BeliefError> {
    if bmdp.targets != objective.targets {
        return Err(BeliefError::TargetMismatch);
    }
    let kind = objective.kind;
    let n = bmdp.len();
    let goal = if kind.is_probability() { 1.0 } else { 0.0 };

    let mut cutoff_values: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for node in &bmdp.nodes {
        if let NodeKind::Cutoff(i) = node.kind {
            if let std::collections::btree_map::Entry::Vacant(e) = cutoff_values.entry(i) {
                let strategy = cutoffs
                    .iter()
                    .find(|c| c.id == i)
                    .ok_or(BeliefError::MissingCutoff(i))?;
                e.insert(state_values(pomdp, &strategy.as_fsc(), objective, opts.tolerance)?);
            }
        }
    }

    let mut values = vec![0.0; n];
    for (b, node) in bmdp.nodes.iter().enumerate() {
        values[b] = match node.kind {
            NodeKind::Target => goal,
            NodeKind::Cutoff(i) => node
                .belief
                .dist
                .iter()
                .map(|(s, p)| if p > 0.0 { p * cutoff_values[&i][s] } else { 0.0 })
                .sum(),
            NodeKind::Explored => 0.0,
        };
    }
    let explored = |b: usize| bmdp.nodes[b].kind == NodeKind::Explored;
    let good: Vec<bool> = (0..n)
        .map(|b| match bmdp.nodes[b].kind {
            NodeKind::Target => true,
            NodeKind::Cutoff(_) => values[b].is_finite(),
            NodeKind::Explored => false,
        })
        .collect();

    // Actions allowed at each explored belief, and beliefs with infinite value.
    let all_actions: Vec<Vec<usize>> = (0..n).map(|b| (0..bmdp.nodes[b].edges.len()).collect()).collect();
    let (allowed, infinite) = match kind {
        ObjectiveKind::MinReward => {
            let u = prob1_e(bmdp, &good);
            let allowed = (0..n)
                .map(|b| {
                    all_actions[b]
                        .iter()
                        .copied()
                        .filter(|&e| bmdp.nodes[b].edges[e].successors.iter().all(|s| u[s.2]))
                        .collect()
                })
                .collect();
            (allowed, (0..n).map(|b| !u[b]).collect::<Vec<_>>())
        }
        ObjectiveKind::MaxReward => (all_actions, pmin_below_one(bmdp, &good)),
        _ => (all_actions, vec![false; n]),
    };
    for b in 0..n {
        if infinite[b] {
            values[b] = f64::INFINITY;
        }
    }

    let q = |values: &[f64], b: usize, e: usize| -> f64 {
        let node = &bmdp.nodes[b];
        let edge = &node.edges[e];
        let live = 1.0 - node.target_mass;
        let reward: f64 = if kind.is_probability() {
            0.0
        } else {
            node.belief
                .dist
                .iter()
                .filter(|(s, _)| !bmdp.targets.contains(s))
                .map(|(s, p)| p * pomdp.reward(s, edge.action))
                .sum()
        };
        let cont: f64 = edge.successors.iter().map(|&(_, p, t)| p * values[t]).sum();
        node.target_mass * goal + reward + live * cont
    };
    let pick = |a: f64, b: f64| if kind.better(a, b) { a } else { b };

    let active: Vec<usize> = (0..n).filter(|&b| explored(b) && !infinite[b]).collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(BeliefError::NotConverged(opts.max_iterations));
        }
        let mut diff: f64 = 0.0;
        for &b in &active {
            let best = allowed[b]
                .iter()
                .map(|&e| q(&values, b, e))
                .reduce(pick)
                .expect("explored beliefs have an allowed action");
            diff = diff.max((best - values[b]).abs());
            values[b] = best;
        }
        if diff < opts.tolerance {
            break;
        }
    }

    // Optimal action sets.
    let mut optimal: Vec<Vec<usize>> = vec![Vec::new(); n];
    for b in (0..n).filter(|&b| explored(b)) {
        if infinite[b] {
            optimal[b] = allowed[b].clone();
            if optimal[b].is_empty() {
                optimal[b] = vec![0];
            }
            continue;
        }
        let qs: Vec<(usize, f64)> = allowed[b].iter().map(|&e| (e, q(&values, b, e))).collect();
        let best = qs.iter().map(|x| x.1).reduce(pick).expect("nonempty");
        let slack = 1e-6 * best.abs().max(1.0);
        optimal[b] = qs
            .iter()
            .filter(|(_, v)| (v - best).abs() <= slack)
            .map(|&(e, _)| e)
            .collect();
    }

    let progress = matches!(kind, ObjectiveKind::MaxProb | ObjectiveKind::MinReward);
    let rank = progress.then(|| {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (b, opt) in optimal.iter().enumerate() {
            for &e in opt {
                for &(_, _, t) in &bmdp.nodes[b].edges[e].successors {
                    preds[t].push(b);
                }
            }
        }
        let mut rank = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for b in 0..n {
            let root = match bmdp.nodes[b].kind {
                NodeKind::Target => true,
                NodeKind::Cutoff(_) => match kind {
                    ObjectiveKind::MaxProb => values[b] > 0.0,
                    _ => values[b].is_finite(),
                },
                NodeKind::Explored => bmdp.nodes[b].target_mass > 0.0,
            };
            if root {
                rank[b] = 0;
                queue.push_back(b);
            }
        }
        while let Some(t) = queue.pop_front() {
            for &b in &preds[t] {
                if rank[b] == usize::MAX {
                    rank[b] = rank[t] + 1;
                    queue.push_back(b);
                }
            }
        }
        rank
    });

    let choices = (0..n)
        .map(|b| match bmdp.nodes[b].kind {
            NodeKind::Target => Choice::Terminal,
            NodeKind::Cutoff(i) => Choice::DontKnow(i),
            NodeKind::Explored => {
                let edges = &bmdp.nodes[b].edges;
                let score = |e: usize| -> usize {
                    rank.as_ref().map_or(0, |r| {
                        edges[e].successors.iter().map(|s| r[s.2]).min().unwrap_or(usize::MAX)
                    })
                };
                let e = optimal[b]
                    .iter()
                    .copied()
                    .min_by_key(|&e| (score(e), edges[e].action))
                    .expect("nonempty");
                Choice::Action(edges[e].action)
            }
        })
        .collect();
    Ok(BeliefStrategy { choices, values })
}

/// Beliefs from which some strategy reaches `good` almost surely.
fn prob1_e(bmdp: &BeliefMdp, good: &[bool]) -> Vec<bool> {
    let n = bmdp.len();
    let mut u = vec![true; n];
    loop {
        let mut r: Vec<bool> = (0..n).map(|b| good[b] && u[b]).collect();
        loop {
            let mut changed = false;
            for b in 0..n {
                if r[b] || !u[b] || bmdp.nodes[b].kind != NodeKind::Explored {
                    continue;
                }
                let reaches = bmdp.nodes[b].edges.iter().any(|e| {
                    e.successors.iter().all(|s| u[s.2]) && e.successors.iter().any(|s| r[s.2])
                });
                if reaches {
                    r[b] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// Beliefs from which some strategy avoids `good` with positive probability.
fn pmin_below_one(bmdp: &BeliefMdp, good: &[bool]) -> Vec<bool> {
    let n = bmdp.len();
    let mut avoid: Vec<bool> = good.iter().map(|g| !g).collect();
    loop {
        let mut changed = false;
        for b in 0..n {
            if avoid[b] && bmdp.nodes[b].kind == NodeKind::Explored {
                let stays = bmdp.nodes[b]
                    .edges
                    .iter()
                    .any(|e| e.successors.iter().all(|s| avoid[s.2]));
                if !stays {
                    avoid[b] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut bad = avoid;
    loop {
        let mut changed = false;
        for b in 0..n {
            if !bad[b] && !good[b] && bmdp.nodes[b].kind == NodeKind::Explored {
                let reaches = bmdp.nodes[b]
                    .edges
                    .iter()
                    .any(|e| e.successors.iter().any(|s| bad[s.2]));
                if reaches {
                    bad[b] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return bad;
        }
    }
}
