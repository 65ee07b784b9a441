//! Markov chain induced by a controller on a POMDP, its exact values and a
//! seeded Monte Carlo estimate.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::controller::{ControllerError, Fsc, NodeId};
use crate::linalg::solve_dense;
use crate::model::{ObjectiveKind, Objective, Pomdp, StateId};
use crate::teacher::OutputSymbol;

/// Chains with at most this many undetermined states are solved exactly.
pub const EXACT_LIMIT: usize = 2000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("controller has {found} observations, model has {expected}")]
    ObservationMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Inapplicable(#[from] ControllerError),
    #[error("value iteration did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("linear system is singular")]
    Singular,
}

/// How `†` outputs are handled when building the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DontCarePolicy {
    /// `†` (and `χ`) outputs make the controller inapplicable.
    #[default]
    Reject,
    /// `†` plays the first enabled action by name.
    FirstEnabled,
}

/// Discrete-time Markov chain over reachable pairs `(state, node)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMc {
    states: Vec<(StateId, NodeId)>,
    transitions: Vec<Vec<(usize, f64)>>,
    rewards: Vec<f64>,
    targets: Vec<bool>,
    fsc_nodes: usize,
}

/// Builds the chain reachable from `(s0, n0)`. Target states are absorbing
/// and carry no reward.
pub fn induce_mc(
    pomdp: &Pomdp,
    fsc: &Fsc,
    targets: &BTreeSet<StateId>,
    policy: DontCarePolicy,
) -> Result<InducedMc, EvalError> {
    induce_mc_from(pomdp, fsc, targets, &[(pomdp.initial(), fsc.initial())], policy)
}

/// Builds the chain reachable from the given roots; the roots are the first
/// chain states, in order.
pub fn induce_mc_from(
    pomdp: &Pomdp,
    fsc: &Fsc,
    targets: &BTreeSet<StateId>,
    roots: &[(StateId, NodeId)],
    policy: DontCarePolicy,
) -> Result<InducedMc, EvalError> {
    if fsc.num_observations() != pomdp.num_observations() {
        return Err(EvalError::ObservationMismatch {
            expected: pomdp.num_observations(),
            found: fsc.num_observations(),
        });
    }
    let fsc = match policy {
        DontCarePolicy::Reject => fsc.clone(),
        DontCarePolicy::FirstEnabled => crate::controller::resolve_dont_care(fsc, pomdp),
    };
    fsc.check_applicable(pomdp)?;

    let mut index: HashMap<(StateId, NodeId), usize> = HashMap::new();
    let mut states = Vec::new();
    let mut queue = VecDeque::new();
    for &root in roots {
        if let std::collections::hash_map::Entry::Vacant(e) = index.entry(root) {
            e.insert(states.len());
            states.push(root);
            queue.push_back(states.len() - 1);
        }
    }
    let mut transitions: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rewards = Vec::new();
    let mut is_target = Vec::new();
    while let Some(i) = queue.pop_front() {
        let (s, n) = states[i];
        let mut succ: Vec<(usize, f64)> = Vec::new();
        let mut reward = 0.0;
        if targets.contains(&s) {
            succ.push((i, 1.0));
        } else {
            let z = pomdp.observation(s);
            let OutputSymbol::Actions(dist) = fsc.output(n, z) else {
                unreachable!("applicable controllers output distributions")
            };
            let m = fsc.next(n, z);
            let mut acc: HashMap<usize, f64> = HashMap::new();
            for (a, pa) in dist.iter() {
                reward += pa * pomdp.reward(s, a);
                let next = pomdp.transition(s, a).expect("applicable controllers play enabled actions");
                for (t, pt) in next.iter() {
                    let key = (t, m);
                    let j = match index.get(&key) {
                        Some(&j) => j,
                        None => {
                            let j = states.len();
                            index.insert(key, j);
                            states.push(key);
                            queue.push_back(j);
                            j
                        }
                    };
                    *acc.entry(j).or_insert(0.0) += pa * pt;
                }
            }
            succ = acc.into_iter().collect();
            succ.sort_by_key(|&(j, _)| j);
        }
        if transitions.len() <= i {
            transitions.resize(i + 1, Vec::new());
            rewards.resize(i + 1, 0.0);
            is_target.resize(i + 1, false);
        }
        transitions[i] = succ;
        rewards[i] = reward;
        is_target[i] = targets.contains(&s);
    }
    transitions.resize(states.len(), Vec::new());
    rewards.resize(states.len(), 0.0);
    is_target.resize(states.len(), false);
    Ok(InducedMc {
        states,
        transitions,
        rewards,
        targets: is_target,
        fsc_nodes: fsc.num_nodes(),
    })
}

impl InducedMc {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> (StateId, NodeId) {
        self.states[i]
    }

    pub fn successors(&self, i: usize) -> &[(usize, f64)] {
        &self.transitions[i]
    }

    pub fn reward(&self, i: usize) -> f64 {
        self.rewards[i]
    }

    pub fn is_target(&self, i: usize) -> bool {
        self.targets[i]
    }

    pub fn fsc_nodes(&self) -> usize {
        self.fsc_nodes
    }

    /// States from which a target is reachable.
    fn can_reach_target(&self) -> Vec<bool> {
        let n = self.len();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, succ) in self.transitions.iter().enumerate() {
            for &(j, _) in succ {
                preds[j].push(i);
            }
        }
        let mut reach = self.targets.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| reach[i]).collect();
        while let Some(j) = queue.pop_front() {
            for &i in &preds[j] {
                if !reach[i] {
                    reach[i] = true;
                    queue.push_back(i);
                }
            }
        }
        reach
    }

    /// States reaching a target with probability one.
    fn almost_surely_reach(&self) -> Vec<bool> {
        let reach = self.can_reach_target();
        let n = self.len();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, succ) in self.transitions.iter().enumerate() {
            if !self.targets[i] {
                for &(j, _) in succ {
                    preds[j].push(i);
                }
            }
        }
        let mut doomed: Vec<bool> = reach.iter().map(|r| !r).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| doomed[i]).collect();
        while let Some(j) = queue.pop_front() {
            for &i in &preds[j] {
                if !doomed[i] {
                    doomed[i] = true;
                    queue.push_back(i);
                }
            }
        }
        doomed.iter().map(|d| !d).collect()
    }
}

/// Linear solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Exact for at most [`EXACT_LIMIT`] unknowns, iterative otherwise.
    #[default]
    Auto,
    Exact,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::Auto,
            tolerance: 1e-10,
            max_iterations: 1_000_000,
        }
    }
}

/// Reachability probability (`probability = true`) or expected total reward
/// until a target, for every chain state.
pub fn chain_values(
    mc: &InducedMc,
    probability: bool,
    opts: &SolveOptions,
) -> Result<Vec<f64>, EvalError> {
    let n = mc.len();
    let mut values = vec![0.0; n];
    let unknown: Vec<usize> = if probability {
        let reach = mc.can_reach_target();
        for (v, &t) in values.iter_mut().zip(&mc.targets) {
            if t {
                *v = 1.0;
            }
        }
        (0..n).filter(|&i| reach[i] && !mc.targets[i]).collect()
    } else {
        let sure = mc.almost_surely_reach();
        for i in 0..n {
            if !sure[i] {
                values[i] = f64::INFINITY;
            }
        }
        (0..n).filter(|&i| sure[i] && !mc.targets[i]).collect()
    };
    if unknown.is_empty() {
        return Ok(values);
    }
    let pos: HashMap<usize, usize> = unknown.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let constant = |i: usize| -> f64 {
        let fixed: f64 = mc.transitions[i]
            .iter()
            .filter(|(j, _)| !pos.contains_key(j))
            .map(|&(j, p)| if probability { p * values[j] } else { 0.0 })
            .sum();
        if probability {
            fixed
        } else {
            mc.rewards[i]
        }
    };
    let exact = match opts.method {
        SolveMethod::Exact => true,
        SolveMethod::Iterative => false,
        SolveMethod::Auto => unknown.len() <= EXACT_LIMIT,
    };
    let m = unknown.len();
    if exact {
        let mut a = vec![vec![0.0; m]; m];
        let mut b = vec![0.0; m];
        for (k, &i) in unknown.iter().enumerate() {
            a[k][k] += 1.0;
            for &(j, p) in &mc.transitions[i] {
                if let Some(&l) = pos.get(&j) {
                    a[k][l] -= p;
                }
            }
            b[k] = constant(i);
        }
        let x = solve_dense(a, b).ok_or(EvalError::Singular)?;
        for (k, &i) in unknown.iter().enumerate() {
            values[i] = x[k];
        }
    } else {
        let consts: Vec<f64> = unknown.iter().map(|&i| constant(i)).collect();
        let mut iterations = 0;
        loop {
            iterations += 1;
            if iterations > opts.max_iterations {
                return Err(EvalError::NotConverged(opts.max_iterations));
            }
            let mut diff: f64 = 0.0;
            for (k, &i) in unknown.iter().enumerate() {
                let v = consts[k]
                    + mc.transitions[i]
                        .iter()
                        .filter(|(j, _)| pos.contains_key(j))
                        .map(|&(j, p)| p * values[j])
                        .sum::<f64>();
                diff = diff.max((v - values[i]).abs());
                values[i] = v;
            }
            if diff < opts.tolerance {
                break;
            }
        }
    }
    Ok(values)
}

/// Value of the controller started in every POMDP state at its initial node.
pub fn state_values(
    pomdp: &Pomdp,
    fsc: &Fsc,
    objective: &Objective,
    tolerance: f64,
) -> Result<Vec<f64>, EvalError> {
    let roots: Vec<(StateId, NodeId)> =
        (0..pomdp.num_states()).map(|s| (s, fsc.initial())).collect();
    let mc = induce_mc_from(pomdp, fsc, &objective.targets, &roots, DontCarePolicy::Reject)?;
    let opts = SolveOptions {
        tolerance: tolerance.min(1e-10),
        ..Default::default()
    };
    let values = chain_values(&mc, objective.kind.is_probability(), &opts)?;
    Ok(values[..pomdp.num_states()].to_vec())
}

fn serialize_value<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueReport {
    pub objective: ObjectiveKind,
    #[serde(serialize_with = "serialize_value")]
    pub value: f64,
    pub mc_states: usize,
    pub fsc_nodes: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Exact value of the chain from its initial state.
pub fn value(mc: &InducedMc, objective: &Objective) -> Result<ValueReport, EvalError> {
    value_with(mc, objective, &SolveOptions::default())
}

pub fn value_with(
    mc: &InducedMc,
    objective: &Objective,
    opts: &SolveOptions,
) -> Result<ValueReport, EvalError> {
    let start = Instant::now();
    let values = chain_values(mc, objective.kind.is_probability(), opts)?;
    Ok(ValueReport {
        objective: objective.kind,
        value: values[0],
        mc_states: mc.len(),
        fsc_nodes: mc.fsc_nodes,
        wall_time: start.elapsed(),
    })
}

/// Monte Carlo summary over independent episodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub episodes: usize,
    pub horizon: usize,
    /// Fraction of episodes that reached a target.
    pub reach_frequency: f64,
    pub reach_stderr: f64,
    /// Mean accumulated reward, truncated at the horizon.
    pub mean_reward: f64,
    pub reward_stderr: f64,
}

/// Samples `episodes` runs of at most `horizon` steps. Episode `k` uses
/// stream `k` of a ChaCha8 generator seeded with `seed`, so results do not
/// depend on scheduling.
pub fn simulate(mc: &InducedMc, seed: u64, episodes: usize, horizon: usize) -> Estimate {
    let mut hits = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for k in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut i = 0;
        let mut total = 0.0;
        let mut reached = mc.targets[0];
        for _ in 0..horizon {
            if reached {
                break;
            }
            total += mc.rewards[i];
            let u: f64 = rng.gen();
            let succ = &mc.transitions[i];
            let mut acc = 0.0;
            let mut next = succ[succ.len() - 1].0;
            for &(j, p) in succ {
                acc += p;
                if u < acc {
                    next = j;
                    break;
                }
            }
            i = next;
            reached = mc.targets[i];
        }
        hits += usize::from(reached);
        sum += total;
        sum_sq += total * total;
    }
    let n = episodes.max(1) as f64;
    let freq = hits as f64 / n;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Estimate {
        episodes,
        horizon,
        reach_frequency: freq,
        reach_stderr: (freq * (1.0 - freq) / n).sqrt(),
        mean_reward: mean,
        reward_stderr: (var / n).sqrt(),
    }
}
