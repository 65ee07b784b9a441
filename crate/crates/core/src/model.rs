//! POMDP data model, model-file parsing and validation.
//!
//! States, actions and observations are addressed by dense indices in the
//! order they first appear in the model file. Names are kept only for I/O.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type StateId = usize;
pub type ActionId = usize;
pub type ObsId = usize;

/// Tolerance used when checking that probabilities sum to one.
pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("probability {prob} of element {id} is outside (0, 1]")]
    Range { id: usize, prob: f64 },
    #[error("element {0} appears twice in the support")]
    Duplicate(usize),
    #[error("distribution sum is {0}, expected 1")]
    Sum(f64),
    #[error("distribution has empty support")]
    Empty,
}

/// A finite discrete distribution over dense ids, stored sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    entries: Vec<(usize, f64)>,
}

impl Distribution {
    pub fn new(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self, DistributionError> {
        let mut entries: Vec<(usize, f64)> = entries.into_iter().collect();
        if entries.is_empty() {
            return Err(DistributionError::Empty);
        }
        for &(id, p) in &entries {
            if !(p > 0.0 && p <= 1.0 + PROB_TOLERANCE) {
                return Err(DistributionError::Range { id, prob: p });
            }
        }
        entries.sort_by_key(|&(id, _)| id);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(DistributionError::Duplicate(w[0].0));
        }
        let sum: f64 = entries.iter().map(|&(_, p)| p).sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(DistributionError::Sum(sum));
        }
        Ok(Distribution { entries })
    }

    /// Normalizes nonnegative weights; zero weights are dropped. Returns `None`
    /// when the total weight is zero.
    pub fn normalized(weights: impl IntoIterator<Item = (usize, f64)>) -> Option<Self> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (id, w) in weights {
            if w > 0.0 {
                *acc.entry(id).or_insert(0.0) += w;
            }
        }
        let total: f64 = acc.values().sum();
        if total <= 0.0 {
            return None;
        }
        Some(Distribution {
            entries: acc.into_iter().map(|(id, w)| (id, w / total)).collect(),
        })
    }

    pub fn dirac(id: usize) -> Self {
        Distribution {
            entries: vec![(id, 1.0)],
        }
    }

    /// Uniform distribution over `ids`. Panics on an empty slice.
    pub fn uniform(ids: &[usize]) -> Self {
        assert!(!ids.is_empty(), "uniform distribution over an empty set");
        let p = 1.0 / ids.len() as f64;
        Distribution::normalized(ids.iter().map(|&id| (id, p))).expect("nonempty support")
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(id, _)| id)
    }

    pub fn prob(&self, id: usize) -> f64 {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .map(|ix| self.entries[ix].1)
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The single support element of a Dirac distribution.
    pub fn as_dirac(&self) -> Option<usize> {
        match self.entries.as_slice() {
            [(id, _)] => Some(*id),
            _ => None,
        }
    }

    /// Same support and per-entry probabilities within `tol`.
    pub fn approx_eq(&self, other: &Distribution, tol: f64) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= tol)
    }
}

/// A finite observation sequence, an element of Z*.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ObsSeq(Vec<ObsId>);

impl ObsSeq {
    pub fn empty() -> Self {
        ObsSeq(Vec::new())
    }

    pub fn new(symbols: Vec<ObsId>) -> Self {
        ObsSeq(symbols)
    }

    pub fn as_slice(&self) -> &[ObsId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<ObsId> {
        self.0.last().copied()
    }

    pub fn pushed(&self, z: ObsId) -> ObsSeq {
        let mut v = self.0.clone();
        v.push(z);
        ObsSeq(v)
    }

    pub fn concat(&self, other: &ObsSeq) -> ObsSeq {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        ObsSeq(v)
    }

    /// All prefixes including the empty one and the sequence itself.
    pub fn prefixes(&self) -> impl Iterator<Item = ObsSeq> + '_ {
        (0..=self.0.len()).map(|i| ObsSeq(self.0[..i].to_vec()))
    }

    /// All non-empty suffixes, longest first.
    pub fn suffixes(&self) -> impl Iterator<Item = ObsSeq> + '_ {
        (0..self.0.len()).map(|i| ObsSeq(self.0[i..].to_vec()))
    }

    /// Shortlex order: shorter first, then lexicographic by observation index.
    pub fn shortlex_cmp(&self, other: &ObsSeq) -> std::cmp::Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }

    pub fn display<'a>(&'a self, pomdp: &'a Pomdp) -> impl fmt::Display + 'a {
        SeqDisplay { seq: self, pomdp }
    }
}

impl From<Vec<ObsId>> for ObsSeq {
    fn from(v: Vec<ObsId>) -> Self {
        ObsSeq(v)
    }
}

struct SeqDisplay<'a> {
    seq: &'a ObsSeq,
    pomdp: &'a Pomdp,
}

impl fmt::Display for SeqDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &z) in self.seq.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(self.pomdp.observation_name(z))?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("dangling id `{id}` in {context}")]
    DanglingId { id: String, context: &'static str },
    #[error("distribution sum: successors of ({state}, {action}) {source}")]
    DistributionSum {
        state: String,
        action: String,
        source: DistributionError,
    },
    #[error("invalid distribution for ({state}, {action}): {source}")]
    InvalidDistribution {
        state: String,
        action: String,
        source: DistributionError,
    },
    #[error("duplicate transition for ({state}, {action})")]
    DuplicateTransition { state: String, action: String },
    #[error("deadlock: state `{0}` has no enabled action")]
    Deadlock(String),
    #[error(
        "observation action-consistency: states `{first}` and `{second}` share observation `{observation}` but enable different actions"
    )]
    ObservationActionConsistency {
        observation: String,
        first: String,
        second: String,
    },
    #[error("negative reward {value} for ({state}, {action})")]
    NegativeReward {
        state: String,
        action: String,
        value: f64,
    },
    #[error("invalid cut-off strategy {index}: {reason}")]
    InvalidCutoff { index: usize, reason: String },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("invalid objective `{0}`")]
    InvalidObjective(String),
    #[error("objective has an empty target set")]
    EmptyTarget,
}

impl ModelError {
    fn dangling(id: &str, context: &'static str) -> Self {
        ModelError::DanglingId {
            id: id.to_string(),
            context,
        }
    }
}

// On-disk representation.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    states: Vec<StateEntry>,
    actions: Vec<String>,
    transitions: Vec<TransitionEntry>,
    initial: String,
    #[serde(default)]
    targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rewards: Option<Vec<RewardEntry>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    cutoff_strategies: Vec<CutoffEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEntry {
    id: String,
    observation: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    from: String,
    action: String,
    to: Vec<SuccessorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuccessorEntry {
    state: String,
    prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardEntry {
    state: String,
    action: String,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CutoffEntry {
    policy: Vec<CutoffRule>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CutoffRule {
    observation: String,
    actions: Vec<ActionWeight>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionWeight {
    action: String,
    prob: f64,
}

/// A finite POMDP with deterministic observations on states.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp {
    state_names: Vec<String>,
    action_names: Vec<String>,
    observation_names: Vec<String>,
    obs_of: Vec<ObsId>,
    /// Per state, the enabled actions with their successor distributions, sorted by action.
    transitions: Vec<Vec<(ActionId, Distribution)>>,
    initial: StateId,
    targets: BTreeSet<StateId>,
    rewards: Option<BTreeMap<(StateId, ActionId), f64>>,
    /// User-supplied memoryless strategies, one distribution per observation.
    cutoff_policies: Vec<Vec<Distribution>>,
    actions_of_obs: Vec<Vec<ActionId>>,
    states_of_obs: Vec<Vec<StateId>>,
}

pub fn parse_model(text: &str) -> Result<Pomdp, ModelError> {
    let file: ModelFile = serde_json::from_str(text)?;
    Pomdp::from_file(file)
}

impl Pomdp {
    fn from_file(file: ModelFile) -> Result<Self, ModelError> {
        let mut state_ix: HashMap<&str, StateId> = HashMap::new();
        let mut obs_ix: HashMap<&str, ObsId> = HashMap::new();
        let mut observation_names = Vec::new();
        let mut obs_of = Vec::with_capacity(file.states.len());
        for (i, st) in file.states.iter().enumerate() {
            if state_ix.insert(&st.id, i).is_some() {
                return Err(ModelError::DuplicateId(st.id.clone()));
            }
            let next = obs_ix.len();
            let z = *obs_ix.entry(&st.observation).or_insert_with(|| {
                observation_names.push(st.observation.clone());
                next
            });
            obs_of.push(z);
        }
        let mut action_ix: HashMap<&str, ActionId> = HashMap::new();
        for (i, a) in file.actions.iter().enumerate() {
            if action_ix.insert(a, i).is_some() {
                return Err(ModelError::DuplicateId(a.clone()));
            }
        }

        let n = file.states.len();
        let mut transitions: Vec<Vec<(ActionId, Distribution)>> = vec![Vec::new(); n];
        for t in &file.transitions {
            let s = *state_ix
                .get(t.from.as_str())
                .ok_or_else(|| ModelError::dangling(&t.from, "transition source"))?;
            let a = *action_ix
                .get(t.action.as_str())
                .ok_or_else(|| ModelError::dangling(&t.action, "transition action"))?;
            if transitions[s].iter().any(|(b, _)| *b == a) {
                return Err(ModelError::DuplicateTransition {
                    state: t.from.clone(),
                    action: t.action.clone(),
                });
            }
            let mut succ = Vec::with_capacity(t.to.len());
            for e in &t.to {
                let s2 = *state_ix
                    .get(e.state.as_str())
                    .ok_or_else(|| ModelError::dangling(&e.state, "transition target"))?;
                succ.push((s2, e.prob));
            }
            let dist = Distribution::new(succ).map_err(|source| match source {
                DistributionError::Sum(_) => ModelError::DistributionSum {
                    state: t.from.clone(),
                    action: t.action.clone(),
                    source,
                },
                _ => ModelError::InvalidDistribution {
                    state: t.from.clone(),
                    action: t.action.clone(),
                    source,
                },
            })?;
            transitions[s].push((a, dist));
        }
        for (s, row) in transitions.iter_mut().enumerate() {
            if row.is_empty() {
                return Err(ModelError::Deadlock(file.states[s].id.clone()));
            }
            row.sort_by_key(|(a, _)| *a);
        }

        let num_obs = observation_names.len();
        let mut actions_of_obs: Vec<Option<(StateId, Vec<ActionId>)>> = vec![None; num_obs];
        let mut states_of_obs = vec![Vec::new(); num_obs];
        for s in 0..n {
            let z = obs_of[s];
            states_of_obs[z].push(s);
            let enabled: Vec<ActionId> = transitions[s].iter().map(|(a, _)| *a).collect();
            match &actions_of_obs[z] {
                None => actions_of_obs[z] = Some((s, enabled)),
                Some((first, acts)) if *acts != enabled => {
                    return Err(ModelError::ObservationActionConsistency {
                        observation: observation_names[z].clone(),
                        first: file.states[*first].id.clone(),
                        second: file.states[s].id.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        let actions_of_obs: Vec<Vec<ActionId>> = actions_of_obs
            .into_iter()
            .map(|e| e.map(|(_, a)| a).unwrap_or_default())
            .collect();

        let initial = *state_ix
            .get(file.initial.as_str())
            .ok_or_else(|| ModelError::dangling(&file.initial, "initial state"))?;

        let mut pomdp = Pomdp {
            state_names: file.states.iter().map(|s| s.id.clone()).collect(),
            action_names: file.actions.clone(),
            observation_names,
            obs_of,
            transitions,
            initial,
            targets: BTreeSet::new(),
            rewards: None,
            cutoff_policies: Vec::new(),
            actions_of_obs,
            states_of_obs,
        };

        let mut targets = BTreeSet::new();
        for label in &file.targets {
            targets.extend(
                pomdp
                    .resolve_label(label)
                    .map_err(|_| ModelError::dangling(label, "targets"))?,
            );
        }
        pomdp.targets = targets;

        if let Some(entries) = &file.rewards {
            let mut rewards = BTreeMap::new();
            for r in entries {
                let s = *state_ix
                    .get(r.state.as_str())
                    .ok_or_else(|| ModelError::dangling(&r.state, "rewards"))?;
                let a = *action_ix
                    .get(r.action.as_str())
                    .ok_or_else(|| ModelError::dangling(&r.action, "rewards"))?;
                if !pomdp.is_enabled(s, a) {
                    return Err(ModelError::dangling(&r.action, "rewards (action not enabled)"));
                }
                if r.value.is_nan() || r.value < 0.0 || !r.value.is_finite() {
                    return Err(ModelError::NegativeReward {
                        state: r.state.clone(),
                        action: r.action.clone(),
                        value: r.value,
                    });
                }
                rewards.insert((s, a), r.value);
            }
            pomdp.rewards = Some(rewards);
        }

        for (index, entry) in file.cutoff_strategies.iter().enumerate() {
            let policy = pomdp.parse_cutoff(index, entry)?;
            pomdp.cutoff_policies.push(policy);
        }
        Ok(pomdp)
    }

    fn parse_cutoff(&self, index: usize, entry: &CutoffEntry) -> Result<Vec<Distribution>, ModelError> {
        let invalid = |reason: String| ModelError::InvalidCutoff { index, reason };
        let mut policy: Vec<Option<Distribution>> = vec![None; self.num_observations()];
        for rule in &entry.policy {
            let z = self
                .observation_by_name(&rule.observation)
                .ok_or_else(|| invalid(format!("unknown observation `{}`", rule.observation)))?;
            let mut weights = Vec::new();
            for w in &rule.actions {
                let a = self
                    .action_by_name(&w.action)
                    .ok_or_else(|| invalid(format!("unknown action `{}`", w.action)))?;
                if !self.actions_of_obs[z].contains(&a) {
                    return Err(invalid(format!(
                        "action `{}` is not enabled under observation `{}`",
                        w.action, rule.observation
                    )));
                }
                weights.push((a, w.prob));
            }
            let d = Distribution::new(weights).map_err(|e| invalid(e.to_string()))?;
            policy[z] = Some(d);
        }
        Ok(policy
            .into_iter()
            .enumerate()
            .map(|(z, d)| d.unwrap_or_else(|| Distribution::uniform(&self.actions_of_obs[z])))
            .collect())
    }

    pub fn to_json(&self) -> String {
        let name = |s: StateId| self.state_names[s].clone();
        let file = ModelFile {
            states: (0..self.num_states())
                .map(|s| StateEntry {
                    id: name(s),
                    observation: self.observation_names[self.obs_of[s]].clone(),
                })
                .collect(),
            actions: self.action_names.clone(),
            transitions: (0..self.num_states())
                .flat_map(|s| {
                    self.transitions[s].iter().map(move |(a, d)| TransitionEntry {
                        from: name(s),
                        action: self.action_names[*a].clone(),
                        to: d
                            .iter()
                            .map(|(s2, p)| SuccessorEntry {
                                state: name(s2),
                                prob: p,
                            })
                            .collect(),
                    })
                })
                .collect(),
            initial: name(self.initial),
            targets: self.targets.iter().map(|&s| name(s)).collect(),
            rewards: self.rewards.as_ref().map(|r| {
                r.iter()
                    .map(|(&(s, a), &value)| RewardEntry {
                        state: name(s),
                        action: self.action_names[a].clone(),
                        value,
                    })
                    .collect()
            }),
            cutoff_strategies: self
                .cutoff_policies
                .iter()
                .map(|policy| CutoffEntry {
                    policy: policy
                        .iter()
                        .enumerate()
                        .map(|(z, d)| CutoffRule {
                            observation: self.observation_names[z].clone(),
                            actions: d
                                .iter()
                                .map(|(a, p)| ActionWeight {
                                    action: self.action_names[a].clone(),
                                    prob: p,
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observation_names.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn observation(&self, s: StateId) -> ObsId {
        self.obs_of[s]
    }

    pub fn targets(&self) -> &BTreeSet<StateId> {
        &self.targets
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.action_names[a]
    }

    pub fn observation_name(&self, z: ObsId) -> &str {
        &self.observation_names[z]
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn action_by_name(&self, name: &str) -> Option<ActionId> {
        self.action_names.iter().position(|n| n == name)
    }

    pub fn observation_by_name(&self, name: &str) -> Option<ObsId> {
        self.observation_names.iter().position(|n| n == name)
    }

    /// Enabled actions A(s), ascending.
    pub fn enabled(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.transitions[s].iter().map(|(a, _)| *a)
    }

    /// Enabled actions A(z) of an observation, ascending.
    pub fn actions_of_observation(&self, z: ObsId) -> &[ActionId] {
        &self.actions_of_obs[z]
    }

    pub fn states_with_observation(&self, z: ObsId) -> &[StateId] {
        &self.states_of_obs[z]
    }

    pub fn is_enabled(&self, s: StateId, a: ActionId) -> bool {
        self.transition(s, a).is_some()
    }

    pub fn transition(&self, s: StateId, a: ActionId) -> Option<&Distribution> {
        self.transitions[s]
            .binary_search_by_key(&a, |(b, _)| *b)
            .ok()
            .map(|ix| &self.transitions[s][ix].1)
    }

    pub fn has_rewards(&self) -> bool {
        self.rewards.is_some()
    }

    /// Reward of (s, a). Without a reward block every action costs one unit.
    pub fn reward(&self, s: StateId, a: ActionId) -> f64 {
        match &self.rewards {
            None => 1.0,
            Some(r) => r.get(&(s, a)).copied().unwrap_or(0.0),
        }
    }

    pub fn cutoff_policies(&self) -> &[Vec<Distribution>] {
        &self.cutoff_policies
    }

    /// Resolves a label to states: a state id names itself, an observation
    /// name expands to every state carrying it.
    pub fn resolve_label(&self, label: &str) -> Result<BTreeSet<StateId>, ModelError> {
        if let Some(s) = self.state_by_name(label) {
            return Ok(BTreeSet::from([s]));
        }
        if let Some(z) = self.observation_by_name(label) {
            return Ok(self.states_of_obs[z].iter().copied().collect());
        }
        Err(ModelError::UnknownLabel(label.to_string()))
    }

    /// O̅(ρ): the observation sequence of a finite path, dropping actions.
    pub fn observation_of_path(&self, path: &Path) -> Result<ObsSeq, ModelError> {
        if path.states.is_empty() || path.actions.len() + 1 != path.states.len() {
            return Err(ModelError::InvalidPath(
                "a path alternates states and actions, starting and ending with a state".into(),
            ));
        }
        for &s in &path.states {
            if s >= self.num_states() {
                return Err(ModelError::InvalidPath(format!("unknown state index {s}")));
            }
        }
        for (i, &a) in path.actions.iter().enumerate() {
            let (s, s2) = (path.states[i], path.states[i + 1]);
            let dist = self.transition(s, a).ok_or_else(|| {
                ModelError::InvalidPath(format!(
                    "action {} is disabled in state `{}`",
                    a,
                    self.state_name(s)
                ))
            })?;
            if dist.prob(s2) <= 0.0 {
                return Err(ModelError::InvalidPath(format!(
                    "state `{}` is not a successor of `{}` under `{}`",
                    self.state_name(s2),
                    self.state_name(s),
                    self.action_name(a)
                )));
            }
        }
        Ok(ObsSeq(path.states.iter().map(|&s| self.obs_of[s]).collect()))
    }

    /// Whether some path starting in the initial state produces `seq`.
    pub fn is_realizable(&self, seq: &ObsSeq) -> bool {
        let mut current: BTreeSet<StateId> = match seq.as_slice().first() {
            Some(&z) if z == self.obs_of[self.initial] => BTreeSet::from([self.initial]),
            _ => return false,
        };
        for &z in &seq.as_slice()[1..] {
            let mut next = BTreeSet::new();
            for &s in &current {
                for (_, dist) in &self.transitions[s] {
                    next.extend(dist.support().filter(|&s2| self.obs_of[s2] == z));
                }
            }
            if next.is_empty() {
                return false;
            }
            current = next;
        }
        true
    }
}

/// A finite path `s0 a0 s1 ... sk`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
}

impl Path {
    pub fn new(states: Vec<StateId>, actions: Vec<ActionId>) -> Self {
        Path { states, actions }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    MaxProb,
    MinProb,
    MaxReward,
    MinReward,
}

impl ObjectiveKind {
    pub fn is_probability(self) -> bool {
        matches!(self, ObjectiveKind::MaxProb | ObjectiveKind::MinProb)
    }

    pub fn maximizes(self) -> bool {
        matches!(self, ObjectiveKind::MaxProb | ObjectiveKind::MaxReward)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::MaxProb => "maxprob",
            ObjectiveKind::MinProb => "minprob",
            ObjectiveKind::MaxReward => "maxreward",
            ObjectiveKind::MinReward => "minreward",
        }
    }

    /// Whether `a` is strictly better than `b` for this objective.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.maximizes() {
            a > b
        } else {
            a < b
        }
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "maxprob" | "pmax" => Ok(ObjectiveKind::MaxProb),
            "minprob" | "pmin" => Ok(ObjectiveKind::MinProb),
            "maxreward" | "rmax" => Ok(ObjectiveKind::MaxReward),
            "minreward" | "rmin" => Ok(ObjectiveKind::MinReward),
            _ => Err(ModelError::InvalidObjective(s.to_string())),
        }
    }
}

/// Reachability probability or expected total reward until reaching `targets`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub targets: BTreeSet<StateId>,
    pub label: String,
}

impl Objective {
    pub fn new(kind: ObjectiveKind, targets: BTreeSet<StateId>) -> Result<Self, ModelError> {
        if targets.is_empty() {
            return Err(ModelError::EmptyTarget);
        }
        Ok(Objective {
            kind,
            targets,
            label: String::new(),
        })
    }

    /// Parses `kind[:label[,label...]]`, e.g. `maxprob:g`. Without labels the
    /// model's own targets are used.
    pub fn parse(query: &str, pomdp: &Pomdp) -> Result<Self, ModelError> {
        let (kind, labels) = match query.split_once(':') {
            Some((k, l)) => (k, Some(l)),
            None => (query, None),
        };
        let kind: ObjectiveKind = kind.parse()?;
        let targets = match labels {
            None => pomdp.targets().clone(),
            Some(l) => {
                let mut t = BTreeSet::new();
                for label in l.split(',').map(str::trim).filter(|x| !x.is_empty()) {
                    t.extend(pomdp.resolve_label(label)?);
                }
                t
            }
        };
        let mut objective = Objective::new(kind, targets)?;
        objective.label = query.to_string();
        Ok(objective)
    }

    pub fn is_target(&self, s: StateId) -> bool {
        self.targets.contains(&s)
    }
}
