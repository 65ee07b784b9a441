#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use fsc_distill::{parse_model, Fsc, ObsSeq, OutputSymbol, Pomdp, StrategyTable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const BUNDLED: [&str; 3] = ["running-example", "running-example-noslip", "grid-avoid-4"];

pub fn model_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(format!("{name}.json"))
}

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn load(name: &str) -> Pomdp {
    parse_model(&std::fs::read_to_string(model_path(name)).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random well-formed model description with at most `max_states` states.
/// Observation `z0` is reserved for the initial state; the target label is
/// the last observation.
pub fn random_model_json(rng: &mut ChaCha8Rng, max_states: usize) -> Value {
    let n = rng.gen_range(2..=max_states);
    let num_obs = rng.gen_range(2..=3.min(n));
    let num_actions = rng.gen_range(1..=3);
    let actions: Vec<String> = (0..num_actions).map(|a| format!("a{a}")).collect();
    let mut obs_of: Vec<usize> = (0..n)
        .map(|s| if s < num_obs { s } else { rng.gen_range(1..num_obs) })
        .collect();
    obs_of[0] = 0;
    let enabled: Vec<Vec<usize>> = (0..num_obs)
        .map(|_| {
            let mut all: Vec<usize> = (0..num_actions).collect();
            all.shuffle(rng);
            let k = rng.gen_range(1..=num_actions);
            let mut chosen = all[..k].to_vec();
            chosen.sort_unstable();
            chosen
        })
        .collect();
    let states: Vec<Value> = (0..n)
        .map(|s| json!({ "id": format!("s{s}"), "observation": format!("z{}", obs_of[s]) }))
        .collect();
    let mut transitions = Vec::new();
    for s in 0..n {
        for &a in &enabled[obs_of[s]] {
            let k = rng.gen_range(1..=3.min(n));
            let mut targets: Vec<usize> = (0..n).collect();
            targets.shuffle(rng);
            let targets = &targets[..k];
            let weights: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
            let total: u32 = weights.iter().sum();
            let mut to = Vec::new();
            let mut acc = 0.0;
            for (i, (&t, &w)) in targets.iter().zip(&weights).enumerate() {
                let p = if i + 1 == k { 1.0 - acc } else { w as f64 / total as f64 };
                acc += p;
                to.push(json!({ "state": format!("s{t}"), "prob": p }));
            }
            transitions.push(json!({ "from": format!("s{s}"), "action": actions[a], "to": to }));
        }
    }
    let mut model = json!({
        "states": states,
        "actions": actions,
        "transitions": transitions,
        "initial": "s0",
        "targets": [format!("z{}", num_obs - 1)],
    });
    if rng.gen_bool(0.3) {
        let mut rewards = Vec::new();
        for s in 0..n {
            for &a in &enabled[obs_of[s]] {
                rewards.push(json!({
                    "state": format!("s{s}"),
                    "action": actions[a],
                    "value": rng.gen_range(0..4) as f64,
                }));
            }
        }
        model["rewards"] = Value::Array(rewards);
    }
    model
}

pub fn random_pomdp(rng: &mut ChaCha8Rng, max_states: usize) -> Pomdp {
    parse_model(&random_model_json(rng, max_states).to_string()).unwrap()
}

/// All realizable observation sequences of length 1 to `max_len`, in shortlex order.
pub fn realizable_sequences(pomdp: &Pomdp, max_len: usize) -> Vec<ObsSeq> {
    let mut out = Vec::new();
    let mut layer: Vec<ObsSeq> = vec![ObsSeq::new(vec![pomdp.observation(pomdp.initial())])];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in layer {
            if !pomdp.is_realizable(&seq) {
                continue;
            }
            for z in 0..pomdp.num_observations() {
                next.push(seq.pushed(z));
            }
            out.push(seq);
        }
        layer = next;
    }
    out
}

/// Every sequence over `num_obs` letters of length 1 to `max_len`.
pub fn all_sequences(num_obs: usize, max_len: usize) -> Vec<ObsSeq> {
    let mut out = Vec::new();
    let mut layer = vec![ObsSeq::empty()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &layer {
            for z in 0..num_obs {
                next.push(seq.pushed(z));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Random outputs on every realizable sequence up to `max_len`; each output
/// is an enabled action of the last observation or, rarely, a `χ`.
pub fn random_complete_table(rng: &mut ChaCha8Rng, pomdp: &Pomdp, max_len: usize) -> StrategyTable {
    let mut table = StrategyTable::new();
    for seq in realizable_sequences(pomdp, max_len) {
        let z = seq.last().unwrap();
        let out = if rng.gen_bool(0.1) {
            OutputSymbol::DontKnow(rng.gen_range(0..2))
        } else {
            let enabled = pomdp.actions_of_observation(z);
            OutputSymbol::action(enabled[rng.gen_range(0..enabled.len())])
        };
        table.insert(seq, out).unwrap();
    }
    table
}

/// States of the minimal Mealy machine computing the table's query function
/// (`†` outside the table), by comparing residuals of every prefix.
pub fn canonical_state_count(table: &StrategyTable, num_obs: usize, max_len: usize) -> usize {
    let tails = all_sequences(num_obs, max_len);
    let mut prefixes = vec![ObsSeq::empty()];
    prefixes.extend(all_sequences(num_obs, max_len));
    let mut keys: HashMap<Vec<fsc_distill::teacher::SymbolKey>, ()> = HashMap::new();
    for u in &prefixes {
        let residual: Vec<_> = tails
            .iter()
            .map(|v| table.output_query(&u.concat(v)).key())
            .collect();
        keys.insert(residual, ());
    }
    keys.len()
}

/// Random total controller; `dont_care` is the probability of a `†` output.
pub fn random_fsc(rng: &mut ChaCha8Rng, nodes: usize, num_obs: usize, num_actions: usize, dont_care: f64) -> Fsc {
    let gamma = (0..nodes)
        .map(|_| {
            (0..num_obs)
                .map(|_| {
                    if rng.gen_bool(dont_care) {
                        OutputSymbol::DontCare
                    } else {
                        OutputSymbol::action(rng.gen_range(0..num_actions))
                    }
                })
                .collect()
        })
        .collect();
    let delta = (0..nodes)
        .map(|_| (0..num_obs).map(|_| rng.gen_range(0..nodes)).collect())
        .collect();
    Fsc::new(num_obs, gamma, delta, 0).unwrap()
}

/// Sequences up to `max_len` on which `before` has a concrete output that
/// `after` does not reproduce.
pub fn concrete_mismatches(before: &Fsc, after: &Fsc, max_len: usize) -> Vec<ObsSeq> {
    all_sequences(before.num_observations(), max_len)
        .into_iter()
        .filter(|seq| {
            let b = before.run(seq).unwrap();
            b.is_concrete() && !after.run(seq).unwrap().matches(b)
        })
        .collect()
}

pub fn targets_of(pomdp: &Pomdp) -> BTreeSet<usize> {
    pomdp.targets().clone()
}
