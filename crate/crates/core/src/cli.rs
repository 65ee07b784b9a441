//! End-to-end pipeline behind the command-line tool.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::belief::{self, cutoff_strategies, BeliefError, ExploreOptions};
use crate::controller::{apply_base, apply_h1, apply_h2, resolve_dont_care, ControllerError, Fsc};
use crate::evaluator::{self, induce_mc, simulate, DontCarePolicy, Estimate, EvalError};
use crate::learner::{learn_with, LearnError, LearnOptions};
use crate::model::{parse_model, ModelError, Objective, Pomdp};
use crate::teacher::{BeliefTeacher, StrategyTable, TableError, TableTeacher};

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Model(_) => "model",
            Error::Table(_) => "table",
            Error::Belief(_) => "belief",
            Error::Learn(_) => "learn",
            Error::Controller(_) => "controller",
            Error::Eval(_) => "eval",
            Error::Config(_) => "config",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Table,
    Belief,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "table" => Ok(Mode::Table),
            "belief" => Ok(Mode::Belief),
            _ => Err(Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Base,
    H1,
    H2,
    Portfolio,
}

impl Heuristic {
    pub fn as_str(self) -> &'static str {
        match self {
            Heuristic::Base => "base",
            Heuristic::H1 => "h1",
            Heuristic::H2 => "h2",
            Heuristic::Portfolio => "portfolio",
        }
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "base" => Ok(Heuristic::Base),
            "h1" => Ok(Heuristic::H1),
            "h2" => Ok(Heuristic::H2),
            "portfolio" => Ok(Heuristic::Portfolio),
            _ => Err(Error::Config(format!("unknown heuristic `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: PathBuf,
    /// `kind[:labels]`; defaults to `maxprob` on the model targets.
    pub objective: Option<String>,
    pub mode: Mode,
    pub table: Option<PathBuf>,
    pub heuristic: Heuristic,
    pub max_beliefs: usize,
    pub max_depth: usize,
    pub cutoff_strategy: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Monte Carlo episodes; zero disables simulation.
    pub episodes: usize,
    pub horizon: usize,
    pub fsc_out: Option<PathBuf>,
    pub dot_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    /// Include wall-clock timings in the report file.
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: PathBuf::new(),
            objective: None,
            mode: Mode::Belief,
            table: None,
            heuristic: Heuristic::Portfolio,
            max_beliefs: 10_000,
            max_depth: usize::MAX,
            cutoff_strategy: 0,
            tolerance: 1e-8,
            seed: 0,
            episodes: 0,
            horizon: 10_000,
            fsc_out: None,
            dot_out: None,
            report_out: None,
            timings: false,
        }
    }
}

fn serialize_value<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    }
}

fn serialize_ms<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
    match d {
        Some(d) => s.serialize_f64(d.as_secs_f64() * 1000.0),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateReport {
    pub heuristic: Heuristic,
    #[serde(serialize_with = "serialize_value")]
    pub value: f64,
    pub fsc_nodes: usize,
    pub mc_states: usize,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "serialize_ms")]
    pub wall_time_ms: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningReport {
    pub rounds: usize,
    pub output_queries: usize,
    pub hypothesis_nodes: usize,
    pub minimized_nodes: usize,
    pub has_dont_know: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefReport {
    pub beliefs: usize,
    pub explored: usize,
    pub cutoffs: usize,
    pub strategy_beliefs: usize,
    #[serde(serialize_with = "serialize_value")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub objective: String,
    pub mode: Mode,
    pub heuristic: Heuristic,
    pub chosen: Heuristic,
    #[serde(serialize_with = "serialize_value")]
    pub value: f64,
    pub fsc_nodes: usize,
    pub mc_states: usize,
    pub learning: LearningReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub belief: Option<BeliefReport>,
    pub candidates: Vec<CandidateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "serialize_ms")]
    pub wall_time_ms: Option<Duration>,
}

impl RunReport {
    /// Plain-text summary table, including timings.
    pub fn render_table(&self, total: Duration) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>14} {:>6} {:>9} {:>10}", "heuristic", "value", "nodes", "mc", "ms");
        for c in &self.candidates {
            let marker = if c.heuristic == self.chosen { "*" } else { "" };
            let _ = writeln!(
                out,
                "{:<10} {:>14} {:>6} {:>9} {:>10.2}",
                format!("{}{}", c.heuristic.as_str(), marker),
                format_value(c.value),
                c.fsc_nodes,
                c.mc_states,
                c.wall_time_ms.map_or(0.0, |d| d.as_secs_f64() * 1000.0),
            );
        }
        let _ = writeln!(out, "total {:.2} ms", total.as_secs_f64() * 1000.0);
        out
    }
}

fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "inf".to_string()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    /// Chosen controller with every `†` resolved.
    pub fsc: Fsc,
    pub pomdp: Pomdp,
    pub wall_time: Duration,
}

/// Loads the model and strategy, learns a controller, completes and
/// evaluates it, and writes the requested output files.
pub fn run(config: &RunConfig) -> Result<RunOutcome, Error> {
    let start = Instant::now();
    let pomdp = parse_model(&read(&config.model)?)?;
    let objective = match &config.objective {
        Some(query) => Objective::parse(query, &pomdp)?,
        None => Objective::parse("maxprob", &pomdp)?,
    };
    let cutoffs = cutoff_strategies(&pomdp);
    if !cutoffs.iter().any(|c| c.id == config.cutoff_strategy) {
        return Err(Error::Config(format!(
            "no cut-off strategy with id {}",
            config.cutoff_strategy
        )));
    }

    let (learned, belief_report) = match config.mode {
        Mode::Table => {
            let path = config
                .table
                .as_ref()
                .ok_or_else(|| Error::Config("table mode needs --table".into()))?;
            let table = StrategyTable::from_csv(&read(path)?, &pomdp)?;
            let teacher = TableTeacher::new(&table, &pomdp);
            (learn_with(&teacher, &LearnOptions::default())?, None)
        }
        Mode::Belief => {
            let opts = ExploreOptions {
                max_beliefs: config.max_beliefs,
                max_depth: config.max_depth,
                cutoff_strategy: config.cutoff_strategy,
            };
            let bmdp = belief::explore(&pomdp, &objective, &opts)?;
            let solve_opts = belief::SolveOptions {
                tolerance: config.tolerance,
                ..Default::default()
            };
            let strategy = belief::solve(&pomdp, &bmdp, &objective, &cutoffs, &solve_opts)?;
            log::info!(
                "belief MDP: {} beliefs, {} cut-offs, value {}",
                bmdp.len(),
                bmdp.num_cutoffs(),
                strategy.value()
            );
            let report = BeliefReport {
                beliefs: bmdp.len(),
                explored: bmdp.num_explored(),
                cutoffs: bmdp.num_cutoffs(),
                strategy_beliefs: bmdp.strategy_reachable(&strategy).len(),
                value: strategy.value(),
            };
            let teacher = BeliefTeacher::new(&pomdp, &bmdp, &strategy);
            (learn_with(&teacher, &LearnOptions::default())?, Some(report))
        }
    };

    let heuristics: &[Heuristic] = match config.heuristic {
        Heuristic::Portfolio => &[Heuristic::Base, Heuristic::H1, Heuristic::H2],
        Heuristic::Base => &[Heuristic::Base],
        Heuristic::H1 => &[Heuristic::H1],
        Heuristic::H2 => &[Heuristic::H2],
    };
    let mut candidates = Vec::new();
    let mut best: Option<(usize, Fsc, usize)> = None;
    for &h in heuristics {
        let t0 = Instant::now();
        let completed = match h {
            Heuristic::Base => apply_base(&learned.fsc, &cutoffs)?,
            Heuristic::H1 => apply_base(&apply_h1(&learned.fsc), &cutoffs)?,
            Heuristic::H2 => apply_h2(&learned.fsc),
            Heuristic::Portfolio => unreachable!("expanded above"),
        };
        let resolved = resolve_dont_care(&completed, &pomdp);
        let mc = induce_mc(&pomdp, &resolved, &objective.targets, DontCarePolicy::Reject)?;
        let report = evaluator::value(&mc, &objective)?;
        candidates.push(CandidateReport {
            heuristic: h,
            value: report.value,
            fsc_nodes: resolved.num_nodes(),
            mc_states: report.mc_states,
            wall_time_ms: Some(t0.elapsed()),
        });
        let k = candidates.len() - 1;
        let better = match &best {
            None => true,
            Some((b, _, _)) => {
                let (cur, new) = (&candidates[*b], &candidates[k]);
                objective.kind.better(new.value, cur.value)
                    || (new.value == cur.value && new.fsc_nodes < cur.fsc_nodes)
            }
        };
        if better {
            best = Some((k, resolved, mc.len()));
        }
    }
    let (chosen_index, fsc, mc_states) = best.expect("at least one heuristic");
    let chosen = candidates[chosen_index].clone();

    let simulation = (config.episodes > 0).then(|| {
        let mc = induce_mc(&pomdp, &fsc, &objective.targets, DontCarePolicy::Reject)
            .expect("chosen controller was evaluated");
        simulate(&mc, config.seed, config.episodes, config.horizon)
    });

    let wall_time = start.elapsed();
    let mut report = RunReport {
        objective: objective.label.clone(),
        mode: config.mode,
        heuristic: config.heuristic,
        chosen: chosen.heuristic,
        value: chosen.value,
        fsc_nodes: fsc.num_nodes(),
        mc_states,
        learning: LearningReport {
            rounds: learned.rounds,
            output_queries: learned.output_queries,
            hypothesis_nodes: learned.hypothesis.num_nodes(),
            minimized_nodes: learned.fsc.num_nodes(),
            has_dont_know: learned.fsc.has_dont_know(),
        },
        belief: belief_report,
        candidates,
        simulation,
        wall_time_ms: Some(wall_time),
    };
    let file_report = if config.timings {
        report.clone()
    } else {
        let mut r = report.clone();
        r.wall_time_ms = None;
        for c in &mut r.candidates {
            c.wall_time_ms = None;
        }
        r
    };
    if let Some(path) = &config.fsc_out {
        write(path, &fsc.to_json(&pomdp))?;
    }
    if let Some(path) = &config.dot_out {
        write(path, &fsc.to_dot(&pomdp))?;
    }
    if let Some(path) = &config.report_out {
        let text = serde_json::to_string_pretty(&file_report).expect("report serialization");
        write(path, &text)?;
    }
    report.wall_time_ms = Some(wall_time);
    Ok(RunOutcome {
        report,
        fsc,
        pomdp,
        wall_time,
    })
}

/// Evaluates a stored controller file on a model.
pub fn evaluate_file(
    model: &Path,
    fsc_path: &Path,
    objective: Option<&str>,
) -> Result<evaluator::ValueReport, Error> {
    let pomdp = parse_model(&read(model)?)?;
    let objective = Objective::parse(objective.unwrap_or("maxprob"), &pomdp)?;
    let fsc = Fsc::from_json(&read(fsc_path)?, &pomdp)?;
    let mc = induce_mc(&pomdp, &fsc, &objective.targets, DontCarePolicy::FirstEnabled)?;
    Ok(evaluator::value(&mc, &objective)?)
}
