//! Learning small finite-state controllers for POMDP strategies.
//!
//! A strategy is given either as a table from observation sequences to
//! actions or as the optimal strategy of a bounded belief-MDP exploration.
//! An active learner builds a controller that reproduces it, cut-off
//! beliefs are completed by one of three heuristics, and the result is
//! evaluated exactly on the Markov chain it induces.

pub mod belief;
pub mod cli;
pub mod controller;
pub mod evaluator;
pub mod learner;
pub mod linalg;
pub mod model;
pub mod teacher;

pub use belief::{
    belief_update, cutoff_strategies, explore, solve, Belief, BeliefError, BeliefMdp,
    BeliefStrategy, Choice, CutoffStrategy, ExploreOptions, NodeKind,
};
pub use cli::{run, Error, Heuristic, Mode, RunConfig, RunOutcome, RunReport};
pub use controller::{
    apply_base, apply_h1, apply_h2, resolve_dont_care, ControllerError, Fsc, NodeId,
};
pub use evaluator::{
    induce_mc, simulate, value, DontCarePolicy, Estimate, EvalError, InducedMc, ValueReport,
};
pub use learner::{learn, learn_with, minimize, LearnError, Learned, LearningTable};
pub use model::{
    parse_model, Distribution, ModelError, Objective, ObjectiveKind, ObsSeq, Path, Pomdp,
};
pub use teacher::{
    BeliefTeacher, DontKnowMode, OutputSymbol, StrategyTable, TableError, TableTeacher, Teacher,
};
