//! Active learning of Mealy-style controllers from a [`Teacher`].
//!
//! `†` and every `χ_i` are ordinary output letters here; only
//! [`minimize`] treats `†` as a wildcard.

mod minimize;

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::controller::{ControllerError, Fsc};
use crate::model::{ObsId, ObsSeq};
use crate::teacher::{OutputSymbol, SymbolKey, Teacher};

pub use minimize::{minimize, minimize_exhaustive};

pub type SymbolId = usize;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("learning table is not closed and consistent")]
    NotClosedOrConsistent,
    #[error("no equivalent hypothesis after {0} rounds")]
    RoundLimit(usize),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

#[derive(Debug, Clone, Default)]
struct SymbolTable {
    ids: HashMap<SymbolKey, SymbolId>,
    symbols: Vec<OutputSymbol>,
}

impl SymbolTable {
    fn intern(&mut self, symbol: OutputSymbol) -> SymbolId {
        let next = self.symbols.len();
        let id = *self.ids.entry(symbol.key()).or_insert(next);
        if id == next {
            self.symbols.push(symbol);
        }
        id
    }
}

/// Outcome of a closedness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Closedness {
    Closed,
    /// One lower row per row class missing from the upper part.
    Open(Vec<ObsSeq>),
}

/// Outcome of a consistency check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    /// Equivalent upper rows `r1`, `r2` whose `z`-extensions differ on `column`.
    Inconsistent {
        r1: ObsSeq,
        r2: ObsSeq,
        z: ObsId,
        column: ObsSeq,
    },
}

/// Observation table `(R, C, T)` with `R` prefix-closed and `C` suffix-closed
/// and non-empty.
#[derive(Debug, Clone)]
pub struct LearningTable {
    num_obs: usize,
    upper: Vec<ObsSeq>,
    upper_set: HashSet<ObsSeq>,
    columns: Vec<ObsSeq>,
    column_set: HashSet<ObsSeq>,
    /// Row signatures for every sequence in `R ∪ R·Z`.
    rows: HashMap<ObsSeq, Vec<SymbolId>>,
    cache: HashMap<ObsSeq, SymbolId>,
    symbols: SymbolTable,
}

impl LearningTable {
    /// `R = {ε}`, `C = Z`.
    pub fn init(teacher: &impl Teacher) -> Self {
        let num_obs = teacher.num_observations();
        let mut table = LearningTable {
            num_obs,
            upper: Vec::new(),
            upper_set: HashSet::new(),
            columns: Vec::new(),
            column_set: HashSet::new(),
            rows: HashMap::new(),
            cache: HashMap::new(),
            symbols: SymbolTable::default(),
        };
        table.add_columns((0..num_obs).map(|z| ObsSeq::new(vec![z])), teacher);
        table.promote(ObsSeq::empty(), teacher);
        table
    }

    pub fn upper_rows(&self) -> &[ObsSeq] {
        &self.upper
    }

    pub fn columns(&self) -> &[ObsSeq] {
        &self.columns
    }

    /// Extensions `r·z` of upper rows that are not upper rows, in order.
    pub fn lower_rows(&self) -> Vec<ObsSeq> {
        let mut seen = HashSet::new();
        let mut lower = Vec::new();
        for r in &self.upper {
            for z in 0..self.num_obs {
                let ext = r.pushed(z);
                if !self.upper_set.contains(&ext) && seen.insert(ext.clone()) {
                    lower.push(ext);
                }
            }
        }
        lower
    }

    /// Number of distinct row classes among upper rows.
    pub fn num_classes(&self) -> usize {
        self.upper
            .iter()
            .map(|r| self.row(r))
            .collect::<HashSet<_>>()
            .len()
    }

    /// Number of distinct sequences asked to the teacher.
    pub fn num_queries(&self) -> usize {
        self.cache.len()
    }

    pub fn entry(&self, row: &ObsSeq, column: &ObsSeq) -> &OutputSymbol {
        let k = self
            .columns
            .iter()
            .position(|c| c == column)
            .expect("column of the table");
        &self.symbols.symbols[self.row(row)[k]]
    }

    fn row(&self, seq: &ObsSeq) -> &[SymbolId] {
        &self.rows[seq]
    }

    fn query(&mut self, seq: ObsSeq, teacher: &impl Teacher) -> SymbolId {
        if let Some(&id) = self.cache.get(&seq) {
            return id;
        }
        let id = self.symbols.intern(teacher.output_query(&seq));
        self.cache.insert(seq, id);
        id
    }

    fn fill_row(&mut self, seq: &ObsSeq, teacher: &impl Teacher) {
        let have = self.rows.get(seq).map_or(0, Vec::len);
        let missing: Vec<ObsSeq> = self.columns[have..].iter().map(|c| seq.concat(c)).collect();
        let ids: Vec<SymbolId> = missing.into_iter().map(|q| self.query(q, teacher)).collect();
        self.rows.entry(seq.clone()).or_default().extend(ids);
    }

    /// Adds `seq` to `R`; its prefixes must already be upper rows.
    fn promote(&mut self, seq: ObsSeq, teacher: &impl Teacher) {
        if !self.upper_set.insert(seq.clone()) {
            return;
        }
        self.fill_row(&seq, teacher);
        for z in 0..self.num_obs {
            self.fill_row(&seq.pushed(z), teacher);
        }
        self.upper.push(seq);
    }

    fn add_columns(&mut self, new: impl IntoIterator<Item = ObsSeq>, teacher: &impl Teacher) {
        let mut added = false;
        for c in new {
            if !c.is_empty() && self.column_set.insert(c.clone()) {
                self.columns.push(c);
                added = true;
            }
        }
        if added {
            let keys: Vec<ObsSeq> = self.rows.keys().cloned().collect();
            for k in keys {
                self.fill_row(&k, teacher);
            }
        }
    }

    pub fn is_closed(&self) -> Closedness {
        let mut known: HashSet<&[SymbolId]> = self.upper.iter().map(|r| self.row(r)).collect();
        let mut witnesses = Vec::new();
        for lower in self.lower_rows() {
            let sig = self.row(&lower);
            if known.insert(sig) {
                witnesses.push(lower);
            }
        }
        if witnesses.is_empty() {
            Closedness::Closed
        } else {
            Closedness::Open(witnesses)
        }
    }

    pub fn is_consistent(&self) -> Consistency {
        let mut first_of: HashMap<&[SymbolId], &ObsSeq> = HashMap::new();
        for r2 in &self.upper {
            let Some(&r1) = first_of.get(self.row(r2)) else {
                first_of.insert(self.row(r2), r2);
                continue;
            };
            for z in 0..self.num_obs {
                let (a, b) = (self.row(&r1.pushed(z)), self.row(&r2.pushed(z)));
                if let Some(k) = (0..a.len()).find(|&k| a[k] != b[k]) {
                    return Consistency::Inconsistent {
                        r1: r1.clone(),
                        r2: r2.clone(),
                        z,
                        column: self.columns[k].clone(),
                    };
                }
            }
        }
        Consistency::Consistent
    }

    pub fn make_closed_and_consistent(&mut self, teacher: &impl Teacher) {
        loop {
            if let Closedness::Open(witnesses) = self.is_closed() {
                for w in witnesses {
                    self.promote(w, teacher);
                }
                continue;
            }
            if let Consistency::Inconsistent { z, column, .. } = self.is_consistent() {
                let mut c = vec![z];
                c.extend_from_slice(column.as_slice());
                self.add_columns([ObsSeq::new(c)], teacher);
                continue;
            }
            return;
        }
    }

    /// Adds every non-empty suffix of the counterexample to `C`.
    pub fn process_counterexample(&mut self, counterexample: &ObsSeq, teacher: &impl Teacher) {
        self.add_columns(counterexample.suffixes(), teacher);
    }

    /// Hypothesis with one node per row class; outputs come from the
    /// single-letter columns.
    pub fn extract_fsc(&self) -> Result<Fsc, LearnError> {
        if self.is_closed() != Closedness::Closed || self.is_consistent() != Consistency::Consistent {
            return Err(LearnError::NotClosedOrConsistent);
        }
        let mut class_of: HashMap<&[SymbolId], usize> = HashMap::new();
        let mut reps: Vec<&ObsSeq> = Vec::new();
        for r in &self.upper {
            class_of.entry(self.row(r)).or_insert_with(|| {
                reps.push(r);
                reps.len() - 1
            });
        }
        let single: Vec<usize> = (0..self.num_obs)
            .map(|z| {
                self.columns
                    .iter()
                    .position(|c| c.as_slice() == [z])
                    .expect("single-letter columns are always present")
            })
            .collect();
        let mut gamma = Vec::with_capacity(reps.len());
        let mut delta = Vec::with_capacity(reps.len());
        for r in &reps {
            let sig = self.row(r);
            gamma.push(
                (0..self.num_obs)
                    .map(|z| self.symbols.symbols[sig[single[z]]].clone())
                    .collect(),
            );
            delta.push(
                (0..self.num_obs)
                    .map(|z| class_of[self.row(&r.pushed(z))])
                    .collect(),
            );
        }
        let initial = class_of[self.row(&ObsSeq::empty())];
        Ok(Fsc::new(self.num_obs, gamma, delta, initial)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOptions {
    pub max_rounds: usize,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions { max_rounds: 100_000 }
    }
}

/// Result of a learning run.
#[derive(Debug, Clone)]
pub struct Learned {
    /// Minimized final hypothesis.
    pub fsc: Fsc,
    /// Final hypothesis before minimization.
    pub hypothesis: Fsc,
    /// Number of counterexamples processed.
    pub rounds: usize,
    pub output_queries: usize,
    pub upper_rows: usize,
    pub columns: usize,
}

/// Learns a controller that the teacher accepts, then minimizes it.
pub fn learn(teacher: &impl Teacher) -> Result<Fsc, LearnError> {
    learn_with(teacher, &LearnOptions::default()).map(|l| l.fsc)
}

pub fn learn_with(teacher: &impl Teacher, opts: &LearnOptions) -> Result<Learned, LearnError> {
    let mut table = LearningTable::init(teacher);
    table.make_closed_and_consistent(teacher);
    let mut rounds = 0;
    loop {
        let hypothesis = table.extract_fsc()?;
        match teacher.equivalence_query(&hypothesis) {
            None => {
                log::debug!(
                    "learning finished after {rounds} rounds with {} nodes",
                    hypothesis.num_nodes()
                );
                return Ok(Learned {
                    fsc: minimize(&hypothesis),
                    hypothesis,
                    rounds,
                    output_queries: table.num_queries(),
                    upper_rows: table.upper.len(),
                    columns: table.columns.len(),
                });
            }
            Some(counterexample) => {
                rounds += 1;
                if rounds > opts.max_rounds {
                    return Err(LearnError::RoundLimit(opts.max_rounds));
                }
                log::trace!("counterexample {:?}", counterexample.as_slice());
                table.process_counterexample(&counterexample, teacher);
                table.make_closed_and_consistent(teacher);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use crate::teacher::{StrategyTable, TableTeacher};

    const RUNNING: &str = include_str!("../../../../models/running-example.json");
    const TABLE: &str = include_str!("../../../../models/running-example-table.csv");

    #[test]
    fn table_initial_table_and_result() {
        let p = parse_model(RUNNING).unwrap();
        let t = StrategyTable::from_csv(TABLE, &p).unwrap();
        let teacher = TableTeacher::new(&t, &p);
        let table = LearningTable::init(&teacher);
        assert_eq!(table.upper_rows(), &[ObsSeq::empty()]);
        assert_eq!(table.columns().len(), p.num_observations());
        let i = p.observation_by_name("i").unwrap();
        let s = p.action_by_name("s").unwrap();
        assert_eq!(table.entry(&ObsSeq::empty(), &ObsSeq::new(vec![i])), &OutputSymbol::action(s));

        let learned = learn_with(&teacher, &LearnOptions::default()).unwrap();
        assert!(learned.fsc.num_nodes() <= 2);
        for (seq, out) in t.rows() {
            assert_eq!(learned.fsc.run(seq).unwrap(), out);
            assert_eq!(learned.hypothesis.run(seq).unwrap(), out);
        }
    }

    #[test]
    fn open_table_lists_one_witness_per_class() {
        let p = parse_model(RUNNING).unwrap();
        let t = StrategyTable::from_csv(TABLE, &p).unwrap();
        let teacher = TableTeacher::new(&t, &p);
        let table = LearningTable::init(&teacher);
        match table.is_closed() {
            Closedness::Open(w) => {
                // `i` starts the table rows; `b`, `y` and `g` rows are all `†`
                let i = p.observation_by_name("i").unwrap();
                let b = p.observation_by_name("b").unwrap();
                assert_eq!(w, vec![ObsSeq::new(vec![i]), ObsSeq::new(vec![b])]);
            }
            Closedness::Closed => panic!("initial table should be open"),
        }
        assert!(matches!(table.extract_fsc(), Err(LearnError::NotClosedOrConsistent)));
    }

    #[test]
    fn counterexample_adds_all_suffixes() {
        let p = parse_model(RUNNING).unwrap();
        let t = StrategyTable::from_csv(TABLE, &p).unwrap();
        let teacher = TableTeacher::new(&t, &p);
        let mut table = LearningTable::init(&teacher);
        let before = table.num_classes();
        let c = ObsSeq::new(vec![0, 1, 2]);
        table.process_counterexample(&c, &teacher);
        for s in c.suffixes() {
            assert!(table.columns().contains(&s));
        }
        assert!(table.num_classes() >= before);
    }
}
