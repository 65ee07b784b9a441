//! Output symbols, strategy tables and the teachers answering learner queries.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::belief::{BeliefId, BeliefMdp, BeliefStrategy, Choice, NodeKind};
use crate::controller::Fsc;
use crate::model::{ActionId, Distribution, ObsId, ObsSeq, Pomdp, PROB_TOLERANCE};

/// Output letter of a strategy or controller.
///
/// `DontKnow(i)` marks a cut-off belief that should be completed with
/// cut-off strategy `i`; `DontCare` marks an output that never matters.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputSymbol {
    Actions(Distribution),
    DontKnow(usize),
    DontCare,
}

/// Hashable canonical form of an [`OutputSymbol`]; probabilities are rounded
/// to the comparison tolerance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolKey {
    Actions(Vec<(ActionId, i64)>),
    DontKnow(usize),
    DontCare,
}

#[derive(Debug, Error)]
pub enum SymbolError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("malformed output `{0}`")]
    Malformed(String),
}

impl OutputSymbol {
    pub fn action(a: ActionId) -> Self {
        OutputSymbol::Actions(Distribution::dirac(a))
    }

    /// Action distributions and `χ_i` are concrete letters; only `†` is not.
    pub fn is_concrete(&self) -> bool {
        !matches!(self, OutputSymbol::DontCare)
    }

    pub fn as_actions(&self) -> Option<&Distribution> {
        match self {
            OutputSymbol::Actions(d) => Some(d),
            _ => None,
        }
    }

    /// Literal equality, with distributions compared up to the probability tolerance.
    pub fn matches(&self, other: &OutputSymbol) -> bool {
        match (self, other) {
            (OutputSymbol::Actions(a), OutputSymbol::Actions(b)) => a.approx_eq(b, PROB_TOLERANCE),
            (OutputSymbol::DontKnow(i), OutputSymbol::DontKnow(j)) => i == j,
            (OutputSymbol::DontCare, OutputSymbol::DontCare) => true,
            _ => false,
        }
    }

    pub fn key(&self) -> SymbolKey {
        match self {
            OutputSymbol::Actions(d) => SymbolKey::Actions(
                d.iter()
                    .map(|(a, p)| (a, (p / PROB_TOLERANCE).round() as i64))
                    .collect(),
            ),
            OutputSymbol::DontKnow(i) => SymbolKey::DontKnow(*i),
            OutputSymbol::DontCare => SymbolKey::DontCare,
        }
    }

    /// File syntax: an action name, `a1:p1;a2:p2`, `chi:<i>` or `-`.
    pub fn render(&self, pomdp: &Pomdp) -> String {
        match self {
            OutputSymbol::Actions(d) => match d.as_dirac() {
                Some(a) => pomdp.action_name(a).to_string(),
                None => {
                    let mut out = String::new();
                    for (k, (a, p)) in d.iter().enumerate() {
                        if k > 0 {
                            out.push(';');
                        }
                        let _ = write!(out, "{}:{}", pomdp.action_name(a), p);
                    }
                    out
                }
            },
            OutputSymbol::DontKnow(i) => format!("chi:{i}"),
            OutputSymbol::DontCare => "-".to_string(),
        }
    }

    pub fn render_dot(&self, pomdp: &Pomdp) -> String {
        match self {
            OutputSymbol::DontKnow(i) => format!("chi_{i}"),
            _ => self.render(pomdp),
        }
    }

    pub fn parse(text: &str, pomdp: &Pomdp) -> Result<Self, SymbolError> {
        let text = text.trim();
        if text == "-" {
            return Ok(OutputSymbol::DontCare);
        }
        if let Some(i) = text.strip_prefix("chi:") {
            return i
                .trim()
                .parse()
                .map(OutputSymbol::DontKnow)
                .map_err(|_| SymbolError::Malformed(text.to_string()));
        }
        let action = |name: &str| {
            pomdp
                .action_by_name(name.trim())
                .ok_or_else(|| SymbolError::UnknownAction(name.trim().to_string()))
        };
        if !text.contains(':') {
            return Ok(OutputSymbol::action(action(text)?));
        }
        let mut entries = Vec::new();
        for part in text.split(';') {
            let (name, p) = part
                .split_once(':')
                .ok_or_else(|| SymbolError::Malformed(text.to_string()))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| SymbolError::Malformed(text.to_string()))?;
            entries.push((action(name)?, p));
        }
        Distribution::new(entries)
            .map(OutputSymbol::Actions)
            .map_err(|_| SymbolError::Malformed(text.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("conflicting outputs for sequence `{0}`")]
    Inconsistent(String),
    #[error("strategy tables cannot contain `-` (sequence `{0}`)")]
    DontCareRow(String),
    #[error("empty observation sequence")]
    EmptySequence,
    #[error("unknown observation `{0}`")]
    UnknownObservation(String),
    #[error("table line {line}: {source}")]
    Symbol { line: usize, source: SymbolError },
    #[error("malformed table: {0}")]
    Csv(#[from] csv::Error),
    #[error("table must have header `sequence,output`")]
    Header,
}

/// A finite partial map from observation sequences to outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StrategyTable {
    rows: Vec<(ObsSeq, OutputSymbol)>,
    index: HashMap<ObsSeq, usize>,
}

impl StrategyTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a row; re-inserting an equal row is a no-op.
    pub fn insert(&mut self, seq: ObsSeq, out: OutputSymbol) -> Result<(), TableError> {
        if seq.is_empty() {
            return Err(TableError::EmptySequence);
        }
        if !out.is_concrete() {
            return Err(TableError::DontCareRow(format!("{:?}", seq.as_slice())));
        }
        match self.index.get(&seq) {
            Some(&k) if self.rows[k].1.matches(&out) => Ok(()),
            Some(_) => Err(TableError::Inconsistent(format!("{:?}", seq.as_slice()))),
            None => {
                self.index.insert(seq.clone(), self.rows.len());
                self.rows.push((seq, out));
                Ok(())
            }
        }
    }

    pub fn from_rows(
        rows: impl IntoIterator<Item = (ObsSeq, OutputSymbol)>,
    ) -> Result<Self, TableError> {
        let mut table = Self::new();
        for (seq, out) in rows {
            table.insert(seq, out)?;
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[(ObsSeq, OutputSymbol)] {
        &self.rows
    }

    pub fn get(&self, seq: &ObsSeq) -> Option<&OutputSymbol> {
        self.index.get(seq).map(|&k| &self.rows[k].1)
    }

    /// The row's output, or `†` for sequences outside the table.
    pub fn output_query(&self, seq: &ObsSeq) -> OutputSymbol {
        self.get(seq).cloned().unwrap_or(OutputSymbol::DontCare)
    }

    /// Parses a two-column CSV with header `sequence,output`; sequences are
    /// space-separated observation names.
    pub fn from_csv(text: &str, pomdp: &Pomdp) -> Result<Self, TableError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "sequence" || &headers[1] != "output" {
            return Err(TableError::Header);
        }
        let mut table = Self::new();
        for (k, record) in reader.records().enumerate() {
            let record = record?;
            let mut seq = Vec::new();
            for name in record[0].split_whitespace() {
                seq.push(
                    pomdp
                        .observation_by_name(name)
                        .ok_or_else(|| TableError::UnknownObservation(name.to_string()))?,
                );
            }
            let out = OutputSymbol::parse(&record[1], pomdp)
                .map_err(|source| TableError::Symbol { line: k + 2, source })?;
            if !out.is_concrete() {
                return Err(TableError::DontCareRow(record[0].to_string()));
            }
            table.insert(ObsSeq::new(seq), out)?;
        }
        Ok(table)
    }

    pub fn to_csv(&self, pomdp: &Pomdp) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["sequence", "output"])
            .expect("writing to memory");
        for (seq, out) in &self.rows {
            writer
                .write_record([seq.display(pomdp).to_string(), out.render(pomdp)])
                .expect("writing to memory");
        }
        String::from_utf8(writer.into_inner().expect("writing to memory")).expect("utf-8 output")
    }
}

/// Oracle answering output and equivalence queries about a target strategy.
pub trait Teacher {
    fn num_observations(&self) -> usize;

    /// Output of the strategy on the last symbol of `seq`.
    fn output_query(&self, seq: &ObsSeq) -> OutputSymbol;

    /// `None` if `fsc` agrees with the strategy wherever it matters,
    /// otherwise a sequence on which they differ.
    fn equivalence_query(&self, fsc: &Fsc) -> Option<ObsSeq>;
}

/// How `χ` rows are treated by the table equivalence check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DontKnowMode {
    /// `χ_i` must be reproduced literally.
    #[default]
    Strict,
    /// Rows with a `χ` output are not checked.
    Ignore,
}

/// Teacher backed by a [`StrategyTable`]. Only realizable rows are checked.
#[derive(Debug, Clone)]
pub struct TableTeacher<'a> {
    table: &'a StrategyTable,
    num_obs: usize,
    /// Realizable rows in shortlex order.
    checked: Vec<usize>,
    mode: DontKnowMode,
}

impl<'a> TableTeacher<'a> {
    pub fn new(table: &'a StrategyTable, pomdp: &Pomdp) -> Self {
        Self::with_mode(table, pomdp, DontKnowMode::Strict)
    }

    pub fn with_mode(table: &'a StrategyTable, pomdp: &Pomdp, mode: DontKnowMode) -> Self {
        let mut checked: Vec<usize> = (0..table.rows.len())
            .filter(|&k| pomdp.is_realizable(&table.rows[k].0))
            .collect();
        checked.sort_by(|&a, &b| table.rows[a].0.shortlex_cmp(&table.rows[b].0));
        TableTeacher {
            table,
            num_obs: pomdp.num_observations(),
            checked,
            mode,
        }
    }
}

impl Teacher for TableTeacher<'_> {
    fn num_observations(&self) -> usize {
        self.num_obs
    }

    fn output_query(&self, seq: &ObsSeq) -> OutputSymbol {
        self.table.output_query(seq)
    }

    fn equivalence_query(&self, fsc: &Fsc) -> Option<ObsSeq> {
        self.checked.iter().find_map(|&k| {
            let (seq, expected) = &self.table.rows[k];
            if self.mode == DontKnowMode::Ignore && matches!(expected, OutputSymbol::DontKnow(_)) {
                return None;
            }
            let actual = fsc.run(seq)?;
            (!actual.matches(expected)).then(|| seq.clone())
        })
    }
}

/// Teacher backed by a solved belief MDP.
#[derive(Debug, Clone)]
pub struct BeliefTeacher<'a> {
    bmdp: &'a BeliefMdp,
    strategy: &'a BeliefStrategy,
    num_obs: usize,
    /// Shortlex-least sequence of every belief reachable under the strategy.
    representatives: Vec<Option<ObsSeq>>,
}

impl<'a> BeliefTeacher<'a> {
    pub fn new(pomdp: &Pomdp, bmdp: &'a BeliefMdp, strategy: &'a BeliefStrategy) -> Self {
        BeliefTeacher {
            bmdp,
            strategy,
            num_obs: pomdp.num_observations(),
            representatives: bmdp.representatives(Some(strategy)),
        }
    }

    /// Belief reached by following the strategy along `seq`, if any.
    pub fn resolve(&self, seq: &ObsSeq) -> Option<BeliefId> {
        let (&first, rest) = seq.as_slice().split_first()?;
        let mut current = self.bmdp.initial();
        if self.bmdp.node(current).belief.observation() != first {
            return None;
        }
        for &z in rest {
            let Choice::Action(a) = self.strategy.choice(current) else {
                return None;
            };
            current = self.bmdp.successor(current, a, z)?;
        }
        Some(current)
    }

    /// Output the strategy prescribes at belief `b`.
    pub fn output_at(&self, b: BeliefId) -> OutputSymbol {
        match (&self.bmdp.node(b).kind, self.strategy.choice(b)) {
            (NodeKind::Cutoff(i), _) => OutputSymbol::DontKnow(*i),
            (NodeKind::Target, _) => OutputSymbol::DontCare,
            (NodeKind::Explored, Choice::Action(a)) => OutputSymbol::action(a),
            (NodeKind::Explored, _) => OutputSymbol::DontCare,
        }
    }

    /// All non-`†` answers on sequences of length at most `max_len`,
    /// collected into a table.
    pub fn materialize(&self, max_len: usize) -> StrategyTable {
        let mut table = StrategyTable::new();
        let mut queue = VecDeque::new();
        let b0 = self.bmdp.initial();
        queue.push_back((b0, ObsSeq::new(vec![self.bmdp.node(b0).belief.observation()])));
        while let Some((b, seq)) = queue.pop_front() {
            if seq.len() > max_len {
                continue;
            }
            let out = self.output_at(b);
            if out.is_concrete() {
                table.insert(seq.clone(), out).expect("a strategy is functional");
            }
            if let Choice::Action(a) = self.strategy.choice(b) {
                for &(z, _, next) in self.bmdp.successors(b, a) {
                    queue.push_back((next, seq.pushed(z)));
                }
            }
        }
        table
    }
}

impl Teacher for BeliefTeacher<'_> {
    fn num_observations(&self) -> usize {
        self.num_obs
    }

    fn output_query(&self, seq: &ObsSeq) -> OutputSymbol {
        self.resolve(seq)
            .map(|b| self.output_at(b))
            .unwrap_or(OutputSymbol::DontCare)
    }

    fn equivalence_query(&self, fsc: &Fsc) -> Option<ObsSeq> {
        for (b, rep) in self.representatives.iter().enumerate() {
            let Some(rep) = rep else { continue };
            let expected = self.output_at(b);
            if expected.is_concrete() && !fsc.run(rep).is_some_and(|o| o.matches(&expected)) {
                return Some(rep.clone());
            }
        }
        self.product_counterexample(fsc)
    }
}

impl BeliefTeacher<'_> {
    /// Breadth-first search over (belief, controller node) pairs under the
    /// strategy for the first pair whose outputs disagree.
    fn product_counterexample(&self, fsc: &Fsc) -> Option<ObsSeq> {
        let b0 = self.bmdp.initial();
        let mut seen = std::collections::HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert((b0, fsc.initial()));
        queue.push_back((b0, fsc.initial(), ObsSeq::new(vec![self.obs(b0)])));
        while let Some((b, n, seq)) = queue.pop_front() {
            let z = self.obs(b);
            let expected = self.output_at(b);
            if expected.is_concrete() && !fsc.output(n, z).matches(&expected) {
                return Some(seq);
            }
            if let Choice::Action(a) = self.strategy.choice(b) {
                let m = fsc.next(n, z);
                for &(z2, _, next) in self.bmdp.successors(b, a) {
                    if seen.insert((next, m)) {
                        queue.push_back((next, m, seq.pushed(z2)));
                    }
                }
            }
        }
        None
    }

    fn obs(&self, b: BeliefId) -> ObsId {
        self.bmdp.node(b).belief.observation()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    const RUNNING: &str = include_str!("../../../models/running-example.json");
    const TABLE: &str = include_str!("../../../models/running-example-table.csv");

    #[test]
    fn symbol_syntax_round_trip() {
        let p = parse_model(RUNNING).unwrap();
        for text in ["r", "chi:3", "-", "d:0.25;r:0.75"] {
            let sym = OutputSymbol::parse(text, &p).unwrap();
            assert_eq!(sym.render(&p), text);
        }
        assert!(OutputSymbol::parse("jump", &p).is_err());
        assert!(OutputSymbol::parse("d:0.5;r:0.6", &p).is_err());
        assert!(OutputSymbol::parse("chi:x", &p).is_err());
    }

    #[test]
    fn table_parses_and_answers() {
        let p = parse_model(RUNNING).unwrap();
        let t = StrategyTable::from_csv(TABLE, &p).unwrap();
        assert_eq!(t.len(), 3);
        let o = |n: &str| p.observation_by_name(n).unwrap();
        let a = |n: &str| OutputSymbol::action(p.action_by_name(n).unwrap());
        assert_eq!(t.output_query(&ObsSeq::new(vec![o("i")])), a("s"));
        assert_eq!(t.output_query(&ObsSeq::new(vec![o("i"), o("y")])), a("d"));
        assert_eq!(t.output_query(&ObsSeq::new(vec![o("i"), o("b")])), a("r"));
        assert_eq!(t.output_query(&ObsSeq::new(vec![o("i"), o("g")])), OutputSymbol::DontCare);
        assert_eq!(StrategyTable::from_csv(&t.to_csv(&p), &p).unwrap(), t);
    }

    #[test]
    fn table_rejects_conflicts_and_dont_care() {
        let mut t = StrategyTable::new();
        let s = ObsSeq::new(vec![0, 1]);
        t.insert(s.clone(), OutputSymbol::action(1)).unwrap();
        t.insert(s.clone(), OutputSymbol::action(1)).unwrap();
        assert!(matches!(
            t.insert(s.clone(), OutputSymbol::action(2)),
            Err(TableError::Inconsistent(_))
        ));
        assert!(t.insert(ObsSeq::new(vec![0]), OutputSymbol::DontCare).is_err());
        assert!(t.insert(ObsSeq::empty(), OutputSymbol::action(0)).is_err());
    }

    #[test]
    fn table_teacher_reports_shortlex_least_realizable_mismatch() {
        let p = parse_model(RUNNING).unwrap();
        let t = StrategyTable::from_csv(TABLE, &p).unwrap();
        let teacher = TableTeacher::new(&t, &p);
        let f = Fsc::memoryless(vec![OutputSymbol::DontCare; p.num_observations()]);
        let i = p.observation_by_name("i").unwrap();
        assert_eq!(teacher.equivalence_query(&f), Some(ObsSeq::new(vec![i])));
    }

    #[test]
    fn table_teacher_skips_unrealizable_rows() {
        let p = parse_model(RUNNING).unwrap();
        let o = |n: &str| p.observation_by_name(n).unwrap();
        let mut t = StrategyTable::new();
        // `g` is never observed twice in a row from `i`
        t.insert(ObsSeq::new(vec![o("b"), o("g")]), OutputSymbol::action(0)).unwrap();
        let teacher = TableTeacher::new(&t, &p);
        let f = Fsc::memoryless(vec![OutputSymbol::DontCare; p.num_observations()]);
        assert_eq!(teacher.equivalence_query(&f), None);
    }

    #[test]
    fn ignore_mode_skips_dont_know_rows() {
        let p = parse_model(RUNNING).unwrap();
        let i = p.observation_by_name("i").unwrap();
        let t = StrategyTable::from_rows([(ObsSeq::new(vec![i]), OutputSymbol::DontKnow(0))]).unwrap();
        let f = Fsc::memoryless(vec![OutputSymbol::DontCare; p.num_observations()]);
        assert!(TableTeacher::new(&t, &p).equivalence_query(&f).is_some());
        assert!(TableTeacher::with_mode(&t, &p, DontKnowMode::Ignore)
            .equivalence_query(&f)
            .is_none());
    }
}
