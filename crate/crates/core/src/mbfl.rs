//! Mutation-based scoring: kill matrices, MUSE and Metallaxis.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minilang::{
    gen_mutants, run_untraced, run_untraced_with_budget, AssertFailure, ExecutionTrace, Outcome, Program, TestSuite,
};
use crate::model::{ProgramElement, ScoredList};
use crate::technique::Technique;

/// How a test's result on a mutant relates to its result on the original.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    Same,
    /// Output differs but pass/fail status does not.
    OutputChanged,
    FailToPass,
    PassToFail,
}

impl OutcomeClass {
    pub fn muse_kill(self) -> bool {
        matches!(self, OutcomeClass::FailToPass | OutcomeClass::PassToFail)
    }

    pub fn metallaxis_kill(self) -> bool {
        self != OutcomeClass::Same
    }
}

/// Observable output of a run. Crash stacks are ignored; crashes compare by kind.
#[derive(PartialEq)]
enum Observed<'a> {
    Pass(Option<&'a crate::minilang::Value>),
    Assert(&'a AssertFailure),
    Crash(crate::minilang::CrashKind),
}

fn observed(trace: &ExecutionTrace) -> Observed<'_> {
    match &trace.outcome {
        Outcome::Pass => Observed::Pass(trace.result.as_ref()),
        Outcome::AssertFail(a) => Observed::Assert(a),
        Outcome::Crash { kind, .. } => Observed::Crash(*kind),
    }
}

pub fn classify(original: &ExecutionTrace, mutant: &ExecutionTrace) -> OutcomeClass {
    match (original.passed(), mutant.passed()) {
        (false, true) => OutcomeClass::FailToPass,
        (true, false) => OutcomeClass::PassToFail,
        _ if observed(original) == observed(mutant) => OutcomeClass::Same,
        _ => OutcomeClass::OutputChanged,
    }
}

/// Executions of every test on one mutant.
#[derive(Clone, Debug)]
pub struct MutantRuns {
    pub id: String,
    pub target: ProgramElement,
    pub traces: Vec<ExecutionTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutantRow {
    pub id: String,
    pub target: ProgramElement,
    pub per_test: BTreeMap<String, OutcomeClass>,
}

impl MutantRow {
    fn count(&self, failing: &BTreeSet<String>, originally_failing: bool, kill: fn(OutcomeClass) -> bool) -> u32 {
        self.per_test
            .iter()
            .filter(|(t, c)| failing.contains(*t) == originally_failing && kill(**c))
            .count() as u32
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MutantOutcomeMatrix {
    rows: Vec<MutantRow>,
    failing: BTreeSet<String>,
}

impl MutantOutcomeMatrix {
    pub fn rows(&self) -> &[MutantRow] {
        &self.rows
    }

    pub fn total_failed(&self) -> u32 {
        self.failing.len() as u32
    }

    /// Failing tests that pass on some mutant, summed over mutants.
    pub fn f2p(&self) -> u32 {
        self.rows.iter().map(|r| self.muse_counts(r).0).sum()
    }

    /// Passing tests that fail on some mutant, summed over mutants.
    pub fn p2f(&self) -> u32 {
        self.rows.iter().map(|r| self.muse_counts(r).1).sum()
    }

    fn muse_counts(&self, row: &MutantRow) -> (u32, u32) {
        (
            row.count(&self.failing, true, OutcomeClass::muse_kill),
            row.count(&self.failing, false, OutcomeClass::muse_kill),
        )
    }

    fn metallaxis_counts(&self, row: &MutantRow) -> (u32, u32) {
        (
            row.count(&self.failing, true, OutcomeClass::metallaxis_kill),
            row.count(&self.failing, false, OutcomeClass::metallaxis_kill),
        )
    }

    /// Per-mutant scores for `technique`, keyed by mutant id.
    pub fn mutant_scores(&self, technique: Technique) -> Vec<(&MutantRow, f64)> {
        let (f2p, p2f, total_failed) = (self.f2p(), self.p2f(), self.total_failed());
        self.rows
            .iter()
            .map(|row| {
                let score = match technique {
                    Technique::Muse => {
                        let (f, p) = self.muse_counts(row);
                        muse_mutant_score(f, p, f2p, p2f)
                    }
                    Technique::Metallaxis => {
                        let (f, p) = self.metallaxis_counts(row);
                        metallaxis_mutant_score(f, p, total_failed)
                    }
                    other => panic!("{other} is not a mutation technique"),
                };
                (row, score)
            })
            .collect()
    }

    /// Statement scores; statements without mutants are left unscored.
    pub fn score(&self, technique: Technique) -> ScoredList {
        let mut per_stmt: BTreeMap<ProgramElement, Vec<f64>> = BTreeMap::new();
        for (row, s) in self.mutant_scores(technique) {
            per_stmt.entry(row.target.clone()).or_default().push(s);
        }
        aggregate_to_statement(technique, &per_stmt)
    }

    pub fn to_json(&self) -> KillMatrixFile {
        KillMatrixFile {
            failing: self.failing.iter().cloned().collect(),
            mutants: self
                .rows
                .iter()
                .map(|r| KillMatrixMutant {
                    id: r.id.clone(),
                    stmt: r.target.to_string(),
                    per_test: r
                        .per_test
                        .iter()
                        .map(|(t, c)| KillMatrixCell {
                            test: t.clone(),
                            class: *c,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(file: &KillMatrixFile) -> Result<Self> {
        let failing: BTreeSet<String> = file.failing.iter().cloned().collect();
        if failing.is_empty() {
            return Err(Error::NoFailedTests);
        }
        let mut rows = Vec::with_capacity(file.mutants.len());
        let mut tests: Option<BTreeSet<String>> = None;
        for m in &file.mutants {
            let mut per_test = BTreeMap::new();
            for cell in &m.per_test {
                let was_failing = failing.contains(&cell.test);
                let consistent = match cell.class {
                    OutcomeClass::FailToPass => was_failing,
                    OutcomeClass::PassToFail => !was_failing,
                    _ => true,
                };
                if !consistent {
                    return Err(Error::InvalidFaultCase(
                        m.id.clone(),
                        format!("class {:?} impossible for test {}", cell.class, cell.test),
                    ));
                }
                per_test.insert(cell.test.clone(), cell.class);
            }
            let these: BTreeSet<String> = per_test.keys().cloned().collect();
            let expected = tests.get_or_insert_with(|| these.clone());
            if let Some(missing) = expected.symmetric_difference(&these).next() {
                return Err(Error::MissingMutantRun {
                    mutant: m.id.clone(),
                    test: missing.clone(),
                });
            }
            rows.push(MutantRow {
                id: m.id.clone(),
                target: m.stmt.parse()?,
                per_test,
            });
        }
        Ok(MutantOutcomeMatrix { rows, failing })
    }
}

/// Classifies every (mutant, test) pair against the original runs.
pub fn build_outcome_matrix(
    original: &[ExecutionTrace],
    mutants: &[MutantRuns],
) -> Result<MutantOutcomeMatrix> {
    let failing: BTreeSet<String> = original
        .iter()
        .filter(|t| !t.passed())
        .map(|t| t.test_id.clone())
        .collect();
    if failing.is_empty() {
        return Err(Error::NoFailedTests);
    }
    let rows = mutants
        .iter()
        .map(|m| {
            let by_test: HashMap<&str, &ExecutionTrace> =
                m.traces.iter().map(|t| (t.test_id.as_str(), t)).collect();
            let per_test = original
                .iter()
                .map(|o| {
                    let mt = by_test.get(o.test_id.as_str()).ok_or_else(|| {
                        Error::MissingMutantRun {
                            mutant: m.id.clone(),
                            test: o.test_id.clone(),
                        }
                    })?;
                    Ok((o.test_id.clone(), classify(o, mt)))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(MutantRow {
                id: m.id.clone(),
                target: m.target.clone(),
                per_test,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MutantOutcomeMatrix { rows, failing })
}

/// A mutant run may take `MUTANT_STEP_FACTOR * original + MUTANT_STEP_SLACK`
/// steps before it is stopped as non-terminating.
pub const MUTANT_STEP_FACTOR: u64 = 10;
pub const MUTANT_STEP_SLACK: u64 = 10_000;

/// Generates every mutant of `program` and runs the suite on each.
///
/// Mutants are executed in parallel; the result order is the generation order.
pub fn run_mutants(program: &Program, suite: &TestSuite) -> Vec<MutantRuns> {
    let budgets: Vec<u64> = suite
        .tests
        .iter()
        .map(|t| run_untraced(program, t).steps * MUTANT_STEP_FACTOR + MUTANT_STEP_SLACK)
        .collect();
    gen_mutants(program)
        .into_par_iter()
        .map(|m| MutantRuns {
            traces: suite
                .tests
                .iter()
                .zip(&budgets)
                .map(|(t, &b)| run_untraced_with_budget(&m.program, t, b))
                .collect(),
            id: m.id,
            target: m.target,
        })
        .collect()
}

/// `failed_m - (f2p / p2f) * passed_m`, with `p2f = 0` treated as 1.
pub fn muse_mutant_score(failed_m: u32, passed_m: u32, f2p: u32, p2f: u32) -> f64 {
    let weight = f64::from(f2p) / f64::from(p2f.max(1));
    f64::from(failed_m) - weight * f64::from(passed_m)
}

/// `failed_m / sqrt(totalfailed * (failed_m + passed_m))`, 0 when `failed_m` is 0.
pub fn metallaxis_mutant_score(failed_m: u32, passed_m: u32, total_failed: u32) -> f64 {
    if failed_m == 0 {
        return 0.0;
    }
    f64::from(failed_m) / (f64::from(total_failed) * f64::from(failed_m + passed_m)).sqrt()
}

/// MUSE averages a statement's mutant scores, Metallaxis takes the maximum.
pub fn aggregate_to_statement(
    technique: Technique,
    per_stmt: &BTreeMap<ProgramElement, Vec<f64>>,
) -> ScoredList {
    let entries = per_stmt
        .iter()
        .map(|(e, scores)| {
            let s = if scores.is_empty() {
                0.0
            } else {
                match technique {
                    Technique::Muse => scores.iter().sum::<f64>() / scores.len() as f64,
                    Technique::Metallaxis => scores.iter().copied().fold(f64::MIN, f64::max),
                    other => panic!("{other} is not a mutation technique"),
                }
            };
            (e.clone(), s)
        })
        .collect();
    ScoredList::new(technique.id(), entries).expect("statements are unique keys")
}

/// `{"failing": [test], "mutants": [{"id", "stmt", "per_test": [{"test", "class"}]}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillMatrixFile {
    /// Tests that fail on the original program.
    pub failing: Vec<String>,
    pub mutants: Vec<KillMatrixMutant>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillMatrixMutant {
    pub id: String,
    pub stmt: String,
    pub per_test: Vec<KillMatrixCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillMatrixCell {
    pub test: String,
    pub class: OutcomeClass,
}
