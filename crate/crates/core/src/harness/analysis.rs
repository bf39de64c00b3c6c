//! Runs the localization families on one corpus fault.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use crate::combiner::FaultScores;
use crate::error::{Error, Result};
use crate::ir_history::{history_rank_files, ir_rank_files, propagate_file_scores};
use crate::mbfl::{build_outcome_matrix, run_mutants};
use crate::minilang::{run_suite, ExecutionTrace};
use crate::model::{AuxInputs, FaultCase, ProgramElement, ScoredList, TestRecord};
use crate::predswitch::critical_predicates_for_suite;
use crate::sbfl::build_spectrum;
use crate::slicing::{combine_slices, failure_slice, SliceStrategy};
use crate::stacktrace::score_stack_traces;
use crate::technique::{Family, Technique};

use super::corpus::CorpusFault;
use super::ingest::ScoreRecord;

/// Scores of one fault together with the wall-clock each family took.
#[derive(Clone, Debug)]
pub struct FaultAnalysis {
    pub case: FaultCase,
    pub scores: BTreeMap<String, ScoredList>,
    pub timing: BTreeMap<Family, Duration>,
}

impl FaultAnalysis {
    pub fn into_scores(self) -> (FaultScores, BTreeMap<Family, Duration>) {
        let f = FaultScores {
            id: self.case.id.clone(),
            project: self.case.project.clone(),
            universe: self.case.elements.clone(),
            faulty: self.case.faulty.clone(),
            scores: self.scores,
        };
        (f, self.timing)
    }
}

fn needs_traces(f: Family) -> bool {
    matches!(
        f,
        Family::Sbfl | Family::Slicing | Family::StackTrace | Family::Mbfl | Family::PredicateSwitching
    )
}

/// Lists the inputs `families` need that `fault` does not provide.
pub fn missing_inputs(fault: &CorpusFault, families: &[Family]) -> Vec<String> {
    let dir = fault.dir.display();
    let mut missing = BTreeSet::new();
    for f in families {
        if needs_traces(*f) {
            if !fault.has_program() {
                missing.insert(format!("{dir}/*.ml"));
            }
            if fault.suite.is_none() {
                missing.insert(format!("{dir}/tests.json"));
            }
        }
        match f {
            Family::IrBased if fault.report.is_none() => {
                missing.insert(format!("{dir}/report.txt"));
            }
            Family::HistoryBased if fault.history.is_none() => {
                missing.insert(format!("{dir}/history.json"));
            }
            Family::IrBased | Family::HistoryBased if !fault.has_program() => {
                missing.insert(format!("{dir}/*.ml"));
            }
            _ => {}
        }
    }
    missing.into_iter().collect()
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}

/// Executes `families` on a fault that ships its program.
///
/// The shared test-suite run is charged to every execution-based family, so
/// each family's time is what it would cost on its own.
pub fn analyze_fault(fault: &CorpusFault, families: &[Family]) -> Result<FaultAnalysis> {
    let run = score_families(fault, families)?;
    let faulty = fault.ground_truth(&run.elements)?;
    let case = FaultCase::new(
        fault.id.clone(),
        fault.project.clone(),
        run.elements,
        faulty,
        run.tests,
        AuxInputs {
            bug_report: fault.report.as_ref().map(|r| r.text().to_string()),
            history: fault.history.clone(),
        },
    )?;
    Ok(FaultAnalysis {
        case,
        scores: run.scores,
        timing: run.timing,
    })
}

struct FamilyRun {
    elements: Vec<ProgramElement>,
    tests: Vec<TestRecord>,
    scores: BTreeMap<String, ScoredList>,
    timing: BTreeMap<Family, Duration>,
}

/// Runs `families` without consulting the ground truth.
fn score_families(fault: &CorpusFault, families: &[Family]) -> Result<FamilyRun> {
    let missing = missing_inputs(fault, families);
    if !missing.is_empty() {
        return Err(Error::MissingInputs(missing));
    }
    let program = fault.program()?;
    let elements = program.elements();
    let mut timing: BTreeMap<Family, Duration> = BTreeMap::new();
    let mut scores = BTreeMap::new();
    let mut put = |s: ScoredList| {
        scores.insert(s.technique().to_string(), s);
    };

    let mut traces: Vec<ExecutionTrace> = Vec::new();
    let mut trace_time = Duration::ZERO;
    let tests: Vec<TestRecord> = match &fault.suite {
        Some(suite) => {
            suite.validate(&program)?;
            traces = timed(&mut trace_time, || run_suite(&program, suite));
            traces
                .iter()
                .map(|t| TestRecord {
                    id: t.test_id.clone(),
                    passed: t.passed(),
                })
                .collect()
        }
        None => Vec::new(),
    };

    for &family in families {
        let slot = timing.entry(family).or_default();
        if needs_traces(family) {
            *slot += trace_time;
        }
        match family {
            Family::Sbfl => timed(slot, || -> Result<()> {
                let spectrum = build_spectrum(&traces, &elements)?;
                put(spectrum.score(Technique::Ochiai));
                put(spectrum.score(Technique::DStar));
                Ok(())
            })?,
            Family::Slicing => timed(slot, || {
                let slices: Vec<_> = traces.iter().filter_map(failure_slice).collect();
                for s in [SliceStrategy::Union, SliceStrategy::Intersection, SliceStrategy::Frequency] {
                    put(combine_slices(&slices, s));
                }
            }),
            Family::StackTrace => timed(slot, || put(score_stack_traces(&traces, &elements))),
            Family::PredicateSwitching => timed(slot, || {
                let suite = fault.suite.as_ref().expect("checked above");
                let failing = suite
                    .tests
                    .iter()
                    .zip(&traces)
                    .filter(|(_, tr)| !tr.passed())
                    .map(|(t, _)| t);
                put(critical_predicates_for_suite(&program, failing).to_scored());
            }),
            Family::Mbfl => timed(slot, || -> Result<()> {
                let suite = fault.suite.as_ref().expect("checked above");
                let runs = run_mutants(&program, suite);
                let matrix = build_outcome_matrix(&traces, &runs)?;
                put(matrix.score(Technique::Metallaxis));
                put(matrix.score(Technique::Muse));
                Ok(())
            })?,
            Family::IrBased => timed(slot, || {
                let report = fault.report.as_ref().expect("checked above");
                let files: BTreeMap<String, String> = fault.sources.iter().cloned().collect();
                put(propagate_file_scores(&ir_rank_files(report, &files), &elements));
            }),
            Family::HistoryBased => timed(slot, || {
                let log = fault.history.as_ref().expect("checked above");
                let now = log.latest().unwrap_or(0);
                put(propagate_file_scores(&history_rank_files(log, now), &elements));
            }),
        }
    }

    Ok(FamilyRun {
        elements,
        tests,
        scores,
        timing,
    })
}

/// Families needed to produce `techniques`, in family order.
pub fn families_of(techniques: &[Technique]) -> Vec<Family> {
    let set: BTreeSet<Family> = techniques.iter().map(|t| t.family()).collect();
    set.into_iter().collect()
}

/// Scores one fault with `techniques`, in the order given.
pub fn localize(fault: &CorpusFault, techniques: &[Technique]) -> Result<Vec<ScoredList>> {
    let run = score_families(fault, &families_of(techniques))?;
    Ok(techniques.iter().map(|t| run.scores[t.id()].clone()).collect())
}

/// Techniques whose inputs `fault` provides.
pub fn available_techniques(fault: &CorpusFault) -> Vec<Technique> {
    Technique::ALL
        .iter()
        .copied()
        .filter(|t| missing_inputs(fault, &[t.family()]).is_empty())
        .collect()
}

/// Builds fault data from precomputed records only. The universe is every
/// element any record mentions plus the ground truth.
pub fn scores_from_records(fault: &CorpusFault, records: &[&ScoreRecord]) -> Result<FaultScores> {
    let mut universe: BTreeSet<ProgramElement> = BTreeSet::new();
    for r in records {
        universe.extend(r.scores.entries().iter().map(|(e, _)| e.clone()));
    }
    let known: Vec<ProgramElement> = universe.iter().cloned().collect();
    let faulty = fault.ground_truth(&known)?;
    universe.extend(faulty.iter().cloned());
    Ok(FaultScores {
        id: fault.id.clone(),
        project: fault.project.clone(),
        universe: universe.into_iter().collect(),
        faulty,
        scores: records
            .iter()
            .map(|r| (r.technique.clone(), r.scores.clone()))
            .collect(),
    })
}
