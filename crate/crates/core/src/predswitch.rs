//! Critical predicates: branch outcomes whose single forced switch makes a
//! failing run pass.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::minilang::{run, run_with_flip_untraced, FlipOutcome, Program, TestCase};
use crate::model::{ProgramElement, ScoredList};
use crate::technique::Technique;

/// Maximum number of dynamic predicate instances switched per failing test.
pub const INSTANCE_CAP: usize = 10_000;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CriticalPredicates {
    pub elements: BTreeSet<ProgramElement>,
    /// Number of switched re-executions performed.
    pub reexecutions: usize,
}

impl CriticalPredicates {
    pub fn to_scored(&self) -> ScoredList {
        let entries = self.elements.iter().map(|e| (e.clone(), 1.0)).collect();
        ScoredList::new(Technique::PredicateSwitching.id(), entries).expect("set members")
    }
}

/// Switches each dynamic predicate instance of `test`'s run, one at a time,
/// in execution order. A passing test yields an empty result.
pub fn find_critical_predicates(program: &Program, test: &TestCase) -> CriticalPredicates {
    let original = run(program, test);
    if original.passed() {
        return CriticalPredicates::default();
    }
    let instances: Vec<_> = original
        .predicate_instances
        .iter()
        .take(INSTANCE_CAP)
        .map(|pi| (pi.pred, pi.occurrence))
        .collect();
    let critical: Vec<Option<ProgramElement>> = instances
        .par_iter()
        .map(|&(pred, occurrence)| match run_with_flip_untraced(program, test, pred, occurrence) {
            FlipOutcome::Flipped(t) if t.passed() => program.predicate_element(pred),
            _ => None,
        })
        .collect();
    CriticalPredicates {
        elements: critical.into_iter().flatten().collect(),
        reexecutions: instances.len(),
    }
}

/// Union of the critical sets of every failing test.
pub fn critical_predicates_for_suite<'a>(
    program: &Program,
    failing: impl IntoIterator<Item = &'a TestCase>,
) -> CriticalPredicates {
    let mut all = CriticalPredicates::default();
    for t in failing {
        let one = find_critical_predicates(program, t);
        all.elements.extend(one.elements);
        all.reexecutions += one.reexecutions;
    }
    all
}
