//! Backward dynamic slicing and multi-slice combination.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::minilang::ExecutionTrace;
use crate::model::{ProgramElement, ScoredList};
use crate::technique::Technique;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicSlice {
    pub criterion: (ProgramElement, usize),
    pub members: BTreeSet<ProgramElement>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceStrategy {
    Union,
    Intersection,
    Frequency,
}

impl SliceStrategy {
    pub fn technique(self) -> Technique {
        match self {
            SliceStrategy::Union => Technique::SliceUnion,
            SliceStrategy::Intersection => Technique::SliceIntersection,
            SliceStrategy::Frequency => Technique::SliceFrequency,
        }
    }
}

/// Closure of `event` over dynamic data and control dependences.
///
/// Panics if `event` is not an index into `trace.events`.
pub fn backward_slice(trace: &ExecutionTrace, event: usize) -> DynamicSlice {
    let mut seen = vec![false; trace.events.len()];
    let mut stack = vec![event];
    let mut members = BTreeSet::new();
    while let Some(i) = stack.pop() {
        if std::mem::replace(&mut seen[i], true) {
            continue;
        }
        let ev = &trace.events[i];
        members.insert(ev.element.clone());
        stack.extend(ev.data_deps.iter().copied().filter(|&d| !seen[d]));
        stack.extend(ev.control_parent.filter(|&p| !seen[p]));
    }
    DynamicSlice {
        criterion: (trace.events[event].element.clone(), event),
        members,
    }
}

/// Slice of a failing trace from the event that raised its failure.
pub fn failure_slice(trace: &ExecutionTrace) -> Option<DynamicSlice> {
    if trace.passed() {
        return None;
    }
    trace.failure_event.map(|e| backward_slice(trace, e))
}

pub fn combine_slices(slices: &[DynamicSlice], strategy: SliceStrategy) -> ScoredList {
    let mut counts: BTreeMap<&ProgramElement, usize> = BTreeMap::new();
    for s in slices {
        for m in &s.members {
            *counts.entry(m).or_default() += 1;
        }
    }
    let n = slices.len();
    let entries = counts
        .into_iter()
        .filter_map(|(e, c)| {
            let score = match strategy {
                SliceStrategy::Union => 1.0,
                SliceStrategy::Intersection if c == n => 1.0,
                SliceStrategy::Intersection => return None,
                SliceStrategy::Frequency => c as f64 / n as f64,
            };
            Some((e.clone(), score))
        })
        .collect();
    ScoredList::new(strategy.technique().id(), entries).expect("elements come from a map")
}
