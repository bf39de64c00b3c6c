//! Crash stack scoring: the frame at depth `d` gives its method `1/d`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::minilang::ExecutionTrace;
use crate::model::{MethodId, ProgramElement, ScoredList};
use crate::technique::Technique;

/// `{"test", "frames": [{"method", "line"}]}`, innermost frame first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackTraceRecord {
    pub test: String,
    pub frames: Vec<FrameRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub method: String,
    pub line: u32,
}

impl StackTraceRecord {
    /// Record of a failing trace; assertion failures have no frames.
    pub fn from_trace(trace: &ExecutionTrace) -> StackTraceRecord {
        let frames = trace
            .crash_stack()
            .unwrap_or_default()
            .iter()
            .map(|f| FrameRecord {
                method: f.function.clone(),
                line: f.element.line,
            })
            .collect();
        StackTraceRecord {
            test: trace.test_id.clone(),
            frames,
        }
    }
}

/// Method scores: the maximum of `1/d` over every failed test's stack.
pub fn score_methods(records: &[StackTraceRecord]) -> ScoredList<MethodId> {
    let mut best: BTreeMap<MethodId, f64> = BTreeMap::new();
    for r in records {
        for (i, f) in r.frames.iter().enumerate() {
            let s = 1.0 / (i + 1) as f64;
            let slot = best.entry(MethodId(f.method.clone())).or_insert(0.0);
            *slot = slot.max(s);
        }
    }
    ScoredList::new(Technique::StackTrace.id(), best.into_iter().collect())
        .expect("methods come from a map")
}

/// Copies each method's score to every statement of that method.
pub fn propagate_method_scores(
    methods: &ScoredList<MethodId>,
    elements: &[ProgramElement],
) -> ScoredList {
    let scores = methods.to_map();
    let entries = elements
        .iter()
        .filter_map(|e| {
            let m = MethodId(e.method.clone()?);
            scores.get(&m).map(|s| (e.clone(), *s))
        })
        .collect();
    ScoredList::new(methods.technique(), entries).expect("elements are unique")
}

/// Scores statements from the failed traces among `traces`.
pub fn score_stack_traces(traces: &[ExecutionTrace], elements: &[ProgramElement]) -> ScoredList {
    let records: Vec<StackTraceRecord> = traces
        .iter()
        .filter(|t| !t.passed())
        .map(StackTraceRecord::from_trace)
        .collect();
    propagate_method_scores(&score_methods(&records), elements)
}
