//! Shared data model: program elements, scored lists, tie-grouped rankings,
//! fault cases, and the helpers that move between granularities.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single executable statement.
///
/// Identity is `(file, line, stmt_index)`; the enclosing method is carried
/// along as metadata and does not take part in equality, hashing or ordering.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProgramElement {
    pub file: String,
    pub line: u32,
    pub stmt_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

impl ProgramElement {
    pub fn new(file: impl Into<String>, line: u32, stmt_index: u32) -> Self {
        ProgramElement {
            file: file.into(),
            line,
            stmt_index,
            method: None,
        }
    }

    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = Some(method.into());
        self
    }

    fn key(&self) -> (&str, u32, u32) {
        (&self.file, self.line, self.stmt_index)
    }
}

impl PartialEq for ProgramElement {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for ProgramElement {}

impl Hash for ProgramElement {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl PartialOrd for ProgramElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ProgramElement {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for ProgramElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.stmt_index)
    }
}

impl FromStr for ProgramElement {
    type Err = Error;

    /// Parses `file:line:idx`. The file part may itself contain colons.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidElementId(s.to_string());
        let mut parts = s.rsplitn(3, ':');
        let idx = parts.next().ok_or_else(bad)?;
        let line = parts.next().ok_or_else(bad)?;
        let file = parts.next().ok_or_else(bad)?;
        if file.is_empty() {
            return Err(bad());
        }
        let line: u32 = line.parse().map_err(|_| bad())?;
        let idx: u32 = idx.parse().map_err(|_| bad())?;
        if line == 0 {
            return Err(bad());
        }
        Ok(ProgramElement::new(file, line, idx))
    }
}

/// Method-granularity element: the name of a function in the subject program.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodId(pub String);

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Output of one technique on one fault: suspiciousness per element.
///
/// Scores are finite or `+inf`; `+inf` sorts above every finite score.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredList<E = ProgramElement> {
    technique: String,
    entries: Vec<(E, f64)>,
}

impl<E: Clone + Ord + Hash + fmt::Display> ScoredList<E> {
    pub fn new(technique: impl Into<String>, entries: Vec<(E, f64)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for (element, score) in &entries {
            if score.is_nan() || *score == f64::NEG_INFINITY {
                return Err(Error::InvalidScore {
                    element: element.to_string(),
                    score: *score,
                });
            }
            if !seen.insert(element) {
                return Err(Error::DuplicateElement(element.to_string()));
            }
        }
        Ok(ScoredList {
            technique: technique.into(),
            entries,
        })
    }

    pub fn empty(technique: impl Into<String>) -> Self {
        ScoredList {
            technique: technique.into(),
            entries: Vec::new(),
        }
    }

    pub fn technique(&self) -> &str {
        &self.technique
    }

    pub fn entries(&self) -> &[(E, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_of(&self, element: &E) -> Option<f64> {
        self.entries
            .iter()
            .find(|(e, _)| e == element)
            .map(|(_, s)| *s)
    }

    pub fn to_map(&self) -> BTreeMap<E, f64> {
        self.entries.iter().cloned().collect()
    }

    pub fn with_technique(mut self, technique: impl Into<String>) -> Self {
        self.technique = technique.into();
        self
    }

    /// Extends the list to `universe`, giving every unscored element score 0.
    /// Elements outside the universe are dropped.
    pub fn over_universe(&self, universe: &[E]) -> ScoredList<E> {
        let scores = self.to_map();
        let entries = universe
            .iter()
            .map(|e| (e.clone(), scores.get(e).copied().unwrap_or(0.0)))
            .collect();
        ScoredList {
            technique: self.technique.clone(),
            entries,
        }
    }
}

/// A maximal set of elements sharing one score.
#[derive(Clone, Debug, PartialEq)]
pub struct TieGroup<E> {
    pub score: f64,
    /// 1-based rank of the group's first slot.
    pub start: usize,
    pub elements: Vec<E>,
}

impl<E> TieGroup<E> {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Elements grouped by exact score equality, highest score first.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking<E = ProgramElement> {
    groups: Vec<TieGroup<E>>,
}

impl<E: Clone + Ord> Ranking<E> {
    pub fn groups(&self) -> &[TieGroup<E>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(TieGroup::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn contains(&self, element: &E) -> bool {
        self.groups.iter().any(|g| g.elements.binary_search(element).is_ok())
    }

    /// Elements in rank order; ties keep their sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&E, f64)> {
        self.groups
            .iter()
            .flat_map(|g| g.elements.iter().map(move |e| (e, g.score)))
    }
}

/// Groups a scored list into tie-groups ordered by strictly decreasing score.
pub fn rank_elements<E>(scored: &ScoredList<E>) -> Ranking<E>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let mut entries: Vec<(E, f64)> = scored
        .entries()
        .iter()
        // Fold -0.0 into 0.0 so the sort agrees with `==`.
        .map(|(e, s)| (e.clone(), if *s == 0.0 { 0.0 } else { *s }))
        .collect();
    entries.sort_by(|(ea, a), (eb, b)| b.total_cmp(a).then_with(|| ea.cmp(eb)));

    let mut groups: Vec<TieGroup<E>> = Vec::new();
    let mut next_start = 1;
    for (element, score) in entries {
        match groups.last_mut() {
            Some(g) if g.score == score => g.elements.push(element),
            _ => {
                if let Some(prev) = groups.last() {
                    next_start = prev.start + prev.len();
                }
                groups.push(TieGroup {
                    score,
                    start: next_start,
                    elements: vec![element],
                });
            }
        }
    }
    Ranking { groups }
}

/// Ranking over a whole universe: unscored elements share score 0.
pub fn rank_over_universe<E>(scored: &ScoredList<E>, universe: &[E]) -> Ranking<E>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    rank_elements(&scored.over_universe(universe))
}

/// Lifts a statement-level list to any coarser granularity: a group's score is
/// the maximum of its members' scores.
pub fn lift_by<E, M, F>(scored: &ScoredList<E>, mut group_of: F) -> Result<ScoredList<M>>
where
    E: Clone + Ord + Hash + fmt::Display,
    M: Clone + Ord + Hash + fmt::Display,
    F: FnMut(&E) -> Option<M>,
{
    let mut best: BTreeMap<M, f64> = BTreeMap::new();
    for (element, score) in scored.entries() {
        let group = group_of(element).ok_or_else(|| Error::MissingMethod(element.to_string()))?;
        best.entry(group)
            .and_modify(|s| *s = s.max(*score))
            .or_insert(*score);
    }
    ScoredList::new(scored.technique(), best.into_iter().collect())
}

/// Statement to method lifting using each element's enclosing method.
pub fn lift_to_method_granularity(scored: &ScoredList) -> Result<ScoredList<MethodId>> {
    lift_by(scored, |e| e.method.clone().map(MethodId))
}

/// One hunk of a fixing patch, expressed against the faulty version.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatchHunk {
    Modified { file: String, line: u32 },
    Deleted { file: String, line: u32 },
    /// New code inserted between `after_line` and the line that follows it.
    Inserted { file: String, after_line: u32 },
}

/// Maps a patch to the faulty elements of the unfixed program.
///
/// Modified and deleted lines map to their statements. An insertion maps to
/// the first executable statement after the insertion point; at the end of a
/// file it falls back to the last statement before it. A modified or deleted
/// line carrying no statement is treated like an insertion just before it.
pub fn adjust_ground_truth_for_insertions(
    hunks: &[PatchHunk],
    elements: &[ProgramElement],
) -> Result<BTreeSet<ProgramElement>> {
    let mut faulty = BTreeSet::new();
    for hunk in hunks {
        match hunk {
            PatchHunk::Modified { file, line } | PatchHunk::Deleted { file, line } => {
                let on_line: Vec<_> = elements
                    .iter()
                    .filter(|e| &e.file == file && e.line == *line)
                    .cloned()
                    .collect();
                if on_line.is_empty() {
                    faulty.extend(element_near_insertion(elements, file, line.saturating_sub(1)));
                } else {
                    faulty.extend(on_line);
                }
            }
            PatchHunk::Inserted { file, after_line } => {
                faulty.extend(element_near_insertion(elements, file, *after_line));
            }
        }
    }
    if faulty.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(faulty)
}

fn element_near_insertion(
    elements: &[ProgramElement],
    file: &str,
    after_line: u32,
) -> Option<ProgramElement> {
    let in_file = elements.iter().filter(|e| e.file == file);
    in_file
        .clone()
        .filter(|e| e.line > after_line)
        .min()
        .or_else(|| in_file.filter(|e| e.line <= after_line).max())
        .cloned()
}

/// Pass/fail outcome of one test on the original program.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRecord {
    pub id: String,
    pub passed: bool,
}

/// Auxiliary inputs that non-execution families consume.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuxInputs {
    pub bug_report: Option<String>,
    pub history: Option<crate::ir_history::HistoryLog>,
}

/// One defect together with its ground truth.
#[derive(Clone, Debug)]
pub struct FaultCase {
    pub id: String,
    pub project: String,
    pub elements: Vec<ProgramElement>,
    pub faulty: BTreeSet<ProgramElement>,
    pub tests: Vec<TestRecord>,
    pub aux: AuxInputs,
}

impl FaultCase {
    pub fn new(
        id: impl Into<String>,
        project: impl Into<String>,
        elements: Vec<ProgramElement>,
        faulty: BTreeSet<ProgramElement>,
        tests: Vec<TestRecord>,
        aux: AuxInputs,
    ) -> Result<Self> {
        let id = id.into();
        let invalid = |why: &str| Error::InvalidFaultCase(id.clone(), why.to_string());
        if !tests.iter().any(|t| !t.passed) {
            return Err(invalid("no failed test"));
        }
        if faulty.is_empty() {
            return Err(invalid("empty faulty set"));
        }
        let known: HashSet<&ProgramElement> = elements.iter().collect();
        if known.len() != elements.len() {
            return Err(invalid("duplicate element"));
        }
        if let Some(stray) = faulty.iter().find(|f| !known.contains(f)) {
            return Err(invalid(&format!("faulty element {stray} is not executable")));
        }
        Ok(FaultCase {
            id,
            project: project.into(),
            elements,
            faulty,
            tests,
            aux,
        })
    }

    pub fn failed_tests(&self) -> impl Iterator<Item = &TestRecord> {
        self.tests.iter().filter(|t| !t.passed)
    }

    /// Methods containing at least one faulty statement.
    pub fn faulty_methods(&self) -> BTreeSet<MethodId> {
        self.faulty
            .iter()
            .filter_map(|f| {
                self.elements
                    .iter()
                    .find(|e| *e == f)
                    .and_then(|e| e.method.clone())
            })
            .map(MethodId)
            .collect()
    }

    pub fn methods(&self) -> Vec<MethodId> {
        let set: BTreeSet<MethodId> = self
            .elements
            .iter()
            .filter_map(|e| e.method.clone().map(MethodId))
            .collect();
        set.into_iter().collect()
    }
}
