//! On-disk corpus of faults.
//!
//! ```text
//! corpus/<fault_id>/
//!     *.ml           subject sources (at least one unless scores are supplied)
//!     tests.json     {"tests": [{"id", "entry", "args", "expect"}]}
//!     truth.json     {"faulty": ["file:line:idx"], "insertions": [hunk], "project": "name"}
//!     report.txt     bug report text (IR-based family)
//!     history.json   {"commits": [{"ts", "msg", "files"}]} (history-based family)
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ir_history::{BugReport, HistoryLog};
use crate::minilang::{parse_files, Program, TestSuite};
use crate::model::{adjust_ground_truth_for_insertions, PatchHunk, ProgramElement};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    #[serde(default)]
    pub faulty: Vec<String>,
    /// Patch hunks whose faulty elements must be derived from the program.
    #[serde(default)]
    pub insertions: Vec<PatchHunk>,
    #[serde(default)]
    pub project: Option<String>,
}

#[derive(Clone, Debug)]
pub struct CorpusFault {
    pub id: String,
    pub project: String,
    pub dir: PathBuf,
    /// `(file id, text)` sorted by file id.
    pub sources: Vec<(String, String)>,
    pub suite: Option<TestSuite>,
    /// Absent for faults that are only localized, never evaluated.
    pub truth: Option<TruthFile>,
    pub report: Option<BugReport>,
    pub history: Option<HistoryLog>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    if path.exists() {
        read(path).map(Some)
    } else {
        Ok(None)
    }
}

impl CorpusFault {
    pub fn load(dir: &Path) -> Result<CorpusFault> {
        let id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let truth_path = dir.join("truth.json");
        let truth: Option<TruthFile> = match read_optional(&truth_path)? {
            Some(text) => Some(serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: truth_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?),
            None => None,
        };
        let mut sources = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().is_some_and(|x| x == "ml") {
                let name = path.file_name().expect("has extension").to_string_lossy().into_owned();
                sources.push((name, read(&path)?));
            }
        }
        sources.sort();
        let tests_path = dir.join("tests.json");
        let suite = match read_optional(&tests_path)? {
            Some(text) => Some(TestSuite::from_json(&text).map_err(|e| Error::Parse {
                path: tests_path.clone(),
                line: 0,
                message: e.to_string(),
            })?),
            None => None,
        };
        let report = match read_optional(&dir.join("report.txt"))? {
            Some(text) => Some(BugReport::new(text)?),
            None => None,
        };
        let history = match read_optional(&dir.join("history.json"))? {
            Some(text) => Some(HistoryLog::from_json(&text)?),
            None => None,
        };
        Ok(CorpusFault {
            project: truth
                .as_ref()
                .and_then(|t| t.project.clone())
                .unwrap_or_else(|| id.clone()),
            id,
            dir: dir.to_path_buf(),
            sources,
            suite,
            truth,
            report,
            history,
        })
    }

    pub fn has_program(&self) -> bool {
        !self.sources.is_empty()
    }

    pub fn program(&self) -> Result<Program> {
        if self.sources.is_empty() {
            return Err(Error::MissingInputs(vec![format!("{}/*.ml", self.dir.display())]));
        }
        parse_files(&self.sources)
    }

    /// Faulty elements, resolved against `elements` so they carry method names.
    pub fn ground_truth(&self, elements: &[ProgramElement]) -> Result<BTreeSet<ProgramElement>> {
        let truth = self.truth.as_ref().ok_or_else(|| {
            Error::MissingInputs(vec![self.dir.join("truth.json").display().to_string()])
        })?;
        let mut faulty = BTreeSet::new();
        for id in &truth.faulty {
            let e: ProgramElement = id.parse()?;
            faulty.insert(elements.iter().find(|x| **x == e).cloned().unwrap_or(e));
        }
        if !truth.insertions.is_empty() {
            faulty.extend(adjust_ground_truth_for_insertions(&truth.insertions, elements)?);
        }
        if faulty.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        Ok(faulty)
    }
}

/// Loads every fault directory below `dir`, ordered by fault id. Each needs
/// a `truth.json`.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusFault>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::MissingInputs(vec![format!("{}/<fault_id>/", dir.display())]));
    }
    let faults = dirs
        .iter()
        .map(|d| CorpusFault::load(d))
        .collect::<Result<Vec<_>>>()?;
    let unlabelled: Vec<String> = faults
        .iter()
        .filter(|f| f.truth.is_none())
        .map(|f| f.dir.join("truth.json").display().to_string())
        .collect();
    if !unlabelled.is_empty() {
        return Err(Error::MissingInputs(unlabelled));
    }
    Ok(faults)
}
