//! JSON-lines exchange of precomputed technique scores.
//!
//! One object per line:
//! `{"fault": "f1", "technique": "ochiai", "scores": [["a.ml:3:0", 0.5], ["a.ml:4:0", "inf"]]}`

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{ProgramElement, ScoredList};

/// A score that is either finite or the token `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreValue(pub f64);

impl Serialize for ScoreValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ScoreValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ScoreValue(v)),
            Raw::Str(s) if s == "inf" => Ok(ScoreValue(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "score must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ScoreLine {
    fault: String,
    technique: String,
    scores: Vec<(String, ScoreValue)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord {
    pub fault: String,
    pub technique: String,
    pub scores: ScoredList,
}

impl ScoreRecord {
    pub fn new(fault: impl Into<String>, scores: ScoredList) -> Self {
        ScoreRecord {
            fault: fault.into(),
            technique: scores.technique().to_string(),
            scores,
        }
    }

    pub fn to_line(&self) -> String {
        let line = ScoreLine {
            fault: self.fault.clone(),
            technique: self.technique.clone(),
            scores: self
                .scores
                .entries()
                .iter()
                .map(|(e, s)| (e.to_string(), ScoreValue(*s)))
                .collect(),
        };
        serde_json::to_string(&line).expect("score lines always serialize")
    }
}

fn parse_line(text: &str) -> std::result::Result<ScoreRecord, String> {
    let line: ScoreLine = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let entries = line
        .scores
        .into_iter()
        .map(|(id, v)| Ok((id.parse::<ProgramElement>()?, v.0)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let scores = ScoredList::new(line.technique.clone(), entries).map_err(|e| e.to_string())?;
    Ok(ScoreRecord {
        fault: line.fault,
        technique: line.technique,
        scores,
    })
}

/// Parses score lines; `origin` only labels errors. Blank lines are skipped,
/// and a repeated (fault, technique) pair replaces the earlier record.
pub fn parse_scores(text: &str, origin: &Path) -> Result<Vec<ScoreRecord>> {
    let mut records: Vec<ScoreRecord> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let record = parse_line(raw).map_err(|message| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        })?;
        let key = (record.fault.clone(), record.technique.clone());
        match index.get(&key) {
            Some(&at) => {
                log::warn!(
                    "{}:{}: duplicate scores for fault {} technique {}; keeping the later line",
                    origin.display(),
                    i + 1,
                    key.0,
                    key.1
                );
                records[at] = record;
            }
            None => {
                index.insert(key, records.len());
                records.push(record);
            }
        }
    }
    Ok(records)
}

pub fn ingest_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text, path)
}

pub fn write_scores(records: &[ScoreRecord]) -> String {
    records.iter().map(|r| r.to_line() + "\n").collect()
}
