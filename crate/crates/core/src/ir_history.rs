//! File-level scorers: bug-report similarity and fix history, plus the
//! propagation of file scores to statements.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProgramElement, ScoredList};
use crate::technique::Technique;

/// Splits on non-alphanumerics, then on camelCase humps, and lowercases.
///
/// ```
/// use combinefl::ir_history::tokenize;
/// assert_eq!(tokenize("parseHTTPHeader(max_len)"), ["parse", "http", "header", "max", "len"]);
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split(|c: char| !c.is_ascii_alphanumeric()) {
        let chars: Vec<char> = word.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let (prev, cur) = (chars[i - 1], chars[i]);
            let hump = cur.is_ascii_uppercase()
                && (prev.is_ascii_lowercase()
                    || prev.is_ascii_digit()
                    || (prev.is_ascii_uppercase()
                        && chars.get(i + 1).is_some_and(|n| n.is_ascii_lowercase())));
            if hump {
                out.push(chars[start..i].iter().collect::<String>().to_ascii_lowercase());
                start = i;
            }
        }
        if start < chars.len() {
            out.push(chars[start..].iter().collect::<String>().to_ascii_lowercase());
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BugReport {
    text: String,
}

impl BugReport {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if tokenize(&text).is_empty() {
            return Err(Error::EmptyReport);
        }
        Ok(BugReport { text })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        BugReport::new(text)
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

type TermVector = BTreeMap<String, f64>;

fn weigh(tokens: &[String], idf: &HashMap<String, f64>) -> TermVector {
    let mut v = TermVector::new();
    for t in tokens {
        if let Some(w) = idf.get(t) {
            *v.entry(t.clone()).or_default() += w;
        }
    }
    v
}

fn cosine(a: &TermVector, b: &TermVector) -> f64 {
    let dot: f64 = a.iter().filter_map(|(t, x)| b.get(t).map(|y| x * y)).sum();
    let norm = |v: &TermVector| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        (dot / denom).clamp(0.0, 1.0)
    }
}

/// TF-IDF cosine similarity between the report and each file.
pub fn ir_rank_files(report: &BugReport, files: &BTreeMap<String, String>) -> ScoredList<String> {
    let docs: Vec<(&String, Vec<String>)> = files.iter().map(|(id, t)| (id, tokenize(t))).collect();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for (_, toks) in &docs {
        for t in toks.iter().map(String::as_str).collect::<BTreeSet<_>>() {
            *df.entry(t).or_default() += 1;
        }
    }
    let n = docs.len() as f64;
    let idf: HashMap<String, f64> = df
        .into_iter()
        .map(|(t, d)| (t.to_string(), (n / d as f64).ln()))
        .collect();
    let query = weigh(&tokenize(&report.text), &idf);
    let entries = docs
        .iter()
        .map(|(id, toks)| ((*id).clone(), cosine(&query, &weigh(toks, &idf))))
        .collect();
    ScoredList::new(Technique::Ir.id(), entries).expect("file ids come from a map")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub ts: i64,
    pub msg: String,
    pub files: Vec<String>,
}

impl Commit {
    pub fn is_fix(&self) -> bool {
        let m = self.msg.to_lowercase();
        m.contains("fix") || m.contains("close")
    }
}

/// `{"commits": [{"ts", "msg", "files"}]}`, oldest first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryLog {
    pub commits: Vec<Commit>,
}

impl HistoryLog {
    pub fn new(commits: Vec<Commit>) -> Result<Self> {
        if let Some(i) = commits.windows(2).position(|w| w[1].ts < w[0].ts) {
            return Err(Error::UnorderedHistory(i + 1));
        }
        Ok(HistoryLog { commits })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: HistoryLog = serde_json::from_str(text)?;
        HistoryLog::new(raw.commits)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        HistoryLog::from_json(&text)
    }

    pub fn latest(&self) -> Option<i64> {
        self.commits.last().map(|c| c.ts)
    }
}

/// Logistic recency weight of a fix at normalized time `t` in `[0, 1]`.
pub fn recency_weight(t_norm: f64) -> f64 {
    1.0 / (1.0 + (-12.0 * t_norm + 12.0).exp())
}

/// Sums the recency weights of the fix commits touching each file.
///
/// When `now` equals the oldest fix time every fix counts as most recent.
pub fn history_rank_files(log: &HistoryLog, now: i64) -> ScoredList<String> {
    let fixes: Vec<&Commit> = log.commits.iter().filter(|c| c.is_fix()).collect();
    let Some(oldest) = fixes.iter().map(|c| c.ts).min() else {
        return ScoredList::empty(Technique::History.id());
    };
    let span = (now - oldest) as f64;
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for c in fixes {
        let t_norm = if span <= 0.0 {
            1.0
        } else {
            ((c.ts - oldest) as f64 / span).clamp(0.0, 1.0)
        };
        let w = recency_weight(t_norm);
        for f in c.files.iter().collect::<BTreeSet<_>>() {
            *scores.entry(f.clone()).or_default() += w;
        }
    }
    ScoredList::new(Technique::History.id(), scores.into_iter().collect())
        .expect("files come from a map")
}

/// Gives every statement its file's score; statements of unscored files get 0.
pub fn propagate_file_scores(
    files: &ScoredList<String>,
    elements: &[ProgramElement],
) -> ScoredList {
    let scores = files.to_map();
    let entries = elements
        .iter()
        .map(|e| (e.clone(), scores.get(&e.file).copied().unwrap_or(0.0)))
        .collect();
    ScoredList::new(files.technique(), entries).expect("elements are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rank_elements;

    fn files(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn tokenizer_splits_identifiers() {
        assert_eq!(tokenize("fooBar_baz qux2Go"), ["foo", "bar", "baz", "qux2", "go"]);
        assert!(tokenize("  --  ").is_empty());
        assert!(BugReport::new("?!").is_err());
    }

    #[test]
    fn cosine_against_independent_values() {
        let corpus = files(&[
            ("a", "parseHeader(header); total = pixel"),
            ("b", "render pixel header"),
            ("c", "pixel_count parse parse"),
        ]);
        let r = BugReport::new("Crash in parseHeader when pixel count is zero").unwrap();
        let s = ir_rank_files(&r, &corpus);
        let expect = [("a", 0.27940292940374356), ("b", 0.11328489511234545), ("c", 0.9075548070268697)];
        for (f, v) in expect {
            assert!((s.score_of(&f.to_string()).unwrap() - v).abs() < 1e-12, "{f}");
        }
    }

    #[test]
    fn distinctive_identifier_ranks_its_file_first() {
        let corpus = files(&[("a", "fn computeChecksum sum total"), ("b", "fn render sum total")]);
        let r = BugReport::new("wrong result from computeChecksum").unwrap();
        let s = ir_rank_files(&r, &corpus);
        assert_eq!(s.score_of(&"a".into()), Some(1.0));
        assert_eq!(s.score_of(&"b".into()), Some(0.0));
    }

    #[test]
    fn no_overlap_and_identical_files() {
        let corpus = files(&[("a", "alpha beta"), ("b", "gamma"), ("c", "gamma")]);
        let s = ir_rank_files(&BugReport::new("zeta").unwrap(), &corpus);
        assert!(s.entries().iter().all(|(_, v)| *v == 0.0));
        let s = ir_rank_files(&BugReport::new("gamma beta").unwrap(), &corpus);
        assert_eq!(s.score_of(&"b".into()), s.score_of(&"c".into()));
    }

    fn commit(ts: i64, msg: &str, files: &[&str]) -> Commit {
        Commit {
            ts,
            msg: msg.into(),
            files: files.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn history_weights() {
        assert_eq!(recency_weight(1.0), 0.5);
        assert!((recency_weight(0.5) - 0.0024726231566347743).abs() < 1e-15);

        let log = HistoryLog::new(vec![
            commit(0, "Fix overflow", &["a"]),
            commit(5, "refactor", &["b"]),
            commit(10, "closes #12", &["b"]),
        ])
        .unwrap();
        let s = history_rank_files(&log, 10);
        assert_eq!(s.score_of(&"b".into()), Some(0.5));
        assert!(s.score_of(&"a".into()).unwrap() < s.score_of(&"b".into()).unwrap());
        assert_eq!(s.score_of(&"c".into()), None);

        let only = HistoryLog::new(vec![commit(3, "fixed it", &["a"])]).unwrap();
        assert_eq!(history_rank_files(&only, 3).score_of(&"a".into()), Some(0.5));
        let none = HistoryLog::new(vec![commit(3, "docs", &["a"])]).unwrap();
        assert!(history_rank_files(&none, 3).is_empty());
    }

    #[test]
    fn history_json_validation() {
        let ok = r#"{"commits": [{"ts": 1, "msg": "fix", "files": ["a.ml"]}]}"#;
        assert_eq!(HistoryLog::from_json(ok).unwrap().commits.len(), 1);
        let bad = r#"{"commits": [{"ts": 2, "msg": "a", "files": []}, {"ts": 1, "msg": "b", "files": []}]}"#;
        assert!(matches!(HistoryLog::from_json(bad), Err(Error::UnorderedHistory(1))));
    }

    #[test]
    fn propagation_keeps_file_blocks() {
        let els: Vec<ProgramElement> = (1..4)
            .flat_map(|l| [ProgramElement::new("x.ml", l, 0), ProgramElement::new("y.ml", l, 0), ProgramElement::new("z.ml", l, 0)])
            .collect();
        let fs = ScoredList::new("ir", vec![("x.ml".to_string(), 0.9), ("y.ml".to_string(), 0.1)]).unwrap();
        let s = propagate_file_scores(&fs, &els);
        assert_eq!(s.score_of(&ProgramElement::new("x.ml", 2, 0)), Some(0.9));
        assert_eq!(s.score_of(&ProgramElement::new("z.ml", 2, 0)), Some(0.0));
        let groups = rank_elements(&s);
        let per_group: Vec<BTreeSet<&str>> = groups
            .groups()
            .iter()
            .map(|g| g.elements.iter().map(|e| e.file.as_str()).collect())
            .collect();
        assert_eq!(per_group, vec![BTreeSet::from(["x.ml"]), BTreeSet::from(["y.ml"]), BTreeSet::from(["z.ml"])]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn history_is_additive_and_bounded(ts in proptest::collection::vec(0i64..100, 1..8)) {
                let mut ts = ts;
                ts.sort();
                let now = *ts.last().unwrap();
                let log = HistoryLog::new(ts.iter().map(|t| commit(*t, "fix", &["a"])).collect()).unwrap();
                let total = history_rank_files(&log, now).score_of(&"a".into()).unwrap();
                let oldest = ts[0];
                let expect: f64 = ts.iter().map(|t| {
                    let tn = if now == oldest { 1.0 } else { (t - oldest) as f64 / (now - oldest) as f64 };
                    let w = recency_weight(tn);
                    assert!(w > 0.0 && w <= 1.0);
                    w
                }).sum();
                prop_assert!((total - expect).abs() < 1e-12);
            }

            #[test]
            fn cosine_in_unit_interval(a in "[a-d ]{0,20}", b in "[a-d ]{0,20}", q in "[a-d]{1,5}") {
                let s = ir_rank_files(&BugReport::new(q).unwrap(), &files(&[("a", &a), ("b", &b), ("c", "a b")]));
                for (_, v) in s.entries() {
                    prop_assert!((0.0..=1.0).contains(v));
                }
            }
        }
    }
}
