//! Evaluation reports and their text, JSON and CSV renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// E_inspect@n counts and mean EXAM for one technique or combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    pub at1: usize,
    pub at3: usize,
    pub at5: usize,
    pub at10: usize,
    pub exam_mean: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub r2: f64,
    pub p: f64,
    pub n: usize,
}

/// Pairwise r² of per-fault E_inspect values; `None` where undefined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub techniques: Vec<String>,
    pub cells: Vec<Vec<Option<CorrelationCell>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultRow {
    pub fault: String,
    pub project: String,
    pub combined: f64,
    pub standalone: BTreeMap<String, f64>,
}

/// Measured wall-clock seconds of this run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingSection {
    pub families: BTreeMap<String, f64>,
    pub analysis_secs: f64,
    pub evaluation_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub preset: String,
    pub granularity: String,
    pub seed: u64,
    pub k: usize,
    pub cv: String,
    pub faults: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ReportConfig,
    /// Where each technique's scores came from: "analysis", "records", or
    /// "analysis+records" when faults differ.
    pub sources: BTreeMap<String, String>,
    pub standalone: Vec<MetricRow>,
    /// One row per time level up to the configured preset.
    pub levels: Vec<MetricRow>,
    pub combined: MetricRow,
    /// Combination with one family left out, one row per family.
    pub ablation: Vec<MetricRow>,
    pub correlation: CorrelationMatrix,
    pub per_fault: Vec<FaultRow>,
    pub timing: Option<TimingSection>,
}

impl Report {
    /// Drops the wall-clock section so reports of identical runs compare equal.
    pub fn mask_timing(&mut self) {
        self.timing = None;
    }

    pub fn from_json(text: &str) -> Result<Report> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "table" | "text-table" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::Unknown {
                kind: "report format",
                value: s.into(),
            }),
        }
    }
}

pub fn emit_report(report: &Report, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Csv => emit_csv(report),
        ReportFormat::Text => Ok(emit_text(report)),
    }
}

fn emit_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Unknown {
        kind: "csv output",
        value: e.to_string(),
    };
    w.write_record(["technique", "family", "at1", "at3", "at5", "at10", "exam_mean"])
        .map_err(csv_err)?;
    for r in &report.standalone {
        w.write_record([
            r.name.clone(),
            r.family.clone().unwrap_or_default(),
            r.at1.to_string(),
            r.at3.to_string(),
            r.at5.to_string(),
            r.at10.to_string(),
            format!("{:.6}", r.exam_mean),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Unknown {
        kind: "csv output",
        value: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn metric_table(out: &mut String, title: &str, rows: &[&MetricRow]) {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(9);
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "  {:<width$}  {:>4}  {:>4}  {:>4}  {:>5}  {:>9}",
        "technique", "@1", "@3", "@5", "@10", "EXAM"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "  {:<width$}  {:>4}  {:>4}  {:>4}  {:>5}  {:>9.4}",
            r.name, r.at1, r.at3, r.at5, r.at10, r.exam_mean
        );
    }
    out.push('\n');
}

fn emit_text(report: &Report) -> String {
    let c = &report.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "faults: {}  preset: {}  granularity: {}  cv: {}  k: {}  seed: {}\n",
        c.faults, c.preset, c.granularity, c.cv, c.k, c.seed
    );
    metric_table(&mut out, "Standalone techniques", &report.standalone.iter().collect::<Vec<_>>());
    metric_table(&mut out, "Time levels (combined)", &report.levels.iter().collect::<Vec<_>>());
    metric_table(&mut out, "Leave one family out", &report.ablation.iter().collect::<Vec<_>>());

    let m = &report.correlation;
    let width = m.techniques.iter().map(|t| t.len()).max().unwrap_or(0).max(6);
    let _ = writeln!(out, "Correlation r2 of E_inspect");
    let _ = write!(out, "  {:<width$}", "");
    for t in &m.techniques {
        let _ = write!(out, "  {:>width$}", t);
    }
    out.push('\n');
    for (t, row) in m.techniques.iter().zip(&m.cells) {
        let _ = write!(out, "  {:<width$}", t);
        for cell in row {
            match cell {
                Some(c) => {
                    let _ = write!(out, "  {:>width$.3}", c.r2);
                }
                None => {
                    let _ = write!(out, "  {:>width$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out.push('\n');

    match &report.timing {
        Some(t) => {
            let _ = writeln!(out, "Wall-clock seconds (this run)");
            for (f, s) in &t.families {
                let _ = writeln!(out, "  {f:<20}  {s:>10.4}");
            }
            let _ = writeln!(out, "  {:<20}  {:>10.4}", "analysis total", t.analysis_secs);
            let _ = writeln!(out, "  {:<20}  {:>10.4}", "evaluation", t.evaluation_secs);
        }
        None => {
            let _ = writeln!(out, "Wall-clock seconds: masked");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> Report {
        let row = |name: &str| MetricRow {
            name: name.into(),
            family: Some("SBFL".into()),
            at1: 1,
            at3: 2,
            at5: 3,
            at10: 4,
            exam_mean: 0.125,
        };
        let cell = Some(CorrelationCell { r2: 0.5, p: 0.1, n: 10 });
        Report {
            config: ReportConfig {
                preset: "level2".into(),
                granularity: "statement".into(),
                seed: 1,
                k: 10,
                cv: "kfold".into(),
                faults: 10,
            },
            sources: BTreeMap::from([("ochiai".into(), "analysis".into())]),
            standalone: vec![row("ochiai"), row("dstar")],
            levels: vec![row("level1")],
            combined: row("level1"),
            ablation: vec![row("-SBFL")],
            correlation: CorrelationMatrix {
                techniques: vec!["ochiai".into(), "dstar".into()],
                cells: vec![vec![cell, cell], vec![cell, cell]],
            },
            per_fault: vec![],
            timing: Some(TimingSection {
                families: BTreeMap::from([("SBFL".into(), 0.5)]),
                analysis_secs: 1.0,
                evaluation_secs: 2.0,
            }),
        }
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let text = emit_report(&r, ReportFormat::Json).unwrap();
        assert_eq!(Report::from_json(&text).unwrap(), r);
    }

    #[test]
    fn csv_has_one_row_per_technique() {
        let text = emit_report(&sample(), ReportFormat::Csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 2);
        assert!(text.starts_with("technique,family,at1"));
    }

    #[test]
    fn text_mentions_every_section() {
        let mut r = sample();
        let text = emit_report(&r, ReportFormat::Text).unwrap();
        for needle in ["Standalone", "Time levels", "Leave one family out", "r2", "Wall-clock"] {
            assert!(text.contains(needle), "{needle}");
        }
        r.mask_timing();
        assert!(emit_report(&r, ReportFormat::Text).unwrap().contains("masked"));
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
