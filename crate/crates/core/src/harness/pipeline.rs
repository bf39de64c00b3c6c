//! Corpus-wide evaluation: analyses, standalone metrics, cross-validated
//! combination, ablation and correlation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::Hash;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiner::{
    assemble_features, run_combination, CvOutcome, CvStrategy, FaultFeatures, FaultScores,
    RankModel, TimeLevelPreset, DEFAULT_K,
};
use crate::error::{Error, Result};
use crate::metrics::{e_inspect, e_inspect_at_n, exam, r_squared, CorrelationInput, EInspect};
use crate::model::{
    lift_to_method_granularity, rank_over_universe, MethodId, ProgramElement, ScoredList,
};
use crate::technique::{Family, Technique};

use super::analysis::{analyze_fault, scores_from_records};
use super::corpus::{load_corpus, CorpusFault};
use super::ingest::ScoreRecord;
use super::report::{
    CorrelationCell, CorrelationMatrix, FaultRow, MetricRow, Report, ReportConfig, TimingSection,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Statement,
    Method,
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statement" => Ok(Granularity::Statement),
            "method" => Ok(Granularity::Method),
            _ => Err(Error::Unknown {
                kind: "granularity",
                value: s.into(),
            }),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Statement => "statement",
            Granularity::Method => "method",
        })
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub preset: TimeLevelPreset,
    pub granularity: Granularity,
    pub seed: u64,
    pub k: usize,
    pub cv: CvStrategy,
    /// Worker threads for per-fault analyses; `None` uses all cores.
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preset: TimeLevelPreset::new(4).expect("valid level"),
            granularity: Granularity::Statement,
            seed: 0,
            k: DEFAULT_K,
            cv: CvStrategy::Kfold,
            workers: None,
        }
    }
}

/// Per-fault scores ready for evaluation, plus provenance and timing.
#[derive(Clone, Debug)]
pub struct CorpusScores {
    pub faults: Vec<FaultScores>,
    pub sources: BTreeMap<String, String>,
    pub family_time: BTreeMap<Family, Duration>,
    pub analysis_time: Duration,
}

pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Scores, per-family time and origins of one fault.
type FaultRun = (FaultScores, BTreeMap<Family, Duration>, Vec<String>);

/// Runs the preset's families on every fault of `corpus` that ships a
/// program, and overlays precomputed `records` (which win per technique).
pub fn score_corpus(
    corpus: &[CorpusFault],
    records: &[ScoreRecord],
    families: &[Family],
    workers: Option<usize>,
) -> Result<CorpusScores> {
    let start = Instant::now();
    let mut by_fault: BTreeMap<&str, Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records {
        by_fault.entry(r.fault.as_str()).or_default().push(r);
    }
    let known: BTreeSet<&str> = corpus.iter().map(|f| f.id.as_str()).collect();
    for fault in by_fault.keys() {
        if !known.contains(fault) {
            log::warn!("scores for unknown fault {fault} are ignored");
        }
    }
    let results: Vec<Result<FaultRun>> =
        with_workers(workers, || {
            corpus
                .par_iter()
                .map(|fault| {
                    let recs = by_fault.get(fault.id.as_str()).cloned().unwrap_or_default();
                    if !fault.has_program() {
                        if recs.is_empty() {
                            return Err(Error::MissingInputs(vec![
                                format!("{}/*.ml", fault.dir.display()),
                                format!("scores for fault {}", fault.id),
                            ]));
                        }
                        let names = recs.iter().map(|r| r.technique.clone()).collect();
                        return Ok((scores_from_records(fault, &recs)?, BTreeMap::new(), names));
                    }
                    let needed: Vec<Family> = families
                        .iter()
                        .copied()
                        .filter(|f| {
                            !f.techniques()
                                .iter()
                                .all(|t| recs.iter().any(|r| r.technique == t.id()))
                        })
                        .collect();
                    let (mut scores, timing) = analyze_fault(fault, &needed)?.into_scores();
                    let mut names = Vec::new();
                    for r in recs {
                        scores.scores.insert(r.technique.clone(), r.scores.clone());
                        names.push(r.technique.clone());
                    }
                    Ok((scores, timing, names))
                })
                .collect()
        })?;

    let mut faults = Vec::with_capacity(results.len());
    let mut family_time: BTreeMap<Family, Duration> = BTreeMap::new();
    let mut origins: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    let mut missing: BTreeSet<String> = BTreeSet::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok((f, timing, from_records)) => {
                for t in f.scores.keys() {
                    let origin = if from_records.contains(t) { "records" } else { "analysis" };
                    origins.entry(t.clone()).or_default().insert(origin);
                }
                for (fam, d) in timing {
                    *family_time.entry(fam).or_default() += d;
                }
                faults.push(f);
            }
            Err(Error::MissingInputs(m)) => missing.extend(m),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingInputs(missing.into_iter().collect()));
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let sources = origins
        .into_iter()
        .map(|(t, o)| (t, o.into_iter().collect::<Vec<_>>().join("+")))
        .collect();
    Ok(CorpusScores {
        faults,
        sources,
        family_time,
        analysis_time: start.elapsed(),
    })
}

/// Loads a corpus directory and evaluates it end to end.
pub fn run_pipeline(corpus_dir: &Path, records: &[ScoreRecord], config: &PipelineConfig) -> Result<Report> {
    let corpus = load_corpus(corpus_dir)?;
    let scored = score_corpus(&corpus, records, &config.preset.families(), config.workers)?;
    evaluate_corpus(&scored, config)
}

/// Lifts statement scores of a fault to the functions that contain them.
pub fn lift_fault(f: &FaultScores) -> Result<FaultScores<MethodId>> {
    let mut universe: BTreeSet<MethodId> = BTreeSet::new();
    for e in &f.universe {
        let m = e.method.clone().ok_or_else(|| Error::MissingMethod(e.to_string()))?;
        universe.insert(MethodId(m));
    }
    let by_key: BTreeMap<&ProgramElement, &ProgramElement> = f.universe.iter().map(|e| (e, e)).collect();
    let faulty = f
        .faulty
        .iter()
        .map(|e| {
            let full = by_key.get(e).copied().unwrap_or(e);
            full.method
                .clone()
                .map(MethodId)
                .ok_or_else(|| Error::MissingMethod(e.to_string()))
        })
        .collect::<Result<BTreeSet<_>>>()?;
    let scores = f
        .scores
        .iter()
        .map(|(t, s)| {
            // Records may omit method names; recover them from the universe.
            let resolved = ScoredList::new(
                s.technique(),
                s.entries()
                    .iter()
                    .map(|(e, v)| (by_key.get(e).map(|x| (*x).clone()).unwrap_or_else(|| e.clone()), *v))
                    .collect(),
            )?;
            Ok((t.clone(), lift_to_method_granularity(&resolved)?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(FaultScores {
        id: f.id.clone(),
        project: f.project.clone(),
        universe: universe.into_iter().collect(),
        faulty,
        scores,
    })
}

pub fn evaluate_corpus(scored: &CorpusScores, config: &PipelineConfig) -> Result<Report> {
    let start = Instant::now();
    let mut report = match config.granularity {
        Granularity::Statement => build_report(&scored.faults, config)?,
        Granularity::Method => {
            let lifted = scored.faults.iter().map(lift_fault).collect::<Result<Vec<_>>>()?;
            build_report(&lifted, config)?
        }
    };
    report.sources = scored
        .sources
        .iter()
        .filter(|(t, _)| config.preset.technique_ids().contains(t))
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    report.timing = Some(TimingSection {
        families: scored
            .family_time
            .iter()
            .map(|(f, d)| (f.name().to_string(), d.as_secs_f64()))
            .collect(),
        analysis_secs: scored.analysis_time.as_secs_f64(),
        evaluation_secs: start.elapsed().as_secs_f64(),
    });
    Ok(report)
}

fn row(name: &str, family: Option<String>, values: &[EInspect], exam_mean: f64) -> MetricRow {
    MetricRow {
        name: name.to_string(),
        family,
        at1: e_inspect_at_n(values, 1),
        at3: e_inspect_at_n(values, 3),
        at5: e_inspect_at_n(values, 5),
        at10: e_inspect_at_n(values, 10),
        exam_mean,
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// E_inspect and EXAM of one technique on every fault.
pub fn standalone<E>(faults: &[FaultScores<E>], technique: &str) -> Result<(Vec<EInspect>, Vec<f64>)>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let mut values = Vec::with_capacity(faults.len());
    let mut exams = Vec::with_capacity(faults.len());
    for f in faults {
        let s = f
            .scores
            .get(technique)
            .ok_or_else(|| Error::MissingFamilies(vec![technique.to_string()]))?;
        let ranking = rank_over_universe(s, &f.universe);
        values.push(e_inspect(&ranking, &f.faulty)?);
        exams.push(exam(&ranking, &f.faulty, f.universe.len())?);
    }
    Ok((values, exams))
}

pub fn standalone_row<E>(faults: &[FaultScores<E>], technique: &str) -> Result<MetricRow>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let (values, exams) = standalone(faults, technique)?;
    let family = technique.parse::<Technique>().ok().map(|t| t.family().name().to_string());
    Ok(row(technique, family, &values, mean(&exams)))
}

fn combined_row<E>(name: &str, faults: &[FaultScores<E>], outcomes: &[CvOutcome<E>]) -> Result<MetricRow>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let values: Vec<EInspect> = outcomes.iter().map(|o| o.e_inspect.clone()).collect();
    let exams = faults
        .iter()
        .zip(outcomes)
        .map(|(f, o)| exam(&rank_over_universe(&o.combined, &f.universe), &f.faulty, f.universe.len()))
        .collect::<Result<Vec<_>>>()?;
    Ok(row(name, None, &values, mean(&exams)))
}

pub fn correlation_matrix(techniques: &[String], values: &BTreeMap<String, Vec<f64>>) -> CorrelationMatrix {
    let n = techniques.len();
    let mut cells = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let xs = &values[&techniques[i]];
            let ys = &values[&techniques[j]];
            let input = CorrelationInput::new(xs.iter().copied().zip(ys.iter().copied()).collect());
            let cell = r_squared(&input).ok().map(|c| CorrelationCell {
                r2: c.r2,
                p: c.p_value,
                n: c.n,
            });
            cells[i][j] = cell;
            cells[j][i] = cell;
        }
    }
    CorrelationMatrix {
        techniques: techniques.to_vec(),
        cells,
    }
}

/// r² matrix of per-fault standalone E_inspect for `techniques`.
pub fn correlate<E>(faults: &[FaultScores<E>], techniques: &[String]) -> Result<CorrelationMatrix>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let mut values = BTreeMap::new();
    for t in techniques {
        let (v, _) = standalone(faults, t)?;
        values.insert(t.clone(), v.iter().map(EInspect::to_f64).collect());
    }
    Ok(correlation_matrix(techniques, &values))
}

/// Fits one model on every fault, for later use on unseen faults.
pub fn train_model<E>(faults: &[FaultScores<E>], techniques: &[String], seed: u64) -> Result<RankModel>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    let features = assemble_features(faults, techniques)?;
    let refs: Vec<&FaultFeatures<E>> = features.iter().collect();
    Ok(RankModel::fit(techniques, &refs, seed))
}

/// Combined scores of one fault under a trained model.
pub fn apply_model<E>(model: &RankModel, fault: &FaultScores<E>) -> Result<ScoredList<E>>
where
    E: Clone + Ord + Hash + fmt::Display,
{
    model.predict(&fault.features(&model.techniques)?)
}

/// Evaluates per-fault scores under `config`; the timing section is left empty.
pub fn build_report<E>(faults: &[FaultScores<E>], config: &PipelineConfig) -> Result<Report>
where
    E: Clone + Ord + Hash + fmt::Display + Send + Sync,
{
    let techniques = config.preset.technique_ids();
    assemble_features(faults, &techniques)?;

    let mut standalone_rows = Vec::new();
    let mut per_technique: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in &techniques {
        let (values, exams) = standalone(faults, t)?;
        let family = t.parse::<Technique>().ok().map(|t| t.family().name().to_string());
        standalone_rows.push(row(t, family, &values, mean(&exams)));
        per_technique.insert(t.clone(), values.iter().map(EInspect::to_f64).collect());
    }

    let run = |ts: &[String]| run_combination(ts, faults, config.cv, config.k, config.seed);
    let mut levels = Vec::new();
    let mut final_outcomes = Vec::new();
    for level in 1..=config.preset.level() {
        let preset = TimeLevelPreset::new(level)?;
        let outcomes = run(&preset.technique_ids())?;
        levels.push(combined_row(&preset.to_string(), faults, &outcomes)?);
        if level == config.preset.level() {
            final_outcomes = outcomes;
        }
    }
    let combined = levels.last().cloned().expect("at least one level");

    let mut ablation = Vec::new();
    for family in config.preset.families() {
        let rest: Vec<String> = techniques
            .iter()
            .filter(|t| t.parse::<Technique>().map(|t| t.family() != family).unwrap_or(true))
            .cloned()
            .collect();
        let outcomes = run(&rest)?;
        let mut r = combined_row(&format!("-{}", family.name()), faults, &outcomes)?;
        r.family = Some(family.name().to_string());
        ablation.push(r);
    }

    let per_fault = faults
        .iter()
        .zip(&final_outcomes)
        .enumerate()
        .map(|(i, (f, o))| FaultRow {
            fault: f.id.clone(),
            project: f.project.clone(),
            combined: o.e_inspect.to_f64(),
            standalone: per_technique.iter().map(|(t, v)| (t.clone(), v[i])).collect(),
        })
        .collect();

    Ok(Report {
        config: ReportConfig {
            preset: config.preset.to_string(),
            granularity: config.granularity.to_string(),
            seed: config.seed,
            k: config.k,
            cv: config.cv.to_string(),
            faults: faults.len(),
        },
        sources: BTreeMap::new(),
        standalone: standalone_rows,
        levels,
        combined,
        ablation,
        correlation: correlation_matrix(&techniques, &per_technique),
        per_fault,
        timing: None,
    })
}
