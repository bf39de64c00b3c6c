//! `combinefl`: localize single faults, evaluate corpora, correlate
//! techniques, train and apply combination models, and re-render reports.

use std::fmt::{Display, Write as _};
use std::fs;
use std::hash::Hash;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use combinefl::combiner::{CvStrategy, FaultScores, RankModel, TimeLevelPreset, DEFAULT_K};
use combinefl::harness::report::CorrelationMatrix;
use combinefl::harness::{
    apply_model, available_techniques, correlate, emit_report, evaluate_corpus, ingest_scores,
    lift_fault, load_corpus, localize, score_corpus, train_model, write_scores, CorpusFault,
    CorpusScores, Granularity, PipelineConfig, Report, ReportFormat, ScoreRecord,
};
use combinefl::mbfl::{KillMatrixFile, MutantOutcomeMatrix};
use combinefl::model::{lift_to_method_granularity, rank_elements, MethodId, ScoredList};
use combinefl::sbfl::{Spectrum, SpectrumFile};
use combinefl::stacktrace::{propagate_method_scores, score_methods, StackTraceRecord};
use combinefl::technique::Technique;
use combinefl::{Error, Result};

#[derive(Parser)]
#[command(name = "combinefl", version, about = "Fault localization and learning-to-rank combination")]
struct Cli {
    /// More log output; repeat for debug messages. RUST_LOG overrides.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank the program elements of one fault with one or more techniques.
    Localize(LocalizeArgs),
    /// Score a corpus, cross-validate the combination and report metrics.
    Evaluate(EvaluateArgs),
    /// Pairwise r² of standalone E_inspect values over a corpus.
    Correlate(CorrelateArgs),
    /// Train a combination model on a corpus, or apply a saved one.
    #[command(subcommand)]
    Combine(CombineCommand),
    /// Re-render a saved JSON report.
    Report(ReportArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory with one sub-directory per fault.
    corpus: PathBuf,
    /// Precomputed scores (JSON lines); they replace analysis for their techniques.
    #[arg(long = "scores")]
    scores: Vec<PathBuf>,
    #[arg(long, default_value = "level4")]
    preset: TimeLevelPreset,
    #[arg(long, default_value_t = Granularity::Statement)]
    granularity: Granularity,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for per-fault analyses (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct LocalizeArgs {
    /// Fault directory with `*.ml` sources and, depending on the techniques,
    /// `tests.json`, `report.txt` and `history.json`.
    fault: Option<PathBuf>,
    /// Technique id (repeatable). Default: every technique the inputs allow.
    #[arg(long = "technique", short = 't')]
    techniques: Vec<Technique>,
    /// External spectrum `{elements: [{id, ef, ep, nf, np}]}`; scores ochiai and dstar.
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// External kill matrix `{failing, mutants: [{id, stmt, per_test}]}`; scores metallaxis and muse.
    #[arg(long)]
    kill_matrix: Option<PathBuf>,
    /// External stack traces, one `{test, frames}` object or an array of them.
    #[arg(long)]
    stack_traces: Option<PathBuf>,
    #[arg(long, default_value_t = Granularity::Statement)]
    granularity: Granularity,
    /// Fault id written to JSON-lines output (default: directory name).
    #[arg(long)]
    fault_id: Option<String>,
    /// Show only the first N ranks of each technique.
    #[arg(long)]
    top: Option<usize>,
    /// `text` or `jsonl` (score records accepted by `evaluate --scores`).
    #[arg(long, default_value = "text")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = CvStrategy::Kfold)]
    cv: CvStrategy,
    /// `text`, `json` or `csv`.
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    /// Omit wall-clock measurements so identical runs give identical bytes.
    #[arg(long)]
    mask_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// `text`, `json` or `csv`.
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CombineCommand {
    /// Fit one model on every fault of a corpus and save it as JSON.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank the faults of a corpus with a saved model.
    Apply {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        top: Option<usize>,
        /// `text` or `jsonl`.
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// Report written by `evaluate --format json`.
    report: PathBuf,
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    #[arg(long)]
    mask_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::MissingInputs(items) | Error::MissingFamilies(items) = &e {
                for item in items {
                    eprintln!("  missing: {item}");
                }
            }
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Localize(a) => cmd_localize(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Combine(c) => cmd_combine(c),
        Command::Report(a) => cmd_report(a),
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn render_ranking<E>(out: &mut String, title: &str, list: &ScoredList<E>, top: Option<usize>)
where
    E: Clone + Ord + Hash + Display,
{
    let _ = writeln!(out, "{title}");
    let ranking = rank_elements(list);
    for g in ranking.groups() {
        if top.is_some_and(|n| g.start > n) {
            break;
        }
        let rank = if g.len() == 1 {
            g.start.to_string()
        } else {
            format!("{}-{}", g.start, g.start + g.len() - 1)
        };
        for e in &g.elements {
            let _ = writeln!(out, "  {rank:>7}  {:>10.4}  {e}", g.score);
        }
    }
    out.push('\n');
}

enum Lists {
    Statement(Vec<ScoredList>),
    Method(Vec<ScoredList<MethodId>>),
}

fn cmd_localize(a: LocalizeArgs) -> Result<()> {
    let fault = a.fault.as_deref().map(CorpusFault::load).transpose()?;
    let external = a.spectrum.is_some() || a.kill_matrix.is_some() || a.stack_traces.is_some();
    let mut lists: Vec<ScoredList> = Vec::new();
    let mut method_only: Vec<ScoredList<MethodId>> = Vec::new();

    if let Some(path) = &a.spectrum {
        let spectrum = Spectrum::from_json(&read_json::<SpectrumFile>(path)?)?;
        lists.push(spectrum.score(Technique::Ochiai));
        lists.push(spectrum.score(Technique::DStar));
    }
    if let Some(path) = &a.kill_matrix {
        let matrix = MutantOutcomeMatrix::from_json(&read_json::<KillMatrixFile>(path)?)?;
        lists.push(matrix.score(Technique::Metallaxis));
        lists.push(matrix.score(Technique::Muse));
    }
    if let Some(path) = &a.stack_traces {
        let records = match read_json::<OneOrMany<StackTraceRecord>>(path)? {
            OneOrMany::One(r) => vec![r],
            OneOrMany::Many(rs) => rs,
        };
        let methods = score_methods(&records);
        match &fault {
            Some(f) => lists.push(propagate_method_scores(&methods, &f.program()?.elements())),
            None => method_only.push(methods),
        }
    }
    if let Some(f) = &fault {
        let techniques = if !a.techniques.is_empty() {
            a.techniques.clone()
        } else if external {
            Vec::new()
        } else {
            available_techniques(f)
        };
        lists.extend(localize(f, &techniques)?);
    } else if !external {
        return Err(Error::MissingInputs(vec![
            "fault directory, --spectrum, --kill-matrix or --stack-traces".into(),
        ]));
    }

    let lists = match a.granularity {
        Granularity::Statement => Lists::Statement(lists),
        Granularity::Method => {
            let mut lifted = lists
                .iter()
                .map(lift_to_method_granularity)
                .collect::<Result<Vec<_>>>()?;
            lifted.append(&mut method_only);
            Lists::Method(lifted)
        }
    };
    let fault_id = a
        .fault_id
        .clone()
        .or_else(|| fault.as_ref().map(|f| f.id.clone()))
        .unwrap_or_else(|| "fault".to_string());

    let text = match (a.format.as_str(), &lists) {
        ("text", Lists::Statement(ls)) => {
            let mut out = String::new();
            for l in ls {
                render_ranking(&mut out, l.technique(), l, a.top);
            }
            for l in &method_only {
                render_ranking(&mut out, &format!("{} (methods)", l.technique()), l, a.top);
            }
            out
        }
        ("text", Lists::Method(ls)) => {
            let mut out = String::new();
            for l in ls {
                render_ranking(&mut out, l.technique(), l, a.top);
            }
            out
        }
        ("jsonl", Lists::Statement(ls)) => {
            if !method_only.is_empty() {
                log::warn!("method-level stack-trace scores need a fault directory for JSON lines; skipped");
            }
            let records: Vec<ScoreRecord> =
                ls.iter().map(|l| ScoreRecord::new(fault_id.clone(), l.clone())).collect();
            write_scores(&records)
        }
        ("jsonl", Lists::Method(_)) => {
            return Err(Error::Unknown {
                kind: "output format at method granularity",
                value: "jsonl".into(),
            })
        }
        (other, _) => {
            return Err(Error::Unknown {
                kind: "localize format",
                value: other.into(),
            })
        }
    };
    write_out(a.out.as_deref(), &text)
}

fn load_scores(c: &CorpusArgs, preset: TimeLevelPreset) -> Result<CorpusScores> {
    let corpus = load_corpus(&c.corpus)?;
    let mut records = Vec::new();
    for path in &c.scores {
        records.extend(ingest_scores(path)?);
    }
    score_corpus(&corpus, &records, &preset.families(), c.workers)
}

fn pipeline_config(c: &CorpusArgs, k: usize, cv: CvStrategy) -> PipelineConfig {
    PipelineConfig {
        preset: c.preset,
        granularity: c.granularity,
        seed: c.seed,
        k,
        cv,
        workers: c.workers,
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let config = pipeline_config(&a.corpus, a.k, a.cv);
    let scored = load_scores(&a.corpus, config.preset)?;
    let mut report = evaluate_corpus(&scored, &config)?;
    if a.mask_timing {
        report.mask_timing();
    }
    write_out(a.out.as_deref(), &emit_report(&report, a.format)?)
}

fn render_correlation(m: &CorrelationMatrix, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(m)? + "\n"),
        ReportFormat::Csv => {
            let mut out = String::from("a,b,r2,p,n\n");
            for (i, a) in m.techniques.iter().enumerate() {
                for (j, b) in m.techniques.iter().enumerate() {
                    match &m.cells[i][j] {
                        Some(c) => {
                            let _ = writeln!(out, "{a},{b},{:.6},{:.6},{}", c.r2, c.p, c.n);
                        }
                        None => {
                            let _ = writeln!(out, "{a},{b},,,");
                        }
                    }
                }
            }
            Ok(out)
        }
        ReportFormat::Text => {
            let mut out = String::new();
            for (i, a) in m.techniques.iter().enumerate() {
                for (j, b) in m.techniques.iter().enumerate().skip(i + 1) {
                    match &m.cells[i][j] {
                        Some(c) => {
                            let _ = writeln!(out, "{a:>20}  {b:<20}  r2={:.4}  p={:.4}  n={}", c.r2, c.p, c.n);
                        }
                        None => {
                            let _ = writeln!(out, "{a:>20}  {b:<20}  undefined");
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

fn cmd_correlate(a: CorrelateArgs) -> Result<()> {
    let scored = load_scores(&a.corpus, a.corpus.preset)?;
    let techniques = a.corpus.preset.technique_ids();
    let matrix = match a.corpus.granularity {
        Granularity::Statement => correlate(&scored.faults, &techniques)?,
        Granularity::Method => {
            let lifted = scored.faults.iter().map(lift_fault).collect::<Result<Vec<_>>>()?;
            correlate(&lifted, &techniques)?
        }
    };
    write_out(a.out.as_deref(), &render_correlation(&matrix, a.format)?)
}

type Rankings<E> = Vec<(String, ScoredList<E>)>;

fn apply_all<E>(
    model: &RankModel,
    faults: &[FaultScores<E>],
    top: Option<usize>,
) -> Result<(String, Rankings<E>)>
where
    E: Clone + Ord + Hash + Display,
{
    let mut text = String::new();
    let mut lists = Vec::new();
    for f in faults {
        let combined = apply_model(model, f)?.over_universe(&f.universe);
        render_ranking(&mut text, &format!("{} (combined)", f.id), &combined, top);
        lists.push((f.id.clone(), combined));
    }
    Ok((text, lists))
}

fn cmd_combine(c: CombineCommand) -> Result<()> {
    match c {
        CombineCommand::Train { corpus, out } => {
            let scored = load_scores(&corpus, corpus.preset)?;
            let techniques = corpus.preset.technique_ids();
            let model = match corpus.granularity {
                Granularity::Statement => train_model(&scored.faults, &techniques, corpus.seed)?,
                Granularity::Method => {
                    let lifted = scored.faults.iter().map(lift_fault).collect::<Result<Vec<_>>>()?;
                    train_model(&lifted, &techniques, corpus.seed)?
                }
            };
            write_out(Some(&out), &(model.to_json()? + "\n"))
        }
        CombineCommand::Apply {
            corpus,
            model,
            top,
            format,
            out,
        } => {
            let model = RankModel::from_json(&read_text(&model)?)?;
            let scored = load_scores(&corpus, corpus.preset)?;
            let text = match (corpus.granularity, format.as_str()) {
                (Granularity::Statement, "text") => apply_all(&model, &scored.faults, top)?.0,
                (Granularity::Statement, "jsonl") => {
                    let (_, lists) = apply_all(&model, &scored.faults, None)?;
                    let records: Vec<ScoreRecord> =
                        lists.into_iter().map(|(id, l)| ScoreRecord::new(id, l)).collect();
                    write_scores(&records)
                }
                (Granularity::Method, "text") => {
                    let lifted = scored.faults.iter().map(lift_fault).collect::<Result<Vec<_>>>()?;
                    apply_all(&model, &lifted, top)?.0
                }
                (_, other) => {
                    return Err(Error::Unknown {
                        kind: "combine apply format",
                        value: other.into(),
                    })
                }
            };
            write_out(out.as_deref(), &text)
        }
    }
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let mut report = Report::from_json(&read_text(&a.report)?)?;
    if a.mask_timing {
        report.mask_timing();
    }
    write_out(a.out.as_deref(), &emit_report(&report, a.format)?)
}
