//! Corpus ingestion, pipeline orchestration and reports.

pub mod analysis;
pub mod corpus;
pub mod ingest;
pub mod pipeline;
pub mod report;

pub use analysis::{analyze_fault, available_techniques, families_of, localize, FaultAnalysis};
pub use corpus::{load_corpus, CorpusFault, TruthFile};
pub use ingest::{ingest_scores, parse_scores, write_scores, ScoreRecord};
pub use pipeline::{
    apply_model, build_report, correlate, evaluate_corpus, lift_fault, run_pipeline, score_corpus,
    train_model, CorpusScores, Granularity, PipelineConfig,
};
pub use report::{emit_report, Report, ReportFormat};
