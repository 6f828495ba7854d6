//! Latency and quality metrics for streaming translation runs.

mod bleu;
mod latency;
mod mwer;
mod report;
mod stream_laal;

use thiserror::Error;

pub use bleu::{corpus_bleu, tokenize, BleuScore, BleuTokenize};
pub use latency::{average_lagging, lagging_from_delays, EmissionLog, LatencyReport};
pub use mwer::{levenshtein, mwer_segment, Segmentation};
pub use report::{quality_report, CurveRow, EvalMode, QualityReport, CSV_HEADER};
pub use stream_laal::{stream_laal, StreamLaalReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("latency is undefined for an empty emission log")]
    EmptyLog,
    #[error("source duration must be positive")]
    ZeroDuration,
    #[error("{hyps} hypotheses for {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("no sentence spans")]
    NoSpans,
    #[error("invalid sentence spans: {0}")]
    InvalidSpans(String),
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("no reference for source `{0}`")]
    MissingRefs(String),
    #[error("run `{source_id}` was produced for task {task}, cannot evaluate in {mode} mode")]
    ModeMismatch {
        source_id: String,
        task: String,
        mode: String,
    },
    #[error("no runs to evaluate")]
    EmptyRunSet,
}
