use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bleu::{corpus_bleu, BleuTokenize};
use super::latency::average_lagging;
use super::stream_laal::stream_laal;
use super::MetricError;
use crate::engine::{RunSummary, Task};
use crate::fixture::Fixture;
use crate::types::PolicyKind;

pub const CSV_HEADER: &str = "policy,k,chunk_ms,bleu,al_ms,laal_ms,stream_laal_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Sentence-level clips: BLEU, AL, LAAL.
    Sentence,
    /// Documents: resegmented BLEU and StreamLAAL.
    Stream,
}

impl EvalMode {
    fn task(self) -> Task {
        match self {
            EvalMode::Sentence => Task::Simulst,
            EvalMode::Stream => Task::Streamst,
        }
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalMode::Sentence => "sentence",
            EvalMode::Stream => "stream",
        })
    }
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sentence" => Ok(EvalMode::Sentence),
            "stream" => Ok(EvalMode::Stream),
            other => Err(format!("unknown eval mode `{other}`")),
        }
    }
}

/// One point of a latency-quality curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub policy: PolicyKind,
    pub k: u32,
    pub chunk_ms: u32,
    pub bleu: f64,
    pub al_ms: Option<f64>,
    pub laal_ms: Option<f64>,
    pub stream_laal_ms: Option<f64>,
    pub runs: usize,
    /// Streams (sentence mode) or sentences (stream mode) without any output.
    pub unscored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mode: EvalMode,
    pub tokenize: BleuTokenize,
    pub rows: Vec<CurveRow>,
    pub notes: Vec<String>,
}

impl QualityReport {
    pub fn to_csv(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| format!("{x:.6}")).unwrap_or_default()
        }
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{},{},{}",
                row.policy,
                row.k,
                row.chunk_ms,
                row.bleu,
                cell(row.al_ms),
                cell(row.laal_ms),
                cell(row.stream_laal_ms)
            );
        }
        out
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Aggregates run summaries into one curve row per `(k, chunk_ms, policy)`,
/// sorted by `k`.
pub fn quality_report(
    summaries: &[RunSummary],
    fixtures: &HashMap<String, Fixture>,
    mode: EvalMode,
    tokenize: BleuTokenize,
) -> Result<QualityReport, MetricError> {
    if summaries.is_empty() {
        return Err(MetricError::EmptyRunSet);
    }
    let mut groups: BTreeMap<(u32, u32, String), Vec<&RunSummary>> = BTreeMap::new();
    for s in summaries {
        if s.task != mode.task() {
            return Err(MetricError::ModeMismatch {
                source_id: s.source_id.clone(),
                task: s.task.to_string(),
                mode: mode.to_string(),
            });
        }
        groups
            .entry((s.k, s.chunk_ms, s.policy.to_string()))
            .or_default()
            .push(s);
    }

    let mut rows = Vec::with_capacity(groups.len());
    for runs in groups.values() {
        let first = runs[0];
        let mut hyps = Vec::new();
        let mut refs = Vec::new();
        let mut al = Vec::new();
        let mut laal = Vec::new();
        let mut stream = Vec::new();
        let mut unscored = 0;
        for run in runs {
            let fixture = fixtures
                .get(&run.source_id)
                .ok_or_else(|| MetricError::MissingRefs(run.source_id.clone()))?;
            let log = run.emission_log();
            match mode {
                EvalMode::Sentence => {
                    hyps.push(run.hypothesis.clone());
                    refs.push(fixture.reference());
                    match average_lagging(&log, Some(fixture.ref_translation_words.len())) {
                        Ok(r) => {
                            al.push(r.al_ms);
                            laal.push(r.laal_ms);
                        }
                        Err(MetricError::EmptyLog) => unscored += 1,
                        Err(e) => return Err(e),
                    }
                }
                EvalMode::Stream => {
                    let spans = fixture
                        .sentence_spans
                        .as_ref()
                        .filter(|s| !s.is_empty())
                        .ok_or_else(|| MetricError::MissingRefs(run.source_id.clone()))?;
                    let words = log.words();
                    let seg = super::mwer::mwer_segment(
                        &words,
                        &spans.iter().map(|s| s.reference.as_str()).collect::<Vec<_>>(),
                    );
                    for (piece, span) in seg.pieces(&words).into_iter().zip(spans) {
                        hyps.push(piece.join(" "));
                        refs.push(span.reference.clone());
                    }
                    match stream_laal(&log, spans) {
                        Ok(r) => {
                            unscored += r.skipped;
                            stream.extend(r.scored());
                        }
                        Err(MetricError::Undefined(_)) => unscored += spans.len(),
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        rows.push(CurveRow {
            policy: first.policy,
            k: first.k,
            chunk_ms: first.chunk_ms,
            bleu: corpus_bleu(&hyps, &refs, tokenize)?.score,
            al_ms: mean(&al),
            laal_ms: mean(&laal),
            stream_laal_ms: mean(&stream),
            runs: runs.len(),
            unscored,
        });
    }

    let mut notes = vec![format!(
        "BLEU: corpus-level, no smoothing, {} tokenization",
        match tokenize {
            BleuTokenize::WhitespacePunct => "whitespace+punctuation",
            BleuTokenize::Char => "character",
        }
    )];
    if mode == EvalMode::Stream {
        notes.push("resegmentation on lowercased whitespace tokens; StreamLAAL averaged over all scored sentences".into());
    }
    notes.push("COMET not computed".into());
    Ok(QualityReport {
        mode,
        tokenize,
        rows,
        notes,
    })
}
