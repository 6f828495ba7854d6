use serde::{Deserialize, Serialize};

use super::latency::{lagging_from_delays, EmissionLog, LatencyReport};
use super::mwer::{mwer_segment, Segmentation};
use super::MetricError;
use crate::fixture::SentenceSpan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamLaalReport {
    /// `None` for sentences whose resegmented piece is empty.
    pub per_sentence: Vec<Option<LatencyReport>>,
    /// Unweighted mean LAAL over scored sentences.
    pub mean_ms: f64,
    pub skipped: usize,
    pub segmentation: Segmentation,
}

impl StreamLaalReport {
    pub fn scored(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_sentence.iter().flatten().map(|r| r.laal_ms)
    }
}

/// LAAL per reference sentence after resegmenting the document hypothesis.
///
/// Delays are measured from each sentence's start and may be negative when
/// resegmentation assigns a word emitted before the sentence began.
pub fn stream_laal(doc_log: &EmissionLog, spans: &[SentenceSpan]) -> Result<StreamLaalReport, MetricError> {
    if spans.is_empty() {
        return Err(MetricError::NoSpans);
    }
    for (i, pair) in spans.windows(2).enumerate() {
        if pair[1].start_ms < pair[0].end_ms {
            return Err(MetricError::InvalidSpans(format!(
                "span {} starts before span {} ends",
                i + 2,
                i + 1
            )));
        }
    }
    if let Some(i) = spans.iter().position(|s| s.end_ms <= s.start_ms) {
        return Err(MetricError::InvalidSpans(format!("span {} has no duration", i + 1)));
    }

    let words = doc_log.words();
    let refs: Vec<&str> = spans.iter().map(|s| s.reference.as_str()).collect();
    let segmentation = mwer_segment(&words, &refs);

    let mut per_sentence = Vec::with_capacity(spans.len());
    for (span, range) in spans.iter().zip(segmentation.ranges()) {
        if range.is_empty() {
            per_sentence.push(None);
            continue;
        }
        let delays: Vec<f64> = doc_log.items[range]
            .iter()
            .map(|(_, ms)| *ms as f64 - span.start_ms as f64)
            .collect();
        let ref_len = span.reference.split_whitespace().count();
        per_sentence.push(Some(lagging_from_delays(
            &delays,
            (span.end_ms - span.start_ms) as f64,
            Some(ref_len),
        )?));
    }

    let skipped = per_sentence.iter().filter(|r| r.is_none()).count();
    let scored: Vec<f64> = per_sentence.iter().flatten().map(|r| r.laal_ms).collect();
    if scored.is_empty() {
        return Err(MetricError::Undefined(
            "every sentence received an empty hypothesis piece".into(),
        ));
    }
    let mean_ms = scored.iter().sum::<f64>() / scored.len() as f64;
    Ok(StreamLaalReport {
        per_sentence,
        mean_ms,
        skipped,
        segmentation,
    })
}
