use serde::{Deserialize, Serialize};

use super::MetricError;

/// Emission time of every target word of a run, in emission order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EmissionLog {
    pub items: Vec<(String, u64)>,
    pub source_duration_ms: u64,
}

impl EmissionLog {
    pub fn delays(&self) -> Vec<f64> {
        self.items.iter().map(|(_, ms)| *ms as f64).collect()
    }

    pub fn words(&self) -> Vec<String> {
        self.items.iter().map(|(w, _)| w.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub al_ms: f64,
    pub laal_ms: f64,
    /// Number of words averaged: the first word emitted once the whole
    /// source was available, or every word if none was.
    pub tau: usize,
    /// Hypothesis words per ms of source, the ideal-schedule rate used by AL.
    pub gamma: f64,
}

/// Average Lagging and its length-adaptive variant over an emission log.
pub fn average_lagging(log: &EmissionLog, ref_len: Option<usize>) -> Result<LatencyReport, MetricError> {
    lagging_from_delays(&log.delays(), log.source_duration_ms as f64, ref_len)
}

/// AL and LAAL from raw per-word delays; delays may be negative.
///
/// The ideal schedule emits word `i` after `(i-1) * T / L` ms, with `L` the
/// hypothesis length for AL and `max(hyp, ref)` for LAAL.
pub fn lagging_from_delays(
    delays: &[f64],
    source_ms: f64,
    ref_len: Option<usize>,
) -> Result<LatencyReport, MetricError> {
    if delays.is_empty() {
        return Err(MetricError::EmptyLog);
    }
    if source_ms <= 0.0 {
        return Err(MetricError::ZeroDuration);
    }
    let hyp_len = delays.len();
    let tau = delays
        .iter()
        .position(|&d| d >= source_ms)
        .map_or(hyp_len, |i| i + 1);

    let lag = |len: usize| {
        let step = source_ms / len as f64;
        let total: f64 = delays[..tau]
            .iter()
            .enumerate()
            .map(|(i, &d)| d - i as f64 * step)
            .sum();
        total / tau as f64
    };
    let laal_len = ref_len.map_or(hyp_len, |r| r.max(hyp_len));
    Ok(LatencyReport {
        al_ms: lag(hyp_len),
        laal_ms: lag(laal_len),
        tau,
        gamma: hyp_len as f64 / source_ms,
    })
}
