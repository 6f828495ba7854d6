use std::collections::HashMap;
use std::sync::Arc;

use super::{Backend, BackendError, BackendRequest, RequestMode};
use crate::fixture::Fixture;
use crate::types::{TimedWord, Transcription};

struct Entry {
    fixture: Fixture,
    alignment: Vec<usize>,
}

/// Deterministic fixture-driven backend.
///
/// Transcription returns the source words whose end time falls inside the
/// request window. Translation releases target word `j` once source word
/// `a(j)` has been heard, continuing after whatever the segment's earlier
/// truncations and the committed prefix already account for. The backend is
/// stateless: everything is derived from the request window and prefix.
#[derive(Clone, Default)]
pub struct ScriptedBackend {
    entries: Arc<HashMap<String, Entry>>,
}

impl ScriptedBackend {
    pub fn new(fixtures: impl IntoIterator<Item = Fixture>) -> Self {
        let entries = fixtures
            .into_iter()
            .map(|fixture| {
                let alignment = fixture.alignment_or_default();
                (fixture.source_id.clone(), Entry { fixture, alignment })
            })
            .collect();
        ScriptedBackend {
            entries: Arc::new(entries),
        }
    }

    fn entry(&self, source_id: &str) -> Result<&Entry, BackendError> {
        self.entries
            .get(source_id)
            .ok_or_else(|| BackendError::UnknownSource {
                source_id: source_id.to_string(),
            })
    }

    pub fn fixture(&self, source_id: &str) -> Option<&Fixture> {
        self.entries.get(source_id).map(|e| &e.fixture)
    }

    /// Source words with `t0 < end_ms <= t1`.
    pub fn transcribe_window(
        &self,
        source_id: &str,
        window_ms: (u64, u64),
    ) -> Result<Transcription, BackendError> {
        let fixture = &self.entry(source_id)?.fixture;
        let (t0, t1) = window_ms;
        let words = fixture
            .src_words
            .iter()
            .filter(|w| w.end_ms > t0 && w.end_ms <= t1)
            .map(|w| TimedWord {
                token: w.token.clone(),
                end_ms: Some(w.end_ms),
            })
            .collect();
        Ok(Transcription::from_timed(words))
    }

    /// Target words eligible once every source word ending by `t_ms` was heard.
    fn eligible(entry: &Entry, t_ms: u64) -> usize {
        let heard = entry.fixture.words_ended_by(t_ms);
        entry.alignment.partition_point(|&a| a <= heard)
    }

    /// Continuation of the segment starting at `window_ms.0`.
    ///
    /// Earlier segments were flushed completely, so the segment's first
    /// target position is the count eligible at its start time.
    pub fn continuation(
        &self,
        request_id: &str,
        source_id: &str,
        window_ms: (u64, u64),
        committed: &[String],
        max_words: Option<usize>,
    ) -> Result<Vec<String>, BackendError> {
        let entry = self.entry(source_id)?;
        let targets = &entry.fixture.ref_translation_words;
        let anchor = Self::eligible(entry, window_ms.0);
        let start = anchor + committed.len();
        let end = Self::eligible(entry, window_ms.1);
        if start > targets.len() || targets[anchor..start] != *committed {
            return Err(BackendError::InvalidRequest {
                request_id: request_id.to_string(),
                message: format!(
                    "committed prefix {committed:?} does not match targets at position {anchor}"
                ),
            });
        }
        let mut out: Vec<String> = targets[start..end.max(start)].to_vec();
        if let Some(max) = max_words {
            out.truncate(max);
        }
        Ok(out)
    }
}

impl Backend for ScriptedBackend {
    fn transcribe(&self, req: &BackendRequest) -> Result<Transcription, BackendError> {
        self.transcribe_window(&req.source_id, req.window_ms)
    }

    fn translate(&self, req: &BackendRequest) -> Result<Vec<String>, BackendError> {
        let max_words = match req.mode {
            RequestMode::TranslateBounded { max_words } => Some(max_words),
            RequestMode::TranslateFlush => None,
            RequestMode::Transcribe => {
                return Err(BackendError::InvalidRequest {
                    request_id: req.request_id.clone(),
                    message: "translate called with transcribe mode".into(),
                })
            }
        };
        self.continuation(
            &req.request_id,
            &req.source_id,
            req.window_ms,
            &req.committed,
            max_words,
        )
    }
}
