//! Per-stream session state and event replay.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::Event;
use crate::types::{ConfigError, PolicyConfig, Transcription, TruncationRule};

/// A target word emitted in the current segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emission {
    pub word: String,
    pub chunk: u32,
    pub ms: u64,
}

/// A closed segment: source chunks end at `a`, target words end at `b` (absolute counts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub a: u32,
    pub b: usize,
    pub rule: TruncationRule,
}

/// Mutable state of one engine run.
///
/// `seg_start` and `trans_anchor` are absolute document counters: the source
/// chunk index and the target word count at the last truncation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SessionState {
    pub seg_start: u32,
    pub trans_anchor: usize,
    /// Transcriptions for chunks `seg_start + 1 ..= current_chunk`.
    pub queue: Vec<Transcription>,
    /// Words emitted since the last truncation.
    pub emitted: Vec<Emission>,
    pub current_chunk: u32,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("event {index}: expected chunk {expected}, trace reads chunk {found}")]
    NonConsecutive {
        index: usize,
        expected: u32,
        found: u32,
    },
    #[error("event {index}: truncation at chunk {a_new} outside ({seg_start}, {current}]")]
    TruncateOutOfRange {
        index: usize,
        a_new: u32,
        seg_start: u32,
        current: u32,
    },
    #[error("event {index}: target anchor {b_new} does not match {expected} emitted words")]
    AnchorMismatch {
        index: usize,
        b_new: usize,
        expected: usize,
    },
    #[error("event {index}: recompute for chunk {chunk} outside ({seg_start}, {current}]")]
    RecomputeOutOfRange {
        index: usize,
        chunk: u32,
        seg_start: u32,
        current: u32,
    },
    #[error("event {index}: emission at chunk {chunk} before any chunk was read")]
    EmitBeforeRead { index: usize, chunk: u32 },
}

impl SessionState {
    pub fn segments_closed(&self) -> usize {
        self.segments.len()
    }

    /// Absolute number of target words emitted so far.
    pub fn total_emitted(&self) -> usize {
        self.trans_anchor + self.emitted.len()
    }

    /// Applies one event. `index` is only used for error reporting.
    pub fn apply(&mut self, index: usize, event: &Event) -> Result<(), TraceError> {
        match event {
            Event::ReadChunk {
                chunk,
                transcription,
                ..
            } => {
                if *chunk != self.current_chunk + 1 {
                    return Err(TraceError::NonConsecutive {
                        index,
                        expected: self.current_chunk + 1,
                        found: *chunk,
                    });
                }
                self.current_chunk = *chunk;
                self.queue.push(Transcription::from_text(transcription.clone()));
            }
            Event::EmitWords { words, chunk, ms } => {
                if self.current_chunk == 0 {
                    return Err(TraceError::EmitBeforeRead {
                        index,
                        chunk: *chunk,
                    });
                }
                self.emitted.extend(words.iter().map(|w| Emission {
                    word: w.clone(),
                    chunk: *chunk,
                    ms: *ms,
                }));
            }
            Event::Truncate {
                rule, a_new, b_new, ..
            } => {
                if *a_new <= self.seg_start || *a_new > self.current_chunk {
                    return Err(TraceError::TruncateOutOfRange {
                        index,
                        a_new: *a_new,
                        seg_start: self.seg_start,
                        current: self.current_chunk,
                    });
                }
                let expected = self.total_emitted();
                if *b_new != expected {
                    return Err(TraceError::AnchorMismatch {
                        index,
                        b_new: *b_new,
                        expected,
                    });
                }
                self.queue.clear();
                self.emitted.clear();
                self.seg_start = *a_new;
                self.trans_anchor = *b_new;
                self.segments.push(Segment {
                    a: *a_new,
                    b: *b_new,
                    rule: *rule,
                });
            }
            Event::Recompute {
                chunk,
                transcription,
                ..
            } => {
                if *chunk <= self.seg_start || *chunk > self.current_chunk {
                    return Err(TraceError::RecomputeOutOfRange {
                        index,
                        chunk: *chunk,
                        seg_start: self.seg_start,
                        current: self.current_chunk,
                    });
                }
                self.queue.push(Transcription::from_text(transcription.clone()));
            }
        }
        Ok(())
    }
}

/// Fresh state for a run under `config`.
pub fn new_session(config: &PolicyConfig) -> Result<SessionState, ConfigError> {
    config.validate()?;
    Ok(SessionState::default())
}

/// Rebuilds the state reached by applying `events` to a fresh session.
pub fn replay(events: &[Event], config: &PolicyConfig) -> Result<SessionState, ReplayError> {
    let mut state = new_session(config)?;
    for (i, event) in events.iter().enumerate() {
        state.apply(i, event)?;
    }
    Ok(state)
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}
