//! Core value types: chunks, streams, transcriptions and policy configuration.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters that close a sentence for the sentence-boundary truncation rule.
pub const DEFAULT_TERMINAL_PUNCT: [char; 4] = ['.', '?', '!', ';'];

/// Segment length cap (in chunks) after which truncation is forced.
pub const DEFAULT_MAX_SEGMENT_CHUNKS: u32 = 30;

/// Number of consecutive identical transcriptions that close a segment.
pub const DEFAULT_STABILITY_WINDOW: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("lag k must be at least 1 (got {0})")]
    LagTooSmall(u32),
    #[error("chunk duration must be positive")]
    ZeroChunk,
    #[error("terminal punctuation set is empty")]
    EmptyPunctuation,
    #[error("stability window must be at least 1")]
    ZeroStabilityWindow,
    #[error("max_segment_chunks ({max}) is smaller than the stability window ({window})")]
    SegmentCapTooSmall { max: u32, window: usize },
    #[error("invalid stream: {0}")]
    Stream(String),
}

/// One fixed-duration slice of source audio. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub index: u32,
    pub duration_ms: u32,
    /// Raw audio bytes, empty in scripted mode.
    pub payload: Vec<u8>,
}

/// The chunked source signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeechStream {
    pub source_id: String,
    pub chunk_ms: u32,
    pub chunks: Vec<Chunk>,
}

impl SpeechStream {
    /// Builds a stream of `total` empty-payload chunks, used with fixture-backed backends.
    pub fn scripted(source_id: impl Into<String>, chunk_ms: u32, total: u32) -> Self {
        let chunks = (1..=total)
            .map(|index| Chunk {
                index,
                duration_ms: chunk_ms,
                payload: Vec::new(),
            })
            .collect();
        SpeechStream {
            source_id: source_id.into(),
            chunk_ms,
            chunks,
        }
    }

    /// Splits raw audio into equal chunks. The last chunk keeps whatever bytes remain.
    pub fn from_audio(
        source_id: impl Into<String>,
        chunk_ms: u32,
        audio: &[u8],
        bytes_per_chunk: usize,
    ) -> Self {
        let chunks = audio
            .chunks(bytes_per_chunk.max(1))
            .enumerate()
            .map(|(i, bytes)| Chunk {
                index: i as u32 + 1,
                duration_ms: chunk_ms,
                payload: bytes.to_vec(),
            })
            .collect();
        SpeechStream {
            source_id: source_id.into(),
            chunk_ms,
            chunks,
        }
    }

    pub fn total_chunks(&self) -> u32 {
        self.chunks.len() as u32
    }

    pub fn duration_ms(&self) -> u64 {
        self.total_chunks() as u64 * self.chunk_ms as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.chunk_ms == 0 {
            return Err(ConfigError::ZeroChunk);
        }
        if self.chunks.is_empty() {
            return Err(ConfigError::Stream("stream has no chunks".into()));
        }
        for (i, chunk) in self.chunks.iter().enumerate() {
            if chunk.index != i as u32 + 1 {
                return Err(ConfigError::Stream(format!(
                    "chunk at position {} has index {}",
                    i + 1,
                    chunk.index
                )));
            }
            if chunk.duration_ms != self.chunk_ms {
                return Err(ConfigError::Stream(format!(
                    "chunk {} lasts {} ms, stream uses {} ms",
                    chunk.index, chunk.duration_ms, self.chunk_ms
                )));
            }
        }
        Ok(())
    }
}

/// A transcribed word. `end_ms` is absent for backends without timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedWord {
    pub token: String,
    pub end_ms: Option<u64>,
}

/// A transcription of the current segment.
///
/// Words are whitespace tokens with punctuation left attached, so `"cats."`
/// counts as one word.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Transcription {
    pub text: String,
    pub words: Vec<TimedWord>,
}

impl Transcription {
    pub fn from_text(text: impl Into<String>) -> Self {
        let text = text.into();
        let words = text
            .split_whitespace()
            .map(|token| TimedWord {
                token: token.to_string(),
                end_ms: None,
            })
            .collect();
        Transcription { text, words }
    }

    pub fn from_timed(words: Vec<TimedWord>) -> Self {
        let text = words
            .iter()
            .map(|w| w.token.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        Transcription { text, words }
    }

    /// Word count `C`.
    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }

    /// Text with runs of whitespace collapsed to single spaces and trimmed.
    pub fn normalized(&self) -> String {
        normalize_ws(&self.text)
    }
}

pub(crate) fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[serde(rename = "streamuni")]
    StreamUni,
    WaitK,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::StreamUni => "streamuni",
            PolicyKind::WaitK => "wait_k",
        })
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "streamuni" => Ok(PolicyKind::StreamUni),
            "wait_k" | "wait-k" | "waitk" => Ok(PolicyKind::WaitK),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

/// Why a segment was closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationRule {
    Stability,
    Sentence,
    Forced,
    EndOfStream,
}

impl fmt::Display for TruncationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruncationRule::Stability => "stability",
            TruncationRule::Sentence => "sentence",
            TruncationRule::Forced => "forced",
            TruncationRule::EndOfStream => "end_of_stream",
        })
    }
}

/// Timestamps attached to events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// `n * chunk_ms`; computation is free.
    #[default]
    Ideal,
    /// Ideal time plus the accumulated measured backend latency.
    WallClock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub k: u32,
    pub chunk_ms: u32,
    pub max_segment_chunks: u32,
    pub stability_window: usize,
    pub terminal_punct: BTreeSet<char>,
    pub policy_kind: PolicyKind,
    /// When false only the generation policy runs (sentence-level input).
    pub truncation_enabled: bool,
    pub clock: ClockMode,
}

impl PolicyConfig {
    pub fn new(k: u32, chunk_ms: u32) -> Self {
        PolicyConfig {
            k,
            chunk_ms,
            max_segment_chunks: DEFAULT_MAX_SEGMENT_CHUNKS,
            stability_window: DEFAULT_STABILITY_WINDOW,
            terminal_punct: DEFAULT_TERMINAL_PUNCT.into_iter().collect(),
            policy_kind: PolicyKind::StreamUni,
            truncation_enabled: true,
            clock: ClockMode::Ideal,
        }
    }

    pub fn wait_k(k: u32, chunk_ms: u32) -> Self {
        PolicyConfig {
            policy_kind: PolicyKind::WaitK,
            truncation_enabled: false,
            ..PolicyConfig::new(k, chunk_ms)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k < 1 {
            return Err(ConfigError::LagTooSmall(self.k));
        }
        if self.chunk_ms == 0 {
            return Err(ConfigError::ZeroChunk);
        }
        if self.terminal_punct.is_empty() {
            return Err(ConfigError::EmptyPunctuation);
        }
        if self.stability_window == 0 {
            return Err(ConfigError::ZeroStabilityWindow);
        }
        if (self.max_segment_chunks as usize) < self.stability_window {
            return Err(ConfigError::SegmentCapTooSmall {
                max: self.max_segment_chunks,
                window: self.stability_window,
            });
        }
        Ok(())
    }

    pub fn is_terminal(&self, c: char) -> bool {
        self.terminal_punct.contains(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_count_keeps_punctuation_attached() {
        let t = Transcription::from_text("  I like   cats. The ");
        assert_eq!(t.word_count(), 4);
        assert_eq!(t.normalized(), "I like cats. The");
        assert_eq!(Transcription::from_text("").word_count(), 0);
    }

    #[test]
    fn config_validation() {
        assert!(PolicyConfig::new(3, 640).validate().is_ok());
        assert!(PolicyConfig::new(9, 320).validate().is_ok());
        assert_eq!(
            PolicyConfig::new(0, 640).validate(),
            Err(ConfigError::LagTooSmall(0))
        );
        let mut cfg = PolicyConfig::new(1, 640);
        cfg.terminal_punct.clear();
        assert_eq!(cfg.validate(), Err(ConfigError::EmptyPunctuation));
        let mut cfg = PolicyConfig::new(1, 640);
        cfg.max_segment_chunks = 2;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::SegmentCapTooSmall { .. })
        ));
    }

    #[test]
    fn scripted_stream_is_valid() {
        let s = SpeechStream::scripted("doc", 640, 5);
        s.validate().unwrap();
        assert_eq!(s.duration_ms(), 3200);
        let mut bad = s.clone();
        bad.chunks.remove(2);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn policy_kind_roundtrip() {
        for kind in [PolicyKind::StreamUni, PolicyKind::WaitK] {
            assert_eq!(kind.to_string().parse::<PolicyKind>().unwrap(), kind);
        }
    }
}
