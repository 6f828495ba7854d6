//! The incremental model behind the engine.
//!
//! Speech chain-of-thought is split into two calls per tick: transcribe the
//! current segment's audio, then continue the translation conditioned on that
//! transcription and on the words already committed in the segment.

mod remote;
mod scripted;
pub mod stub;
pub mod wire;

use std::fmt;

use thiserror::Error;

pub use remote::{RemoteBackend, RemoteConfig, DEFAULT_TIMEOUT};
pub use scripted::ScriptedBackend;

use crate::types::Transcription;

/// Chain-of-thought instruction; `{target_lang}` is substituted per request.
pub const COT_PROMPT_TEMPLATE: &str = "Transcribe the audio to text, and then translate the audio to {target_lang}. Use <sep> as a separator between the original transcript and the translation.";

pub fn cot_prompt(target_lang: &str) -> String {
    COT_PROMPT_TEMPLATE.replace("{target_lang}", target_lang)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestMode {
    Transcribe,
    /// Continue the translation by at most `max_words` words.
    TranslateBounded { max_words: usize },
    /// Complete the translation of a closed segment.
    TranslateFlush,
}

/// One stateless call: the full segment is resent every tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendRequest {
    pub request_id: String,
    pub source_id: String,
    pub mode: RequestMode,
    /// Chunks `first..=last` of the segment.
    pub chunk_range: (u32, u32),
    /// Absolute segment window `(t0, t1]` in ms.
    pub window_ms: (u64, u64),
    /// Concatenated chunk payloads; empty for fixture-backed runs.
    pub audio: Vec<u8>,
    /// Transcription produced at the same tick (translate modes).
    pub transcription: Option<String>,
    /// Words already emitted in this segment, which the backend must extend.
    pub committed: Vec<String>,
    pub prompt: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendErrorKind {
    Timeout,
    Transport,
    Status,
    Malformed,
    Retraction,
    UnknownSource,
    InvalidRequest,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("request {request_id}: timed out")]
    Timeout { request_id: String },
    #[error("request {request_id}: transport error: {message}")]
    Transport { request_id: String, message: String },
    #[error("request {request_id}: service returned HTTP {status}: {body}")]
    Status {
        request_id: String,
        status: u16,
        body: String,
    },
    #[error("request {request_id}: malformed response: {message}")]
    Malformed { request_id: String, message: String },
    #[error("request {request_id}: translation does not extend the committed prefix {committed:?} (got {received:?})")]
    Retraction {
        request_id: String,
        committed: Vec<String>,
        received: Vec<String>,
    },
    #[error("unknown source `{source_id}`")]
    UnknownSource { source_id: String },
    #[error("request {request_id}: {message}")]
    InvalidRequest { request_id: String, message: String },
}

impl BackendError {
    pub fn kind(&self) -> BackendErrorKind {
        match self {
            BackendError::Timeout { .. } => BackendErrorKind::Timeout,
            BackendError::Transport { .. } => BackendErrorKind::Transport,
            BackendError::Status { .. } => BackendErrorKind::Status,
            BackendError::Malformed { .. } => BackendErrorKind::Malformed,
            BackendError::Retraction { .. } => BackendErrorKind::Retraction,
            BackendError::UnknownSource { .. } => BackendErrorKind::UnknownSource,
            BackendError::InvalidRequest { .. } => BackendErrorKind::InvalidRequest,
        }
    }
}

impl fmt::Display for BackendErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// An incremental speech-language model.
///
/// Implementations must tolerate concurrent calls from independent sessions.
pub trait Backend: Send + Sync {
    fn transcribe(&self, req: &BackendRequest) -> Result<Transcription, BackendError>;

    /// Continuation words only; never repeats `req.committed`.
    fn translate(&self, req: &BackendRequest) -> Result<Vec<String>, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn transcribe(&self, req: &BackendRequest) -> Result<Transcription, BackendError> {
        (**self).transcribe(req)
    }

    fn translate(&self, req: &BackendRequest) -> Result<Vec<String>, BackendError> {
        (**self).translate(req)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn transcribe(&self, req: &BackendRequest) -> Result<Transcription, BackendError> {
        (**self).transcribe(req)
    }

    fn translate(&self, req: &BackendRequest) -> Result<Vec<String>, BackendError> {
        (**self).translate(req)
    }
}

/// Strips a committed prefix from a full segment hypothesis.
pub(crate) fn strip_committed(
    request_id: &str,
    committed: &[String],
    full: Vec<String>,
) -> Result<Vec<String>, BackendError> {
    if full.len() < committed.len() || full[..committed.len()] != *committed {
        return Err(BackendError::Retraction {
            request_id: request_id.to_string(),
            committed: committed.to_vec(),
            received: full,
        });
    }
    Ok(full[committed.len()..].to_vec())
}
