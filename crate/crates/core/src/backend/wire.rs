//! JSON bodies for `POST /v1/transcribe` and `POST /v1/translate`.
//!
//! A translate response lists the segment's whole target hypothesis: the
//! committed words followed by the continuation. A response whose head
//! differs from the committed prefix is a retraction.

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{BackendRequest, RequestMode};

pub const TRANSCRIBE_PATH: &str = "/v1/transcribe";
pub const TRANSLATE_PATH: &str = "/v1/translate";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    #[serde(default)]
    pub request_id: String,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_ref: Option<String>,
    pub window_ms: [u64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcription: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub committed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_words: Option<usize>,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WireResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<String>>,
}

impl WireRequest {
    pub fn from_request(req: &BackendRequest) -> Self {
        let (audio_b64, fixture_ref) = if req.audio.is_empty() {
            (None, Some(req.source_id.clone()))
        } else {
            (
                Some(base64::engine::general_purpose::STANDARD.encode(&req.audio)),
                None,
            )
        };
        let translating = req.mode != RequestMode::Transcribe;
        WireRequest {
            request_id: req.request_id.clone(),
            source_id: req.source_id.clone(),
            audio_b64,
            fixture_ref,
            window_ms: [req.window_ms.0, req.window_ms.1],
            transcription: if translating {
                req.transcription.clone()
            } else {
                None
            },
            committed: translating.then(|| req.committed.join(" ")),
            max_words: match req.mode {
                RequestMode::TranslateBounded { max_words } => Some(max_words),
                _ => None,
            },
            prompt: req.prompt.clone(),
        }
    }

    pub fn committed_words(&self) -> Vec<String> {
        self.committed
            .as_deref()
            .unwrap_or("")
            .split_whitespace()
            .map(str::to_string)
            .collect()
    }

    pub fn path(mode: RequestMode) -> &'static str {
        match mode {
            RequestMode::Transcribe => TRANSCRIBE_PATH,
            _ => TRANSLATE_PATH,
        }
    }
}
