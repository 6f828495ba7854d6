use std::time::Duration;

use super::wire::{WireRequest, WireResponse};
use super::{strip_committed, Backend, BackendError, BackendRequest, RequestMode};
use crate::types::Transcription;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub base_url: String,
    pub timeout: Duration,
    /// Sent as `Authorization: Bearer <token>` when set.
    pub auth_token: Option<String>,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteConfig {
            base_url: base_url.into(),
            timeout: DEFAULT_TIMEOUT,
            auth_token: None,
        }
    }
}

/// HTTP client for a remote speech-language model service.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteBackend { config, agent }
    }

    /// Posts one request and parses the response body.
    pub fn remote_roundtrip(&self, req: &BackendRequest) -> Result<WireResponse, BackendError> {
        let url = format!(
            "{}{}",
            self.config.base_url.trim_end_matches('/'),
            WireRequest::path(req.mode)
        );
        let body = WireRequest::from_request(req);
        let request_id = req.request_id.clone();

        let mut call = self.agent.post(&url).header("x-request-id", &request_id);
        if let Some(token) = &self.config.auth_token {
            call = call.header("authorization", format!("Bearer {token}"));
        }
        let mut response = call.send_json(&body).map_err(|e| classify(&request_id, e))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| classify(&request_id, e))?;
        if status >= 400 {
            return Err(BackendError::Status {
                request_id,
                status,
                body: text,
            });
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Malformed {
            request_id,
            message: e.to_string(),
        })
    }
}

fn classify(request_id: &str, error: ureq::Error) -> BackendError {
    let request_id = request_id.to_string();
    match error {
        ureq::Error::Timeout(_) => BackendError::Timeout { request_id },
        ureq::Error::Io(e)
            if matches!(
                e.kind(),
                std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock
            ) =>
        {
            BackendError::Timeout { request_id }
        }
        ureq::Error::StatusCode(status) => BackendError::Status {
            request_id,
            status,
            body: String::new(),
        },
        ureq::Error::Json(e) => BackendError::Malformed {
            request_id,
            message: e.to_string(),
        },
        other => BackendError::Transport {
            request_id,
            message: other.to_string(),
        },
    }
}

impl Backend for RemoteBackend {
    fn transcribe(&self, req: &BackendRequest) -> Result<Transcription, BackendError> {
        let response = self.remote_roundtrip(req)?;
        let text = response.text.ok_or_else(|| BackendError::Malformed {
            request_id: req.request_id.clone(),
            message: "transcribe response lacks `text`".into(),
        })?;
        Ok(Transcription::from_text(text))
    }

    fn translate(&self, req: &BackendRequest) -> Result<Vec<String>, BackendError> {
        let response = self.remote_roundtrip(req)?;
        let full = match (response.words, response.text) {
            (Some(words), _) => words,
            (None, Some(text)) => text.split_whitespace().map(str::to_string).collect(),
            (None, None) => {
                return Err(BackendError::Malformed {
                    request_id: req.request_id.clone(),
                    message: "translate response lacks `words`".into(),
                })
            }
        };
        let mut continuation = strip_committed(&req.request_id, &req.committed, full)?;
        if let RequestMode::TranslateBounded { max_words } = req.mode {
            if continuation.len() > max_words {
                log::warn!(
                    "request {}: service produced {} words, bound is {}; truncating",
                    req.request_id,
                    continuation.len(),
                    max_words
                );
                continuation.truncate(max_words);
            }
        }
        Ok(continuation)
    }
}
