//! Control engine and evaluation harness for streaming speech translation.
//!
//! The engine drives an incremental speech-language model through a
//! transcribe-then-translate cycle per incoming audio chunk. Every chunk the
//! live transcription is compared against a queue of earlier transcriptions
//! to decide whether the current segment should be closed (silence, finished
//! sentence, or a hard length cap). When it is not, translation is allowed to
//! trail the transcription by `k` words.
//!
//! Alongside the engine live the metrics used to score such systems (AL,
//! LAAL, corpus BLEU, edit-distance resegmentation and StreamLAAL) and a
//! builder for streaming chain-of-thought training records.

pub mod backend;
pub mod cot;
pub mod engine;
pub mod fixture;
pub mod metrics;
pub mod policy;
pub mod session;
pub mod synth;
pub mod trace;
pub mod types;

pub use backend::{Backend, BackendError, BackendRequest, RequestMode};
pub use engine::{run_stream, wait_k_policy, Engine, EngineError, RunOutput, RunSummary};
pub use fixture::Fixture;
pub use policy::{allowed_output_count, check_truncation, GenerationDecision, TruncationDecision};
pub use session::{new_session, replay, SessionState, TraceError};
pub use trace::Event;
pub use types::{Chunk, ConfigError, PolicyConfig, PolicyKind, SpeechStream, Transcription, TruncationRule};
