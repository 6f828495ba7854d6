//! Per-chunk driver for the truncation and generation policies.
//!
//! Every tick the engine transcribes the open segment, decides whether the
//! segment closes, and either flushes the closed segment's translation or
//! lets the translation advance up to `k` words behind the transcription.
//! All state changes go through [`Event`]s applied to a [`SessionState`], so
//! the trace of a run replays to exactly the same state.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{cot_prompt, Backend, BackendError, BackendRequest, RequestMode};
use crate::metrics::EmissionLog;
use crate::policy::{check_truncation, GenerationDecision};
use crate::session::{Segment, SessionState, TraceError};
use crate::trace::Event;
use crate::types::{
    Chunk, ClockMode, ConfigError, PolicyConfig, PolicyKind, SpeechStream, Transcription,
    TruncationRule,
};

pub const DEFAULT_TARGET_LANG: &str = "German";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("expected chunk {expected}, received chunk {found}")]
    OutOfOrder { expected: u32, found: u32 },
    #[error("chunk {chunk}: {source}")]
    Backend {
        chunk: u32,
        #[source]
        source: BackendError,
    },
    #[error("internal trace inconsistency: {0}")]
    Trace(#[from] TraceError),
}

impl EngineError {
    /// Chunk at which a backend call failed.
    pub fn chunk(&self) -> Option<u32> {
        match self {
            EngineError::Backend { chunk, .. } => Some(*chunk),
            _ => None,
        }
    }

    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            EngineError::Backend { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// A failed run with the events that were committed before the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: EngineError,
    pub partial_trace: Vec<Event>,
}

/// Staging area for one tick; dropped on failure so the engine state is untouched.
struct Tick {
    state: SessionState,
    events: Vec<Event>,
    request_seq: u64,
    latency_ms: u64,
    chunk: u32,
}

impl Tick {
    fn push(&mut self, event: Event) -> Result<(), EngineError> {
        let index = self.events.len();
        self.state.apply(index, &event)?;
        self.events.push(event);
        Ok(())
    }
}

pub struct Engine<B> {
    backend: B,
    config: PolicyConfig,
    source_id: String,
    prompt: String,
    state: SessionState,
    trace: Vec<Event>,
    payloads: Vec<Vec<u8>>,
    request_seq: u64,
    latency_ms: u64,
}

impl<B: Backend> Engine<B> {
    pub fn new(
        backend: B,
        config: PolicyConfig,
        source_id: impl Into<String>,
    ) -> Result<Self, EngineError> {
        let state = crate::session::new_session(&config)?;
        Ok(Engine {
            backend,
            config,
            source_id: source_id.into(),
            prompt: cot_prompt(DEFAULT_TARGET_LANG),
            state,
            trace: Vec::new(),
            payloads: Vec::new(),
            request_seq: 0,
            latency_ms: 0,
        })
    }

    pub fn with_target_lang(mut self, target_lang: &str) -> Self {
        self.prompt = cot_prompt(target_lang);
        self
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn trace(&self) -> &[Event] {
        &self.trace
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// Processes the next chunk and returns the events it produced.
    ///
    /// On error the session is left exactly as it was before the call.
    pub fn step(&mut self, chunk: &Chunk) -> Result<Vec<Event>, EngineError> {
        let expected = self.state.current_chunk + 1;
        if chunk.index != expected {
            return Err(EngineError::OutOfOrder {
                expected,
                found: chunk.index,
            });
        }
        self.payloads.push(chunk.payload.clone());
        let mut tick = self.begin(chunk.index);
        let outcome = match self.config.policy_kind {
            PolicyKind::StreamUni => self.streamuni_tick(&mut tick),
            PolicyKind::WaitK => self.wait_k_tick(&mut tick),
        };
        match outcome {
            Ok(()) => Ok(self.commit(tick)),
            Err(e) => {
                self.payloads.pop();
                Err(e)
            }
        }
    }

    /// Closes the open segment at end of stream with a full flush.
    pub fn finish(&mut self) -> Result<Vec<Event>, EngineError> {
        if self.state.current_chunk <= self.state.seg_start {
            return Ok(Vec::new());
        }
        let n = self.state.current_chunk;
        let mut tick = self.begin(n);
        let transcription = tick
            .state
            .queue
            .last()
            .map(|t| t.text.clone())
            .unwrap_or_default();
        self.flush(&mut tick, n, transcription, TruncationRule::EndOfStream)?;
        Ok(self.commit(tick))
    }

    fn begin(&self, chunk: u32) -> Tick {
        Tick {
            state: self.state.clone(),
            events: Vec::new(),
            request_seq: self.request_seq,
            latency_ms: self.latency_ms,
            chunk,
        }
    }

    fn commit(&mut self, tick: Tick) -> Vec<Event> {
        self.state = tick.state;
        self.request_seq = tick.request_seq;
        self.latency_ms = tick.latency_ms;
        self.trace.extend(tick.events.iter().cloned());
        tick.events
    }

    fn now_ms(&self, tick: &Tick) -> u64 {
        let ideal = tick.chunk as u64 * self.config.chunk_ms as u64;
        match self.config.clock {
            ClockMode::Ideal => ideal,
            ClockMode::WallClock => ideal + tick.latency_ms,
        }
    }

    fn request(
        &self,
        tick: &mut Tick,
        mode: RequestMode,
        chunks: (u32, u32),
        transcription: Option<String>,
    ) -> BackendRequest {
        tick.request_seq += 1;
        let chunk_ms = self.config.chunk_ms as u64;
        let audio = self.payloads[(chunks.0 - 1) as usize..chunks.1 as usize].concat();
        BackendRequest {
            request_id: format!("{}:{}:{}", self.source_id, tick.chunk, tick.request_seq),
            source_id: self.source_id.clone(),
            mode,
            chunk_range: chunks,
            window_ms: ((chunks.0 as u64 - 1) * chunk_ms, chunks.1 as u64 * chunk_ms),
            audio,
            transcription,
            committed: tick.state.emitted.iter().map(|e| e.word.clone()).collect(),
            prompt: self.prompt.clone(),
        }
    }

    fn timed<T>(
        &self,
        tick: &mut Tick,
        call: impl FnOnce(&B) -> Result<T, BackendError>,
    ) -> Result<T, EngineError> {
        let started = Instant::now();
        let result = call(&self.backend);
        if self.config.clock == ClockMode::WallClock {
            tick.latency_ms += started.elapsed().as_millis() as u64;
        }
        result.map_err(|source| EngineError::Backend {
            chunk: tick.chunk,
            source,
        })
    }

    fn transcribe(&self, tick: &mut Tick, chunks: (u32, u32)) -> Result<Transcription, EngineError> {
        let req = self.request(tick, RequestMode::Transcribe, chunks, None);
        self.timed(tick, |b| b.transcribe(&req))
    }

    fn translate(
        &self,
        tick: &mut Tick,
        mode: RequestMode,
        chunks: (u32, u32),
        transcription: String,
    ) -> Result<Vec<String>, EngineError> {
        let req = self.request(tick, mode, chunks, Some(transcription));
        let mut words = self.timed(tick, |b| b.translate(&req))?;
        if let RequestMode::TranslateBounded { max_words } = mode {
            words.truncate(max_words);
        }
        Ok(words)
    }

    fn emit(&self, tick: &mut Tick, words: Vec<String>) -> Result<(), EngineError> {
        if words.is_empty() {
            return Ok(());
        }
        let ms = self.now_ms(tick);
        tick.push(Event::EmitWords {
            words,
            chunk: tick.chunk,
            ms,
        })
    }

    fn streamuni_tick(&self, tick: &mut Tick) -> Result<(), EngineError> {
        let n = tick.chunk;
        let seg_start = tick.state.seg_start;
        let current = self.transcribe(tick, (seg_start + 1, n))?;
        let decision = if self.config.truncation_enabled {
            check_truncation(&tick.state.queue, &current, n, seg_start, &self.config)
        } else {
            None
        };
        let ms = self.now_ms(tick);
        tick.push(Event::ReadChunk {
            chunk: n,
            ms,
            transcription: current.text.clone(),
        })?;

        let Some(decision) = decision else {
            return self.generate(tick, &current);
        };

        let closed_transcription = if decision.requires_retranscription {
            tick.state.queue[(decision.a_new - seg_start - 1) as usize]
                .text
                .clone()
        } else {
            current.text.clone()
        };
        self.flush(tick, decision.a_new, closed_transcription, decision.rule)?;

        if decision.requires_retranscription {
            let mut latest = Transcription::default();
            for l in decision.a_new + 1..=n {
                latest = self.transcribe(tick, (decision.a_new + 1, l))?;
                let ms = self.now_ms(tick);
                tick.push(Event::Recompute {
                    chunk: l,
                    ms,
                    transcription: latest.text.clone(),
                })?;
            }
            self.generate(tick, &latest)?;
        }
        Ok(())
    }

    /// Emits the complete translation of chunks `seg_start+1..=a_new` and truncates.
    fn flush(
        &self,
        tick: &mut Tick,
        a_new: u32,
        transcription: String,
        rule: TruncationRule,
    ) -> Result<(), EngineError> {
        let seg_start = tick.state.seg_start;
        let words = self.translate(
            tick,
            RequestMode::TranslateFlush,
            (seg_start + 1, a_new),
            transcription,
        )?;
        self.emit(tick, words)?;
        let b_new = tick.state.total_emitted();
        let ms = self.now_ms(tick);
        tick.push(Event::Truncate {
            rule,
            a_new,
            b_new,
            chunk: tick.chunk,
            ms,
        })
    }

    fn generate(&self, tick: &mut Tick, current: &Transcription) -> Result<(), EngineError> {
        let decision =
            GenerationDecision::new(current.word_count(), self.config.k, tick.state.emitted.len());
        if decision.allowed == 0 {
            return Ok(());
        }
        let seg_start = tick.state.seg_start;
        let words = self.translate(
            tick,
            RequestMode::TranslateBounded {
                max_words: decision.allowed,
            },
            (seg_start + 1, tick.chunk),
            current.text.clone(),
        )?;
        self.emit(tick, words)
    }

    /// Fixed schedule: nothing for chunks `1..k`, then one word per chunk.
    fn wait_k_tick(&self, tick: &mut Tick) -> Result<(), EngineError> {
        let n = tick.chunk;
        let current = self.transcribe(tick, (1, n))?;
        let ms = self.now_ms(tick);
        tick.push(Event::ReadChunk {
            chunk: n,
            ms,
            transcription: current.text.clone(),
        })?;
        if n < self.config.k {
            return Ok(());
        }
        let words = self.translate(
            tick,
            RequestMode::TranslateBounded { max_words: 1 },
            (1, n),
            current.text,
        )?;
        self.emit(tick, words)
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<Event>,
    pub hypothesis: String,
    pub emissions: EmissionLog,
    pub state: SessionState,
}

impl RunOutput {
    fn from_trace(trace: Vec<Event>, state: SessionState, source_duration_ms: u64) -> Self {
        let mut items = Vec::new();
        for event in &trace {
            if let Event::EmitWords { words, ms, .. } = event {
                items.extend(words.iter().map(|w| (w.clone(), *ms)));
            }
        }
        let hypothesis = items
            .iter()
            .map(|(w, _)| w.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        RunOutput {
            trace,
            hypothesis,
            emissions: EmissionLog {
                items,
                source_duration_ms,
            },
            state,
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.state.segments
    }

    pub fn summary(&self, source_id: &str, config: &PolicyConfig, task: Task) -> RunSummary {
        RunSummary {
            source_id: source_id.to_string(),
            policy: config.policy_kind,
            k: config.k,
            chunk_ms: config.chunk_ms,
            task,
            source_duration_ms: self.emissions.source_duration_ms,
            hypothesis: self.hypothesis.clone(),
            emissions: self
                .emissions
                .items
                .iter()
                .map(|(word, ms)| EmittedWord {
                    word: word.clone(),
                    ms: *ms,
                })
                .collect(),
            segments: self.state.segments.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Pre-segmented sentence-level clips.
    Simulst,
    /// Unsegmented documents scored against sentence spans.
    Streamst,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Simulst => "simulst",
            Task::Streamst => "streamst",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulst" => Ok(Task::Simulst),
            "streamst" => Ok(Task::Streamst),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedWord {
    pub word: String,
    pub ms: u64,
}

/// Per-run summary written next to the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub source_id: String,
    pub policy: PolicyKind,
    pub k: u32,
    pub chunk_ms: u32,
    pub task: Task,
    pub source_duration_ms: u64,
    pub hypothesis: String,
    pub emissions: Vec<EmittedWord>,
    pub segments: Vec<Segment>,
}

impl RunSummary {
    pub fn emission_log(&self) -> EmissionLog {
        EmissionLog {
            items: self
                .emissions
                .iter()
                .map(|e| (e.word.clone(), e.ms))
                .collect(),
            source_duration_ms: self.source_duration_ms,
        }
    }
}

fn drive<B: Backend>(
    stream: &SpeechStream,
    backend: B,
    config: &PolicyConfig,
    target_lang: &str,
) -> Result<RunOutput, RunFailure> {
    let fail = |error: EngineError, partial_trace: Vec<Event>| RunFailure {
        error,
        partial_trace,
    };
    stream.validate().map_err(|e| fail(e.into(), Vec::new()))?;
    if stream.chunk_ms != config.chunk_ms {
        return Err(fail(
            ConfigError::Stream(format!(
                "stream chunks last {} ms, policy expects {} ms",
                stream.chunk_ms, config.chunk_ms
            ))
            .into(),
            Vec::new(),
        ));
    }
    let mut engine = Engine::new(backend, config.clone(), stream.source_id.clone())
        .map_err(|e| fail(e, Vec::new()))?
        .with_target_lang(target_lang);
    for chunk in &stream.chunks {
        if let Err(e) = engine.step(chunk) {
            return Err(fail(e, engine.trace.clone()));
        }
    }
    if let Err(e) = engine.finish() {
        return Err(fail(e, engine.trace.clone()));
    }
    let Engine { trace, state, .. } = engine;
    Ok(RunOutput::from_trace(trace, state, stream.duration_ms()))
}

/// Runs the truncation and lag-`k` generation policies over a whole stream.
pub fn run_stream<B: Backend>(
    stream: &SpeechStream,
    backend: B,
    config: &PolicyConfig,
) -> Result<RunOutput, RunFailure> {
    let config = PolicyConfig {
        policy_kind: PolicyKind::StreamUni,
        ..config.clone()
    };
    drive(stream, backend, &config, DEFAULT_TARGET_LANG)
}

/// Wait-k baseline: one word per chunk from chunk `k` on, flush at the end.
pub fn wait_k_policy<B: Backend>(
    stream: &SpeechStream,
    backend: B,
    config: &PolicyConfig,
) -> Result<RunOutput, RunFailure> {
    let config = PolicyConfig {
        policy_kind: PolicyKind::WaitK,
        truncation_enabled: false,
        ..config.clone()
    };
    drive(stream, backend, &config, DEFAULT_TARGET_LANG)
}

/// Dispatches on `config.policy_kind`.
pub fn run_policy<B: Backend>(
    stream: &SpeechStream,
    backend: B,
    config: &PolicyConfig,
    target_lang: &str,
) -> Result<RunOutput, RunFailure> {
    drive(stream, backend, config, target_lang)
}
