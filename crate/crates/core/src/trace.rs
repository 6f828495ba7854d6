//! Engine events and their line-delimited JSON form.
//!
//! Each line is a record `{type, chunk, ms, payload}`:
//!
//! | type        | payload                                  |
//! |-------------|------------------------------------------|
//! | `read`      | `{"transcription": "..."}`               |
//! | `emit`      | `{"words": ["..", ..]}`                  |
//! | `truncate`  | `{"rule": "sentence", "a": 4, "b": 7}`   |
//! | `recompute` | `{"transcription": "..."}`               |
//!
//! `chunk` is the chunk tick at which the event happened, except for
//! `recompute` where it names the chunk whose prefix was re-transcribed.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::types::TruncationRule;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    /// Chunk `chunk` arrived and the segment was transcribed as `transcription`.
    ReadChunk {
        chunk: u32,
        ms: u64,
        transcription: String,
    },
    EmitWords {
        words: Vec<String>,
        chunk: u32,
        ms: u64,
    },
    /// Closes the segment ending at source chunk `a_new`; `b_new` is the
    /// absolute target word count emitted once the segment is flushed.
    Truncate {
        rule: TruncationRule,
        a_new: u32,
        b_new: usize,
        chunk: u32,
        ms: u64,
    },
    /// Re-transcription of the residual prefix ending at `chunk` after a
    /// sentence truncation.
    Recompute {
        chunk: u32,
        ms: u64,
        transcription: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(rename = "type")]
    pub kind: String,
    pub chunk: u32,
    pub ms: u64,
    pub payload: Value,
}

#[derive(Debug, Error)]
pub enum TraceFormatError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<&Event> for TraceRecord {
    fn from(event: &Event) -> Self {
        match event {
            Event::ReadChunk {
                chunk,
                ms,
                transcription,
            } => TraceRecord {
                kind: "read".into(),
                chunk: *chunk,
                ms: *ms,
                payload: json!({ "transcription": transcription }),
            },
            Event::EmitWords { words, chunk, ms } => TraceRecord {
                kind: "emit".into(),
                chunk: *chunk,
                ms: *ms,
                payload: json!({ "words": words }),
            },
            Event::Truncate {
                rule,
                a_new,
                b_new,
                chunk,
                ms,
            } => TraceRecord {
                kind: "truncate".into(),
                chunk: *chunk,
                ms: *ms,
                payload: json!({ "rule": rule, "a": a_new, "b": b_new }),
            },
            Event::Recompute {
                chunk,
                ms,
                transcription,
            } => TraceRecord {
                kind: "recompute".into(),
                chunk: *chunk,
                ms: *ms,
                payload: json!({ "transcription": transcription }),
            },
        }
    }
}

impl TryFrom<TraceRecord> for Event {
    type Error = String;

    fn try_from(rec: TraceRecord) -> Result<Self, Self::Error> {
        fn field<'a>(payload: &'a Value, name: &str) -> Result<&'a Value, String> {
            payload
                .get(name)
                .ok_or_else(|| format!("payload missing `{name}`"))
        }
        fn text(payload: &Value, name: &str) -> Result<String, String> {
            field(payload, name)?
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| format!("`{name}` is not a string"))
        }

        let TraceRecord {
            kind,
            chunk,
            ms,
            payload,
        } = rec;
        match kind.as_str() {
            "read" => Ok(Event::ReadChunk {
                chunk,
                ms,
                transcription: text(&payload, "transcription")?,
            }),
            "recompute" => Ok(Event::Recompute {
                chunk,
                ms,
                transcription: text(&payload, "transcription")?,
            }),
            "emit" => {
                let words: Vec<String> = serde_json::from_value(field(&payload, "words")?.clone())
                    .map_err(|e| format!("bad `words`: {e}"))?;
                Ok(Event::EmitWords { words, chunk, ms })
            }
            "truncate" => {
                let rule: TruncationRule = serde_json::from_value(field(&payload, "rule")?.clone())
                    .map_err(|e| format!("bad `rule`: {e}"))?;
                let a_new = field(&payload, "a")?
                    .as_u64()
                    .ok_or("`a` is not an unsigned integer")? as u32;
                let b_new = field(&payload, "b")?
                    .as_u64()
                    .ok_or("`b` is not an unsigned integer")? as usize;
                Ok(Event::Truncate {
                    rule,
                    a_new,
                    b_new,
                    chunk,
                    ms,
                })
            }
            other => Err(format!("unknown event type `{other}`")),
        }
    }
}

pub fn write_jsonl<W: Write>(mut out: W, events: &[Event]) -> std::io::Result<()> {
    for event in events {
        serde_json::to_writer(&mut out, &TraceRecord::from(event))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl_string(events: &[Event]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, events).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Event>, TraceFormatError> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(&line)
            .map_err(|source| TraceFormatError::Json { line: i + 1, source })?;
        let event =
            Event::try_from(rec).map_err(|message| TraceFormatError::Schema { line: i + 1, message })?;
        events.push(event);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_event() -> impl Strategy<Value = Event> {
        let rule = prop_oneof![
            Just(TruncationRule::Stability),
            Just(TruncationRule::Sentence),
            Just(TruncationRule::Forced),
            Just(TruncationRule::EndOfStream),
        ];
        prop_oneof![
            (1u32..100, 0u64..100_000, ".{0,20}").prop_map(|(chunk, ms, transcription)| {
                Event::ReadChunk {
                    chunk,
                    ms,
                    transcription,
                }
            }),
            (prop::collection::vec("\\PC{1,6}", 0..4), 1u32..100, 0u64..100_000)
                .prop_map(|(words, chunk, ms)| Event::EmitWords { words, chunk, ms }),
            (rule, 1u32..100, 0usize..500, 1u32..100, 0u64..100_000).prop_map(
                |(rule, a_new, b_new, chunk, ms)| Event::Truncate {
                    rule,
                    a_new,
                    b_new,
                    chunk,
                    ms
                }
            ),
            (1u32..100, 0u64..100_000, ".{0,20}").prop_map(|(chunk, ms, transcription)| {
                Event::Recompute {
                    chunk,
                    ms,
                    transcription,
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn jsonl_roundtrip(events in prop::collection::vec(arb_event(), 0..20)) {
            let text = to_jsonl_string(&events);
            let back = read_jsonl(text.as_bytes()).unwrap();
            prop_assert_eq!(back, events);
        }
    }

    #[test]
    fn record_layout() {
        let line = to_jsonl_string(&[Event::Truncate {
            rule: TruncationRule::EndOfStream,
            a_new: 6,
            b_new: 6,
            chunk: 6,
            ms: 3840,
        }]);
        assert_eq!(
            line,
            "{\"type\":\"truncate\",\"chunk\":6,\"ms\":3840,\"payload\":{\"a\":6,\"b\":6,\"rule\":\"end_of_stream\"}}\n"
        );
    }

    #[test]
    fn bad_lines_report_line_numbers() {
        let input = "{\"type\":\"read\",\"chunk\":1,\"ms\":640,\"payload\":{\"transcription\":\"\"}}\n{\"type\":\"jump\",\"chunk\":2,\"ms\":0,\"payload\":{}}\n";
        match read_jsonl(input.as_bytes()) {
            Err(TraceFormatError::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
