//! Streaming chain-of-thought training records.
//!
//! Each fixture yields one record pairing a (possibly truncated) source with
//! its timestamp-derived partial transcript and the *full* reference
//! translation. Streaming records cut the audio at a chunk drawn uniformly
//! from `1..=N`; non-streaming records keep the whole clip. Kinds are
//! assigned greedily so the streaming share of audio time tracks the
//! requested ratio.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::cot_prompt;
use crate::engine::DEFAULT_TARGET_LANG;
use crate::fixture::{Fixture, FixtureError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CotKind {
    Streaming,
    NonStreaming,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotExample {
    pub source_id: String,
    pub truncate_chunk: u32,
    pub truncate_ms: u64,
    pub partial_transcript: String,
    pub full_translation: String,
    pub prompt: String,
    pub kind: CotKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recipe {
    /// Share of audio duration to emit as streaming records, in `[0, 1]`.
    pub streaming_ratio: f64,
}

#[derive(Debug, Error)]
pub enum CotError {
    #[error("stream has no chunks")]
    EmptyStream,
    #[error("no fixtures to build from")]
    EmptyManifest,
    #[error("streaming ratio {0} outside [0, 1]")]
    BadRatio(f64),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Draws a truncation chunk uniformly from `1..=total_chunks`.
pub fn sample_truncation_with<R: Rng>(rng: &mut R, total_chunks: u32) -> Result<u32, CotError> {
    if total_chunks == 0 {
        return Err(CotError::EmptyStream);
    }
    Ok(rng.random_range(1..=total_chunks))
}

pub fn sample_truncation(fixture: &Fixture, seed: u64) -> Result<u32, CotError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_truncation_with(&mut rng, fixture.total_chunks(fixture.chunk_ms))
}

/// Source words whose end time is at or before `t_ms`.
pub fn partial_transcript(fixture: &Fixture, t_ms: u64) -> String {
    fixture.joined_source(fixture.words_ended_by(t_ms))
}

/// Builds one record per fixture, ordered by `source_id`.
pub fn build_dataset(
    fixtures: &[Fixture],
    recipe: Recipe,
    seed: u64,
    default_target_lang: Option<&str>,
) -> Result<Vec<CotExample>, CotError> {
    if fixtures.is_empty() {
        return Err(CotError::EmptyManifest);
    }
    if !(0.0..=1.0).contains(&recipe.streaming_ratio) {
        return Err(CotError::BadRatio(recipe.streaming_ratio));
    }
    let mut ordered: Vec<&Fixture> = fixtures.iter().collect();
    ordered.sort_by(|a, b| a.source_id.cmp(&b.source_id));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen_ms = 0.0;
    let mut streaming_ms = 0.0;
    let mut out = Vec::with_capacity(ordered.len());
    for fixture in ordered {
        let duration = fixture.duration_ms() as f64;
        seen_ms += duration;
        let target = recipe.streaming_ratio * seen_ms;
        let streaming = (streaming_ms + duration - target).abs() < (streaming_ms - target).abs();

        let total = fixture.total_chunks(fixture.chunk_ms);
        // Draw even for non-streaming records so later fixtures see the same stream.
        let drawn = sample_truncation_with(&mut rng, total)?;
        let (kind, chunk) = if streaming {
            streaming_ms += duration;
            (CotKind::Streaming, drawn)
        } else {
            (CotKind::NonStreaming, total)
        };
        let truncate_ms = chunk as u64 * fixture.chunk_ms as u64;
        let partial = match kind {
            CotKind::Streaming => partial_transcript(fixture, truncate_ms),
            CotKind::NonStreaming => fixture.transcript.clone(),
        };
        let lang = fixture
            .target_lang
            .as_deref()
            .or(default_target_lang)
            .unwrap_or(DEFAULT_TARGET_LANG);
        out.push(CotExample {
            source_id: fixture.source_id.clone(),
            truncate_chunk: chunk,
            truncate_ms,
            partial_transcript: partial,
            full_translation: fixture.reference(),
            prompt: cot_prompt(lang),
            kind,
        });
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut out: W, examples: &[CotExample]) -> std::io::Result<()> {
    for e in examples {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn single_chunk_always_samples_one() {
        let f = synth::one_word_per_chunk("one", 1, 640);
        for seed in 0..50 {
            assert_eq!(sample_truncation(&f, seed).unwrap(), 1);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let f = synth::one_word_per_chunk("ten", 10, 640);
        assert_eq!(sample_truncation(&f, 7).unwrap(), sample_truncation(&f, 7).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_truncation_with(&mut rng, 0),
            Err(CotError::EmptyStream)
        ));
    }

    #[test]
    fn partial_transcripts() {
        let f = synth::from_schedule("p", 640, &[("a", 1), ("b", 2), ("c", 3)], &["x"], None);
        assert_eq!(partial_transcript(&f, 0), "");
        assert_eq!(partial_transcript(&f, f.duration_ms()), f.transcript);
        // Between the ends of word 2 and word 3.
        assert_eq!(partial_transcript(&f, 2 * 640), "a b");
    }

    fn corpus(n: usize) -> Vec<Fixture> {
        (0..n)
            .map(|i| synth::one_word_per_chunk(&format!("f{i:02}"), 8, 640))
            .collect()
    }

    #[test]
    fn ratio_controls_kinds() {
        let fixtures = corpus(10);
        let count = |ratio| {
            build_dataset(&fixtures, Recipe { streaming_ratio: ratio }, 3, None)
                .unwrap()
                .iter()
                .filter(|e| e.kind == CotKind::Streaming)
                .count()
        };
        assert_eq!(count(0.0), 0);
        assert_eq!(count(1.0), 10);
        assert!((count(0.5) as i64 - 5).abs() <= 1);
    }

    #[test]
    fn records_keep_full_translation() {
        let fixtures = corpus(6);
        let examples = build_dataset(&fixtures, Recipe { streaming_ratio: 0.5 }, 11, Some("Chinese")).unwrap();
        for (e, f) in examples.iter().zip(&fixtures) {
            assert_eq!(e.full_translation, f.reference());
            assert!(f.transcript.starts_with(&e.partial_transcript));
            assert!(e.prompt.contains("Chinese"));
            if e.kind == CotKind::NonStreaming {
                assert_eq!(e.partial_transcript, f.transcript);
                assert_eq!(e.truncate_chunk, 8);
            }
        }
        assert!(matches!(
            build_dataset(&[], Recipe { streaming_ratio: 0.5 }, 0, None),
            Err(CotError::EmptyManifest)
        ));
    }
}
