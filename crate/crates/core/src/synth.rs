//! Synthetic aligned fixtures for scripted runs and tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fixture::{Fixture, SentenceSpan, SrcWord};

fn build(
    source_id: &str,
    chunk_ms: u32,
    src_words: Vec<SrcWord>,
    targets: Vec<String>,
    alignment: Option<Vec<usize>>,
    sentence_spans: Option<Vec<SentenceSpan>>,
    duration_ms: u64,
) -> Fixture {
    let transcript = src_words
        .iter()
        .map(|w| w.token.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Fixture {
        source_id: source_id.to_string(),
        chunk_ms,
        src_words,
        transcript,
        ref_translation_words: targets,
        alignment,
        sentence_spans,
        duration_ms: Some(duration_ms),
        target_lang: None,
    }
}

/// `n` source words, word `i` ending exactly at the end of chunk `i`, with a
/// one-to-one alignment to `n` target words.
pub fn one_word_per_chunk(source_id: &str, n: u32, chunk_ms: u32) -> Fixture {
    let c = chunk_ms as u64;
    let src_words = (1..=n as u64)
        .map(|i| SrcWord {
            token: format!("s{i}"),
            start_ms: (i - 1) * c,
            end_ms: i * c,
        })
        .collect();
    let targets = (1..=n).map(|i| format!("t{i}")).collect();
    build(source_id, chunk_ms, src_words, targets, None, None, n as u64 * c)
}

/// A stream of `chunks` chunks without speech.
pub fn silence(source_id: &str, chunk_ms: u32, chunks: u32) -> Fixture {
    build(
        source_id,
        chunk_ms,
        Vec::new(),
        Vec::new(),
        None,
        None,
        chunks as u64 * chunk_ms as u64,
    )
}

/// Places each `(token, chunk)` so that the word ends strictly inside that
/// chunk; several words in one chunk are spread evenly across it.
pub fn from_schedule(
    source_id: &str,
    chunk_ms: u32,
    schedule: &[(&str, u32)],
    targets: &[&str],
    alignment: Option<Vec<usize>>,
) -> Fixture {
    let c = chunk_ms as u64;
    let mut src_words = Vec::with_capacity(schedule.len());
    let mut prev_end = 0;
    let mut i = 0;
    while i < schedule.len() {
        let chunk = schedule[i].1 as u64;
        let same = schedule[i..]
            .iter()
            .take_while(|(_, ch)| *ch as u64 == chunk)
            .count() as u64;
        for j in 0..same {
            let end = (chunk - 1) * c + c * (j + 1) / (same + 1);
            src_words.push(SrcWord {
                token: schedule[i + j as usize].0.to_string(),
                start_ms: prev_end,
                end_ms: end,
            });
            prev_end = end;
        }
        i += same as usize;
    }
    let last_chunk = schedule.iter().map(|(_, ch)| *ch).max().unwrap_or(1) as u64;
    build(
        source_id,
        chunk_ms,
        src_words,
        targets.iter().map(|s| s.to_string()).collect(),
        alignment,
        None,
        last_chunk * c,
    )
}

/// Shape of a random document.
#[derive(Debug, Clone, Copy)]
pub struct DocShape {
    pub sentences: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Maximum source words ending inside one chunk.
    pub max_words_per_chunk: usize,
    /// Silent chunks inserted between sentences, `0..=max_gap`.
    pub max_gap: u32,
    /// Probability that a chunk inside a sentence contains no word end.
    pub pause_prob: f64,
}

impl Default for DocShape {
    fn default() -> Self {
        DocShape {
            sentences: 2,
            min_words: 3,
            max_words: 10,
            max_words_per_chunk: 2,
            max_gap: 2,
            pause_prob: 0.15,
        }
    }
}

/// A random multi-sentence document with timestamps, sentence spans and a
/// monotone alignment that never crosses sentence boundaries.
pub fn random_document(source_id: &str, chunk_ms: u32, shape: DocShape, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = chunk_ms as u64;
    let mut src_words: Vec<SrcWord> = Vec::new();
    let mut targets = Vec::new();
    let mut alignment = Vec::new();
    let mut spans = Vec::new();
    let mut chunk: u64 = 0;

    for s in 0..shape.sentences {
        if s > 0 {
            chunk += rng.random_range(0..=shape.max_gap) as u64;
        }
        let len = rng.random_range(shape.min_words..=shape.max_words);
        let first_src = src_words.len() + 1;
        let span_start = chunk * c;
        let mut placed = 0;
        while placed < len {
            chunk += 1;
            if rng.random_bool(shape.pause_prob) {
                continue;
            }
            let here = rng
                .random_range(1..=shape.max_words_per_chunk)
                .min(len - placed);
            for j in 0..here {
                let end = (chunk - 1) * c + c * (j as u64 + 1) / (here as u64 + 1);
                let last = placed + j + 1 == len;
                let punct = if last { ['.', '?', '!', ';'][rng.random_range(0..4)].to_string() } else { String::new() };
                src_words.push(SrcWord {
                    token: format!("w{}x{}{}", s + 1, placed + j + 1, punct),
                    start_ms: src_words.last().map_or(span_start, |w| w.end_ms),
                    end_ms: end,
                });
            }
            placed += here;
        }
        let last_src = src_words.len();

        let tgt_len = rng.random_range(1..=len + 2);
        let mut links: Vec<usize> = (0..tgt_len)
            .map(|_| rng.random_range(first_src..=last_src))
            .collect();
        links.sort_unstable();
        let sentence_targets: Vec<String> = (1..=tgt_len)
            .map(|j| {
                let tail = if j == tgt_len { "." } else { "" };
                format!("y{}x{}{}", s + 1, j, tail)
            })
            .collect();
        spans.push(SentenceSpan {
            start_ms: span_start,
            end_ms: chunk * c,
            reference: sentence_targets.join(" "),
        });
        targets.extend(sentence_targets);
        alignment.extend(links);
    }

    build(
        source_id,
        chunk_ms,
        src_words,
        targets,
        Some(alignment),
        Some(spans),
        chunk.max(1) * c,
    )
}

/// Two sentences of `len1` and `len2` words, one word per chunk, separated by
/// `gap` silent chunks; targets aligned one-to-one.
pub fn two_sentence_document(
    source_id: &str,
    chunk_ms: u32,
    len1: usize,
    len2: usize,
    gap: u32,
) -> Fixture {
    let c = chunk_ms as u64;
    let mut src_words = Vec::new();
    let mut targets = Vec::new();
    let mut spans = Vec::new();
    let mut chunk = 0u64;
    for (s, len) in [len1, len2].into_iter().enumerate() {
        if s == 1 {
            chunk += gap as u64;
        }
        let start = chunk * c;
        let mut sentence = Vec::new();
        for i in 1..=len {
            chunk += 1;
            let tail = if i == len { "." } else { "" };
            src_words.push(SrcWord {
                token: format!("w{}x{}{}", s + 1, i, tail),
                start_ms: (chunk - 1) * c,
                end_ms: chunk * c - c / 4,
            });
            let t = format!("y{}x{}{}", s + 1, i, tail);
            sentence.push(t.clone());
            targets.push(t);
        }
        spans.push(SentenceSpan {
            start_ms: start,
            end_ms: chunk * c,
            reference: sentence.join(" "),
        });
    }
    build(
        source_id,
        chunk_ms,
        src_words,
        targets,
        None,
        Some(spans),
        chunk * c,
    )
}
