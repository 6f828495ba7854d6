//! Truncation and generation decisions.
//!
//! Both are pure functions of the transcription queue and the current
//! transcription; the engine owns all side effects.

use serde::{Deserialize, Serialize};

use crate::types::{PolicyConfig, Transcription, TruncationRule};

/// A fired truncation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationDecision {
    pub rule: TruncationRule,
    /// New segment start `a_{m+1}`.
    pub a_new: u32,
    /// Set only by the sentence rule: the residual chunks `a_new+1..=n` must
    /// be transcribed again as a fresh segment.
    pub requires_retranscription: bool,
}

/// Decides whether chunk `n` closes the current segment.
///
/// `queue` holds the transcriptions of chunks `seg_start + 1 ..= n - 1` and
/// `current` is the transcription at `n`. Rules are tried in order:
/// stability, sentence boundary (`l = n-1` then `l = n-2`), forced length cap.
pub fn check_truncation(
    queue: &[Transcription],
    current: &Transcription,
    n: u32,
    seg_start: u32,
    config: &PolicyConfig,
) -> Option<TruncationDecision> {
    debug_assert!(n > seg_start);
    let current_text = current.normalized();

    let window = config.stability_window.saturating_sub(1);
    if queue.len() >= window
        && queue[queue.len() - window..]
            .iter()
            .all(|t| t.normalized() == current_text)
    {
        return Some(TruncationDecision {
            rule: TruncationRule::Stability,
            a_new: n,
            requires_retranscription: false,
        });
    }

    for back in 1..=2u32 {
        let Some(l) = n.checked_sub(back) else { break };
        if l <= seg_start {
            break;
        }
        let earlier = &queue[(l - seg_start - 1) as usize];
        if ends_sentence_before(&earlier.normalized(), &current_text, config) {
            return Some(TruncationDecision {
                rule: TruncationRule::Sentence,
                a_new: l,
                requires_retranscription: true,
            });
        }
    }

    if n - seg_start >= config.max_segment_chunks {
        return Some(TruncationDecision {
            rule: TruncationRule::Forced,
            a_new: n,
            requires_retranscription: false,
        });
    }
    None
}

/// `sentence` is complete and `current` starts a new word right after it.
fn ends_sentence_before(sentence: &str, current: &str, config: &PolicyConfig) -> bool {
    let Some(last) = sentence.chars().last() else {
        return false;
    };
    config.is_terminal(last)
        && current.starts_with(sentence)
        && current[sentence.len()..].starts_with(' ')
        && !current[sentence.len()..].trim().is_empty()
}

/// How many target words chunk `n` may emit, with the inputs it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationDecision {
    pub allowed: usize,
    pub source_words: usize,
    pub k: u32,
    pub already_emitted: usize,
}

impl GenerationDecision {
    pub fn new(source_words: usize, k: u32, already_emitted: usize) -> Self {
        GenerationDecision {
            allowed: allowed_output_count(source_words, k, already_emitted),
            source_words,
            k,
            already_emitted,
        }
    }
}

/// `max(0, C - k - already_emitted)`: translation trails the transcription by `k` words.
///
/// Emitted words are never retracted, so a shrinking transcription clamps to zero.
pub fn allowed_output_count(source_words: usize, k: u32, already_emitted: usize) -> usize {
    source_words.saturating_sub(k as usize).saturating_sub(already_emitted)
}
