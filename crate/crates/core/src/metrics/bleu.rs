use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricError;

const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuTokenize {
    /// Whitespace split, punctuation split off into its own tokens.
    #[default]
    WhitespacePunct,
    /// Every non-space character is a token (for Chinese targets).
    Char,
}

impl std::str::FromStr for BleuTokenize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace_punct" | "13a" => Ok(BleuTokenize::WhitespacePunct),
            "char" | "zh" => Ok(BleuTokenize::Char),
            other => Err(format!("unknown tokenizer `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub score: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '，' | '。' | '？' | '！' | '；' | '：' | '、' | '“' | '”' | '‘' | '’' | '«' | '»' | '¿' | '¡' | '…')
}

pub fn tokenize(text: &str, mode: BleuTokenize) -> Vec<String> {
    match mode {
        BleuTokenize::Char => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
        BleuTokenize::WhitespacePunct => {
            let mut tokens = Vec::new();
            for word in text.split_whitespace() {
                let chars: Vec<char> = word.chars().collect();
                let mut current = String::new();
                for (i, &c) in chars.iter().enumerate() {
                    // Keep separators inside numbers such as 3.5 or 1,000.
                    let numeric_sep = matches!(c, '.' | ',')
                        && i > 0
                        && i + 1 < chars.len()
                        && chars[i - 1].is_ascii_digit()
                        && chars[i + 1].is_ascii_digit();
                    if is_punct(c) && !numeric_sep {
                        if !current.is_empty() {
                            tokens.push(std::mem::take(&mut current));
                        }
                        tokens.push(c.to_string());
                    } else {
                        current.push(c);
                    }
                }
                if !current.is_empty() {
                    tokens.push(current);
                }
            }
            tokens
        }
    }
}

fn ngram_counts(tokens: &[String], order: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= order {
        for gram in tokens.windows(order) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU with pooled clipped n-gram counts, no smoothing.
pub fn corpus_bleu(
    hyps: &[String],
    refs: &[String],
    mode: BleuTokenize,
) -> Result<BleuScore, MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let mut hyp_len = 0;
    let mut ref_len = 0;
    for (hyp, reference) in hyps.iter().zip(refs) {
        let h = tokenize(hyp, mode);
        let r = tokenize(reference, mode);
        hyp_len += h.len();
        ref_len += r.len();
        for order in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(&r, order);
            for (gram, count) in ngram_counts(&h, order) {
                matches[order - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            totals[order - 1] += h.len().saturating_sub(order - 1);
        }
    }

    let mut precisions = [0.0; MAX_ORDER];
    for i in 0..MAX_ORDER {
        if totals[i] > 0 {
            precisions[i] = matches[i] as f64 / totals[i] as f64;
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let score = if precisions.contains(&0.0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(BleuScore {
        score,
        precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}
