//! Aligned dataset records and JSONL manifests.
//!
//! A fixture is one JSON document per source with word-level timestamps, the
//! reference translation and an optional monotone word alignment. A manifest
//! is a JSONL file whose lines are fixture paths (bare JSON strings or
//! `{"path": ...}` objects), relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrcWord {
    pub token: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start_ms: u64,
    pub end_ms: u64,
    #[serde(rename = "ref")]
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub source_id: String,
    pub chunk_ms: u32,
    pub src_words: Vec<SrcWord>,
    pub transcript: String,
    pub ref_translation_words: Vec<String>,
    /// 1-based source index for each target word; proportional when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_spans: Option<Vec<SentenceSpan>>,
    /// Audio length; defaults to the last word or span end rounded up to a chunk.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_lang: Option<String>,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{manifest} line {line}: {message}")]
    Manifest {
        manifest: PathBuf,
        line: usize,
        message: String,
    },
    #[error("fixture `{source_id}`: {message}")]
    Invalid { source_id: String, message: String },
    #[error("manifest {0} lists no fixtures")]
    EmptyManifest(PathBuf),
}

/// Proportional monotone alignment `a(j) = ceil(j * src / tgt)` for `j = 1..=tgt`.
pub fn proportional_alignment(src_len: usize, tgt_len: usize) -> Vec<usize> {
    if tgt_len == 0 {
        return Vec::new();
    }
    (1..=tgt_len)
        .map(|j| (j * src_len).div_ceil(tgt_len).max(1))
        .collect()
}

impl Fixture {
    pub fn validate(&self) -> Result<(), FixtureError> {
        let invalid = |message: String| FixtureError::Invalid {
            source_id: self.source_id.clone(),
            message,
        };
        if self.chunk_ms == 0 {
            return Err(invalid("chunk_ms must be positive".into()));
        }
        for pair in self.src_words.windows(2) {
            if pair[1].end_ms < pair[0].end_ms {
                return Err(invalid(format!(
                    "end_ms decreases at `{}` ({} < {})",
                    pair[1].token, pair[1].end_ms, pair[0].end_ms
                )));
            }
        }
        if let Some(w) = self.src_words.iter().find(|w| w.start_ms > w.end_ms) {
            return Err(invalid(format!("`{}` ends before it starts", w.token)));
        }
        if let Some(w) = self.src_words.iter().find(|w| w.token.split_whitespace().count() != 1) {
            return Err(invalid(format!("source token `{}` is not a single word", w.token)));
        }
        let joined = self.joined_source(self.src_words.len());
        if crate::types::normalize_ws(&self.transcript) != joined {
            return Err(invalid("transcript does not equal the joined source words".into()));
        }
        if let Some(alignment) = &self.alignment {
            if alignment.len() != self.ref_translation_words.len() {
                return Err(invalid(format!(
                    "alignment has {} entries for {} target words",
                    alignment.len(),
                    self.ref_translation_words.len()
                )));
            }
            if alignment
                .iter()
                .any(|&a| a == 0 || a > self.src_words.len())
            {
                return Err(invalid("alignment index outside 1..=|src_words|".into()));
            }
            if alignment.windows(2).any(|p| p[1] < p[0]) {
                return Err(invalid("alignment is not nondecreasing".into()));
            }
        }
        if let Some(spans) = &self.sentence_spans {
            for pair in spans.windows(2) {
                if pair[1].start_ms < pair[0].end_ms {
                    return Err(invalid("sentence spans overlap or are unsorted".into()));
                }
            }
            if spans.iter().any(|s| s.end_ms < s.start_ms) {
                return Err(invalid("sentence span ends before it starts".into()));
            }
        }
        Ok(())
    }

    pub fn duration_ms(&self) -> u64 {
        if let Some(d) = self.duration_ms {
            return d;
        }
        let last_word = self.src_words.last().map_or(0, |w| w.end_ms);
        let last_span = self
            .sentence_spans
            .iter()
            .flatten()
            .map(|s| s.end_ms)
            .max()
            .unwrap_or(0);
        let end = last_word.max(last_span);
        let chunk = self.chunk_ms as u64;
        (end.div_ceil(chunk) * chunk).max(chunk)
    }

    /// Number of chunks covering the audio at the given chunk size.
    pub fn total_chunks(&self, chunk_ms: u32) -> u32 {
        self.duration_ms().div_ceil(chunk_ms as u64).max(1) as u32
    }

    pub fn alignment_or_default(&self) -> Vec<usize> {
        self.alignment.clone().unwrap_or_else(|| {
            proportional_alignment(self.src_words.len(), self.ref_translation_words.len())
        })
    }

    /// Source words ending at or before `t_ms`.
    pub fn words_ended_by(&self, t_ms: u64) -> usize {
        self.src_words.partition_point(|w| w.end_ms <= t_ms)
    }

    /// First `count` source tokens joined with single spaces.
    pub fn joined_source(&self, count: usize) -> String {
        self.src_words[..count]
            .iter()
            .map(|w| w.token.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn reference(&self) -> String {
        self.ref_translation_words.join(" ")
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Fixture, FixtureError> {
        let fixture: Fixture = serde_json::from_str(text).map_err(|source| FixtureError::Json {
            path: origin.to_path_buf(),
            source,
        })?;
        fixture.validate()?;
        Ok(fixture)
    }

    pub fn load(path: &Path) -> Result<Fixture, FixtureError> {
        let text = fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Fixture::from_json_str(&text, path)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestLine {
    Path(String),
    Object { path: String },
}

/// Resolves the fixture paths listed in a manifest.
pub fn manifest_paths(manifest: &Path) -> Result<Vec<PathBuf>, FixtureError> {
    let text = fs::read_to_string(manifest).map_err(|source| FixtureError::Io {
        path: manifest.to_path_buf(),
        source,
    })?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut paths = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestLine =
            serde_json::from_str(line).map_err(|e| FixtureError::Manifest {
                manifest: manifest.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        let raw = match entry {
            ManifestLine::Path(p) | ManifestLine::Object { path: p } => PathBuf::from(p),
        };
        paths.push(if raw.is_absolute() { raw } else { base.join(raw) });
    }
    if paths.is_empty() {
        return Err(FixtureError::EmptyManifest(manifest.to_path_buf()));
    }
    Ok(paths)
}

/// Loads every fixture in a manifest, in manifest order.
pub fn load_manifest(manifest: &Path) -> Result<Vec<Fixture>, FixtureError> {
    manifest_paths(manifest)?
        .iter()
        .map(|p| Fixture::load(p))
        .collect()
}
