//! Python bindings: fixtures, policy configuration, scripted runs and metrics.

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use streamst_core::backend::ScriptedBackend;
use streamst_core::cot::{self, Recipe};
use streamst_core::engine::{run_policy, DEFAULT_TARGET_LANG};
use streamst_core::fixture::SentenceSpan;
use streamst_core::metrics::{self, BleuTokenize, EmissionLog, LatencyReport};
use streamst_core::trace::{read_jsonl, to_jsonl_string};
use streamst_core::{self as core, PolicyKind, SpeechStream, Transcription};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "PolicyConfig", module = "streamst", from_py_object)]
#[derive(Clone)]
struct PyPolicyConfig {
    inner: core::PolicyConfig,
}

#[pymethods]
impl PyPolicyConfig {
    #[new]
    #[pyo3(signature = (k, chunk_ms, policy = "streamuni", max_segment_chunks = 30, stability_window = 3, truncation = true))]
    fn new(
        k: u32,
        chunk_ms: u32,
        policy: &str,
        max_segment_chunks: u32,
        stability_window: usize,
        truncation: bool,
    ) -> PyResult<Self> {
        let kind: PolicyKind = policy.parse().map_err(value_error)?;
        let mut inner = match kind {
            PolicyKind::StreamUni => core::PolicyConfig::new(k, chunk_ms),
            PolicyKind::WaitK => core::PolicyConfig::wait_k(k, chunk_ms),
        };
        inner.max_segment_chunks = max_segment_chunks;
        inner.stability_window = stability_window;
        inner.truncation_enabled = truncation && kind == PolicyKind::StreamUni;
        inner.validate().map_err(value_error)?;
        Ok(PyPolicyConfig { inner })
    }

    #[getter]
    fn k(&self) -> u32 {
        self.inner.k
    }

    #[getter]
    fn chunk_ms(&self) -> u32 {
        self.inner.chunk_ms
    }

    #[getter]
    fn policy(&self) -> String {
        self.inner.policy_kind.to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "PolicyConfig(k={}, chunk_ms={}, policy='{}')",
            self.inner.k, self.inner.chunk_ms, self.inner.policy_kind
        )
    }
}

#[pyclass(name = "Fixture", module = "streamst", from_py_object)]
#[derive(Clone)]
struct PyFixture {
    inner: core::Fixture,
}

#[pymethods]
impl PyFixture {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        core::Fixture::load(Path::new(path))
            .map(|inner| PyFixture { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        core::Fixture::from_json_str(text, Path::new("<string>"))
            .map(|inner| PyFixture { inner })
            .map_err(value_error)
    }

    /// Every fixture listed in a manifest.
    #[staticmethod]
    fn load_manifest(path: &str) -> PyResult<Vec<Self>> {
        streamst_core::fixture::load_manifest(Path::new(path))
            .map(|fs| fs.into_iter().map(|inner| PyFixture { inner }).collect())
            .map_err(value_error)
    }

    #[getter]
    fn source_id(&self) -> String {
        self.inner.source_id.clone()
    }

    #[getter]
    fn chunk_ms(&self) -> u32 {
        self.inner.chunk_ms
    }

    #[getter]
    fn transcript(&self) -> String {
        self.inner.transcript.clone()
    }

    #[getter]
    fn reference(&self) -> String {
        self.inner.reference()
    }

    #[getter]
    fn duration_ms(&self) -> u64 {
        self.inner.duration_ms()
    }

    fn total_chunks(&self, chunk_ms: Option<u32>) -> u32 {
        self.inner.total_chunks(chunk_ms.unwrap_or(self.inner.chunk_ms))
    }

    /// Source words ending at or before `t_ms`.
    fn partial_transcript(&self, t_ms: u64) -> String {
        cot::partial_transcript(&self.inner, t_ms)
    }

    fn __repr__(&self) -> String {
        format!("Fixture('{}', {} ms)", self.inner.source_id, self.inner.duration_ms())
    }
}

#[pyclass(name = "RunResult", module = "streamst")]
struct PyRunResult {
    #[pyo3(get)]
    hypothesis: String,
    /// Trace as JSON lines.
    #[pyo3(get)]
    trace_jsonl: String,
    #[pyo3(get)]
    emissions: Vec<(String, u64)>,
    /// `(a, b, rule)` per closed segment.
    #[pyo3(get)]
    segments: Vec<(u32, usize, String)>,
    #[pyo3(get)]
    duration_ms: u64,
}

#[pymethods]
impl PyRunResult {
    #[pyo3(signature = (ref_len = None))]
    fn latency<'py>(&self, py: Python<'py>, ref_len: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let log = EmissionLog {
            items: self.emissions.clone(),
            source_duration_ms: self.duration_ms,
        };
        let report = metrics::average_lagging(&log, ref_len).map_err(value_error)?;
        latency_dict(py, &report)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult({} words, {} segments)",
            self.emissions.len(),
            self.segments.len()
        )
    }
}

fn latency_dict<'py>(py: Python<'py>, r: &LatencyReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("al_ms", r.al_ms)?;
    d.set_item("laal_ms", r.laal_ms)?;
    d.set_item("tau", r.tau)?;
    d.set_item("gamma", r.gamma)?;
    Ok(d)
}

#[pyfunction]
fn allowed_output_count(source_words: usize, k: u32, already_emitted: usize) -> usize {
    core::allowed_output_count(source_words, k, already_emitted)
}

/// Returns `(rule, a_new, requires_retranscription)` or `None`.
#[pyfunction]
fn check_truncation(
    queue: Vec<String>,
    current: &str,
    n: u32,
    seg_start: u32,
    config: &PyPolicyConfig,
) -> PyResult<Option<(String, u32, bool)>> {
    if n <= seg_start {
        return Err(PyValueError::new_err("n must exceed seg_start"));
    }
    let queue: Vec<Transcription> = queue.into_iter().map(Transcription::from_text).collect();
    let current = Transcription::from_text(current);
    Ok(
        core::check_truncation(&queue, &current, n, seg_start, &config.inner)
            .map(|d| (d.rule.to_string(), d.a_new, d.requires_retranscription)),
    )
}

/// Runs a policy over a fixture with the in-process scripted backend.
#[pyfunction]
#[pyo3(signature = (fixture, config, target_lang = None))]
fn run_scripted(fixture: &PyFixture, config: &PyPolicyConfig, target_lang: Option<&str>) -> PyResult<PyRunResult> {
    let f = &fixture.inner;
    let cfg = &config.inner;
    let stream = SpeechStream::scripted(f.source_id.clone(), cfg.chunk_ms, f.total_chunks(cfg.chunk_ms));
    let lang = target_lang
        .or(f.target_lang.as_deref())
        .unwrap_or(DEFAULT_TARGET_LANG);
    let out = run_policy(&stream, ScriptedBackend::new([f.clone()]), cfg, lang).map_err(value_error)?;
    Ok(PyRunResult {
        trace_jsonl: to_jsonl_string(&out.trace),
        segments: out
            .segments()
            .iter()
            .map(|s| (s.a, s.b, s.rule.to_string()))
            .collect(),
        hypothesis: out.hypothesis,
        duration_ms: out.emissions.source_duration_ms,
        emissions: out.emissions.items,
    })
}

/// Replays a JSONL trace and returns its closed segments.
#[pyfunction]
fn replay(trace_jsonl: &str, config: &PyPolicyConfig) -> PyResult<Vec<(u32, usize, String)>> {
    let events = read_jsonl(trace_jsonl.as_bytes()).map_err(value_error)?;
    let state = core::replay(&events, &config.inner).map_err(value_error)?;
    Ok(state
        .segments
        .iter()
        .map(|s| (s.a, s.b, s.rule.to_string()))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (delays_ms, source_ms, ref_len = None))]
fn average_lagging<'py>(
    py: Python<'py>,
    delays_ms: Vec<f64>,
    source_ms: f64,
    ref_len: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let report = metrics::lagging_from_delays(&delays_ms, source_ms, ref_len).map_err(value_error)?;
    latency_dict(py, &report)
}

#[pyfunction]
#[pyo3(signature = (hypotheses, references, tokenize = "13a"))]
fn corpus_bleu<'py>(
    py: Python<'py>,
    hypotheses: Vec<String>,
    references: Vec<String>,
    tokenize: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let mode: BleuTokenize = tokenize.parse().map_err(value_error)?;
    let b = metrics::corpus_bleu(&hypotheses, &references, mode).map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("score", b.score)?;
    d.set_item("precisions", b.precisions.to_vec())?;
    d.set_item("brevity_penalty", b.brevity_penalty)?;
    d.set_item("hyp_len", b.hyp_len)?;
    d.set_item("ref_len", b.ref_len)?;
    Ok(d)
}

/// Returns `(ends, total_edit_distance)`.
#[pyfunction]
fn mwer_segment(hyp_words: Vec<String>, references: Vec<String>) -> (Vec<usize>, usize) {
    let seg = metrics::mwer_segment(&hyp_words, &references);
    (seg.ends, seg.total_edit_distance)
}

/// `emissions` are `(word, emit_ms)`; `spans` are `(start_ms, end_ms, reference)`.
#[pyfunction]
fn stream_laal<'py>(
    py: Python<'py>,
    emissions: Vec<(String, u64)>,
    duration_ms: u64,
    spans: Vec<(u64, u64, String)>,
) -> PyResult<Bound<'py, PyDict>> {
    let log = EmissionLog {
        items: emissions,
        source_duration_ms: duration_ms,
    };
    let spans: Vec<SentenceSpan> = spans
        .into_iter()
        .map(|(start_ms, end_ms, reference)| SentenceSpan {
            start_ms,
            end_ms,
            reference,
        })
        .collect();
    let r = metrics::stream_laal(&log, &spans).map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("mean_ms", r.mean_ms)?;
    d.set_item("skipped", r.skipped)?;
    d.set_item(
        "per_sentence",
        r.per_sentence
            .iter()
            .map(|s| s.map(|x| x.laal_ms))
            .collect::<Vec<_>>(),
    )?;
    d.set_item("ends", r.segmentation.ends)?;
    Ok(d)
}

/// Chain-of-thought records as JSON lines, ordered by source id.
#[pyfunction]
#[pyo3(signature = (fixtures, ratio, seed, target_lang = None))]
fn build_cot(fixtures: Vec<PyFixture>, ratio: f64, seed: u64, target_lang: Option<&str>) -> PyResult<String> {
    let fixtures: Vec<core::Fixture> = fixtures.into_iter().map(|f| f.inner).collect();
    let examples = cot::build_dataset(
        &fixtures,
        Recipe {
            streaming_ratio: ratio,
        },
        seed,
        target_lang,
    )
    .map_err(value_error)?;
    let mut out = Vec::new();
    cot::write_jsonl(&mut out, &examples).map_err(value_error)?;
    String::from_utf8(out).map_err(value_error)
}

#[pymodule]
fn streamst(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolicyConfig>()?;
    m.add_class::<PyFixture>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(allowed_output_count, m)?)?;
    m.add_function(wrap_pyfunction!(check_truncation, m)?)?;
    m.add_function(wrap_pyfunction!(run_scripted, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(average_lagging, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_bleu, m)?)?;
    m.add_function(wrap_pyfunction!(mwer_segment, m)?)?;
    m.add_function(wrap_pyfunction!(stream_laal, m)?)?;
    m.add_function(wrap_pyfunction!(build_cot, m)?)?;
    Ok(())
}
