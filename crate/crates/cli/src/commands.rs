use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use streamst_core::backend::stub::{FaultPlan, StubServer};
use streamst_core::backend::{RemoteBackend, RemoteConfig, ScriptedBackend};
use streamst_core::cot::{self, Recipe};
use streamst_core::engine::{run_policy, RunSummary, Task};
use streamst_core::fixture::load_manifest;
use streamst_core::metrics::quality_report;
use streamst_core::trace::{read_jsonl, to_jsonl_string};
use streamst_core::{replay as replay_trace, Backend, Fixture, PolicyConfig, PolicyKind, SpeechStream};

use crate::output::{write_atomic, write_json};
use crate::{BackendChoice, BuildCotArgs, CliError, EvalArgs, ReplayArgs, RunArgs, StubArgs, AUTH_TOKEN_ENV};

fn load_fixtures(manifest: &Path) -> Result<Vec<Fixture>, CliError> {
    let fixtures = load_manifest(manifest).map_err(CliError::config)?;
    let mut seen = HashSet::new();
    for f in &fixtures {
        if !seen.insert(f.source_id.as_str()) {
            return Err(CliError::Config(format!(
                "{}: duplicate source_id `{}`",
                manifest.display(),
                f.source_id
            )));
        }
    }
    Ok(fixtures)
}

pub fn run_dir_name(policy: PolicyKind, k: u32, chunk_ms: u32) -> String {
    format!("{policy}_k{k}_c{chunk_ms}")
}

/// Echo of the run configuration, written as `run.json`.
#[derive(Serialize)]
struct RunRecord<'a> {
    manifest: &'a Path,
    backend: &'static str,
    url: Option<&'a str>,
    policy: PolicyKind,
    k: &'a [u32],
    chunk_ms: Option<u32>,
    task: Task,
    seed: u64,
    fixtures: usize,
    completed: usize,
    failures: Vec<RunFailureRecord>,
}

#[derive(Serialize)]
struct RunFailureRecord {
    source_id: String,
    k: u32,
    chunk: Option<u32>,
    error: String,
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    if args.k.is_empty() {
        return Err(CliError::Config("empty k grid".into()));
    }
    let fixtures = load_fixtures(&args.manifest)?;
    let task = Task::from(args.task);
    if task == Task::Streamst {
        if let Some(f) = fixtures
            .iter()
            .find(|f| f.sentence_spans.as_ref().is_none_or(|s| s.is_empty()))
        {
            return Err(CliError::Config(format!(
                "streamst task needs sentence_spans, `{}` has none",
                f.source_id
            )));
        }
    }
    let policy = PolicyKind::from(args.policy);
    let config_for = |k: u32, fixture: &Fixture| {
        let chunk_ms = args.chunk_ms.unwrap_or(fixture.chunk_ms);
        let mut cfg = match policy {
            PolicyKind::StreamUni => PolicyConfig::new(k, chunk_ms),
            PolicyKind::WaitK => PolicyConfig::wait_k(k, chunk_ms),
        };
        cfg.clock = args.clock.into();
        cfg
    };
    for &k in &args.k {
        for f in &fixtures {
            config_for(k, f).validate().map_err(CliError::config)?;
        }
    }

    let backend: Box<dyn Backend> = match args.backend {
        BackendChoice::Scripted => Box::new(ScriptedBackend::new(fixtures.clone())),
        BackendChoice::Remote => {
            let url = args
                .url
                .clone()
                .ok_or_else(|| CliError::Config("--backend remote needs --url".into()))?;
            Box::new(RemoteBackend::new(RemoteConfig {
                timeout: Duration::from_millis(args.timeout_ms),
                auth_token: std::env::var(AUTH_TOKEN_ENV).ok().filter(|t| !t.is_empty()),
                ..RemoteConfig::new(url)
            }))
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(CliError::config)?;

    let jobs: Vec<(u32, &Fixture)> = args
        .k
        .iter()
        .flat_map(|&k| fixtures.iter().map(move |f| (k, f)))
        .collect();
    let results: Vec<Result<(), RunFailureRecord>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(k, fixture)| {
                let cfg = config_for(k, fixture);
                let dir = args.out.join(run_dir_name(policy, k, cfg.chunk_ms));
                let stream = SpeechStream::scripted(
                    fixture.source_id.clone(),
                    cfg.chunk_ms,
                    fixture.total_chunks(cfg.chunk_ms),
                );
                let lang = fixture.target_lang.as_deref().unwrap_or(&args.target_lang);
                let io_failure = |e: std::io::Error| RunFailureRecord {
                    source_id: fixture.source_id.clone(),
                    k,
                    chunk: None,
                    error: e.to_string(),
                };
                match run_policy(&stream, &*backend, &cfg, lang) {
                    Ok(out) => {
                        let base = dir.join(&fixture.source_id);
                        write_atomic(&with_suffix(&base, ".trace.jsonl"), to_jsonl_string(&out.trace).as_bytes())
                            .map_err(io_failure)?;
                        write_json(
                            &with_suffix(&base, ".summary.json"),
                            &out.summary(&fixture.source_id, &cfg, task),
                        )
                        .map_err(io_failure)?;
                        info!("{} k={k}: {} words", fixture.source_id, out.emissions.len());
                        Ok(())
                    }
                    Err(failure) => {
                        let base = dir.join(&fixture.source_id);
                        let partial = to_jsonl_string(&failure.partial_trace);
                        if let Err(e) = write_atomic(&with_suffix(&base, ".partial.trace.jsonl"), partial.as_bytes()) {
                            warn!("cannot keep partial trace for {}: {e}", fixture.source_id);
                        }
                        Err(RunFailureRecord {
                            source_id: fixture.source_id.clone(),
                            k,
                            chunk: failure.error.chunk(),
                            error: failure.error.to_string(),
                        })
                    }
                }
            })
            .collect()
    });

    let completed = results.iter().filter(|r| r.is_ok()).count();
    let failures: Vec<RunFailureRecord> = results.into_iter().filter_map(Result::err).collect();
    for f in &failures {
        eprintln!("{} k={}: {}", f.source_id, f.k, f.error);
    }
    let failed = failures.len();
    let record = RunRecord {
        manifest: &args.manifest,
        backend: match args.backend {
            BackendChoice::Scripted => "scripted",
            BackendChoice::Remote => "remote",
        },
        url: args.url.as_deref(),
        policy,
        k: &args.k,
        chunk_ms: args.chunk_ms,
        task,
        seed: args.seed,
        fixtures: fixtures.len(),
        completed,
        failures,
    };
    write_json(&args.out.join("run.json"), &record).map_err(CliError::config)?;
    println!("{completed} of {} runs completed", jobs.len());
    if failed > 0 {
        return Err(CliError::Partial(format!("{failed} of {} runs failed", jobs.len())));
    }
    Ok(())
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn collect_summaries(dir: &Path, out: &mut BTreeMap<PathBuf, RunSummary>) -> Result<(), CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(CliError::config)?.path();
        if path.is_dir() {
            collect_summaries(&path, out)?;
        } else if path.to_string_lossy().ends_with(".summary.json") {
            let text = fs::read_to_string(&path).map_err(CliError::config)?;
            let summary = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            out.insert(path, summary);
        }
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let mut found = BTreeMap::new();
    collect_summaries(&args.runs, &mut found)?;
    if found.is_empty() {
        return Err(CliError::Config(format!(
            "no run summaries under {}",
            args.runs.display()
        )));
    }
    let summaries: Vec<RunSummary> = found.into_values().collect();
    let fixtures: HashMap<String, Fixture> = load_fixtures(&args.manifest)?
        .into_iter()
        .map(|f| (f.source_id.clone(), f))
        .collect();
    let report = quality_report(&summaries, &fixtures, args.mode.into(), args.tokenize.into())
        .map_err(CliError::config)?;
    let report_path = args.report.clone().unwrap_or_else(|| args.runs.join("report.json"));
    let csv_path = args.csv.clone().unwrap_or_else(|| args.runs.join("curve.csv"));
    write_json(&report_path, &report).map_err(CliError::config)?;
    let csv = report.to_csv();
    write_atomic(&csv_path, csv.as_bytes()).map_err(CliError::config)?;
    print!("{csv}");
    Ok(())
}

pub fn build_cot(args: &BuildCotArgs) -> Result<(), CliError> {
    let fixtures = load_fixtures(&args.manifest)?;
    let examples = cot::build_dataset(
        &fixtures,
        Recipe {
            streaming_ratio: args.ratio,
        },
        args.seed,
        args.target_lang.as_deref(),
    )
    .map_err(CliError::config)?;
    let mut bytes = Vec::new();
    cot::write_jsonl(&mut bytes, &examples).map_err(CliError::config)?;
    write_atomic(&args.out, &bytes).map_err(CliError::config)?;
    println!("{} records written to {}", examples.len(), args.out.display());
    Ok(())
}

pub fn stub_server(args: &StubArgs) -> Result<(), CliError> {
    let fixtures = load_fixtures(&args.manifest)?;
    let faults = FaultPlan {
        delay_ms: args.delay_ms,
        delay_on_tick: args.delay_on_tick,
        fail_on_tick: args.fail_on_tick,
        retract_on_tick: args.retract_on_tick,
    };
    let server = StubServer::start(
        &format!("{}:{}", args.host, args.port),
        ScriptedBackend::new(fixtures),
        faults,
        args.workers,
    )
    .map_err(CliError::config)?;
    println!("listening on {}", server.base_url());
    server.join();
    Ok(())
}

#[derive(Serialize)]
struct ReplayRecord {
    events: usize,
    chunks: u32,
    words: usize,
    segments: Vec<streamst_core::session::Segment>,
    open_segment_start: u32,
}

pub fn replay(args: &ReplayArgs) -> Result<(), CliError> {
    let file = fs::File::open(&args.trace)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.trace.display())))?;
    let events = read_jsonl(BufReader::new(file)).map_err(CliError::config)?;
    let cfg = match PolicyKind::from(args.policy) {
        PolicyKind::StreamUni => PolicyConfig::new(args.k, args.chunk_ms),
        PolicyKind::WaitK => PolicyConfig::wait_k(args.k, args.chunk_ms),
    };
    let state = replay_trace(&events, &cfg).map_err(|e| CliError::Partial(e.to_string()))?;
    let record = ReplayRecord {
        events: events.len(),
        chunks: state.current_chunk,
        words: state.total_emitted(),
        segments: state.segments.clone(),
        open_segment_start: state.seg_start,
    };
    println!("{}", serde_json::to_string_pretty(&record).map_err(CliError::config)?);
    Ok(())
}
