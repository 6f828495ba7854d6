use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_streamst"));
    cmd.env_remove("STREAMST_AUTH_TOKEN");
    cmd
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `dir`, relative path to contents.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn summaries(dir: &Path) -> usize {
    snapshot(dir)
        .iter()
        .filter(|(p, _)| p.to_string_lossy().ends_with(".summary.json"))
        .count()
}

/// Manifest of the first `n` sample sentences.
fn manifest_of(dir: &Path, n: usize) -> PathBuf {
    let lines: Vec<String> = (1..=n)
        .map(|i| format!("\"{}\"", s(&data(&format!("fixtures/sent-00{i}.json")))))
        .collect();
    let path = dir.join("manifest.jsonl");
    fs::write(&path, lines.join("\n")).unwrap();
    path
}

#[test]
fn run_writes_one_summary_per_fixture_and_k() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = manifest_of(tmp.path(), 2);
    let out = tmp.path().join("out");
    let r = run(&["run", "--manifest", s(&manifest), "--k", "1,3", "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(summaries(&out), 4);
    assert!(out.join("streamuni_k3_c640/sent-002.trace.jsonl").exists());
}

#[test]
fn eval_produces_sorted_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let manifest = data("manifest.jsonl");
    let r = run(&["run", "--manifest", s(&manifest), "--policy", "wait_k", "--out", s(&out), "--jobs", "2"]);
    assert_eq!(code(&r), 0);
    let r = run(&["eval", "--runs", s(&out), "--manifest", s(&manifest)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("curve.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    let ks: Vec<u32> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(ks, vec![1, 3, 5, 7, 9]);
    let al: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(al.windows(2).all(|w| w[0] <= w[1]), "{al:?}");
    assert!(rows.iter().all(|r| r[3] == "100.000000"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "sentence");
}

#[test]
fn streamst_requires_sentence_spans() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let r = run(&["run", "--manifest", s(&data("manifest.jsonl")), "--task", "streamst", "--out", s(&out)]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("sentence_spans"));
    assert!(!out.exists());
}

#[test]
fn stream_eval_and_mode_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let manifest = data("doc_manifest.jsonl");
    let r = run(&["run", "--manifest", s(&manifest), "--task", "streamst", "--k", "1,2", "--out", s(&out)]);
    assert_eq!(code(&r), 0);
    let r = run(&["eval", "--runs", s(&out), "--manifest", s(&manifest), "--mode", "sentence"]);
    assert_eq!(code(&r), 2);
    let r = run(&["eval", "--runs", s(&out), "--manifest", s(&manifest), "--mode", "stream"]);
    assert_eq!(code(&r), 0);
    let csv = String::from_utf8(r.stdout).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("streamuni,1,640,100.000000,,,"));
}

#[test]
fn missing_summaries_and_bad_flags_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(&["eval", "--runs", s(tmp.path()), "--manifest", s(&data("manifest.jsonl"))]);
    assert_eq!(code(&r), 2);
    let r = run(&["run", "--manifest", s(&data("manifest.jsonl")), "--out", s(tmp.path()), "--k", "0"]);
    assert_eq!(code(&r), 2);
    let r = run(&["run", "--manifest", "/nonexistent.jsonl", "--out", s(tmp.path())]);
    assert_eq!(code(&r), 2);
    let r = run(&["run", "--bogus"]);
    assert_eq!(code(&r), 2);
    let r = run(&["run", "--manifest", s(&data("manifest.jsonl")), "--out", s(tmp.path()), "--backend", "remote"]);
    assert_eq!(code(&r), 2);
}

#[test]
fn unreachable_remote_is_partial_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let r = run(&[
        "run",
        "--manifest",
        s(&data("manifest.jsonl")),
        "--backend",
        "remote",
        "--url",
        &format!("http://127.0.0.1:{port}"),
        "--k",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 1);
    let record: serde_json::Value = serde_json::from_slice(&fs::read(out.join("run.json")).unwrap()).unwrap();
    let failures = record["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 3);
    assert!(failures.iter().all(|f| f["error"].as_str().unwrap().contains("transport")));
}

struct Stub {
    child: Child,
    url: String,
}

impl Drop for Stub {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn stub(extra: &[&str]) -> Stub {
    let mut child = bin()
        .args(["stub-server", "--manifest", s(&data("manifest.jsonl")), "--port", "0"])
        .args(extra)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").unwrap().to_string();
    Stub { child, url }
}

#[test]
fn stub_server_matches_scripted_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = data("manifest.jsonl");
    let local = tmp.path().join("local");
    let remote = tmp.path().join("remote");
    let r = run(&["run", "--manifest", s(&manifest), "--k", "1,3", "--out", s(&local)]);
    assert_eq!(code(&r), 0);
    let server = stub(&[]);
    let r = bin()
        .args(["run", "--manifest", s(&manifest), "--k", "1,3", "--out", s(&remote)])
        .args(["--backend", "remote", "--url", &server.url])
        .env("STREAMST_AUTH_TOKEN", "token")
        .output()
        .unwrap();
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let traces = |dir: &Path| -> Vec<(PathBuf, Vec<u8>)> {
        snapshot(dir)
            .into_iter()
            .filter(|(p, _)| p.to_string_lossy().ends_with(".trace.jsonl"))
            .collect()
    };
    let local_traces = traces(&local);
    assert_eq!(local_traces.len(), 6);
    assert_eq!(local_traces, traces(&remote));
}

#[test]
fn injected_failure_reports_chunk() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let server = stub(&["--fail-on-tick", "3"]);
    let r = run(&[
        "run",
        "--manifest",
        s(&data("manifest.jsonl")),
        "--backend",
        "remote",
        "--url",
        &server.url,
        "--k",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 1);
    let record: serde_json::Value = serde_json::from_slice(&fs::read(out.join("run.json")).unwrap()).unwrap();
    for f in record["failures"].as_array().unwrap() {
        assert_eq!(f["chunk"], 3);
        assert!(f["error"].as_str().unwrap().contains("HTTP 500"));
    }
    assert!(out.join("streamuni_k1_c640/sent-001.partial.trace.jsonl").exists());
}

#[test]
fn runs_and_cot_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = data("manifest.jsonl");
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        assert_eq!(code(&run(&["run", "--manifest", s(&manifest), "--out", s(&out), "--seed", "7"])), 0);
        assert_eq!(code(&run(&["eval", "--runs", s(&out), "--manifest", s(&manifest)])), 0);
        let cot = tmp.path().join(format!("{name}.cot.jsonl"));
        let r = run(&["build-cot", "--manifest", s(&manifest), "--ratio", "0.5", "--seed", "7", "--out", s(&cot)]);
        assert_eq!(code(&r), 0);
        let mut files: Vec<(PathBuf, Vec<u8>)> = snapshot(&out)
            .into_iter()
            .filter(|(p, _)| p != Path::new("run.json"))
            .collect();
        files.push((PathBuf::from("cot"), fs::read(&cot).unwrap()));
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);
    let cot = String::from_utf8(runs[0].last().unwrap().1.clone()).unwrap();
    assert_eq!(cot.lines().count(), 3);
}

#[test]
fn replay_rebuilds_segments() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let manifest = data("doc_manifest.jsonl");
    assert_eq!(code(&run(&["run", "--manifest", s(&manifest), "--k", "1", "--out", s(&out)])), 0);
    let trace = out.join("streamuni_k1_c640/doc-001.trace.jsonl");
    let r = run(&["replay", "--trace", s(&trace), "--k", "1", "--chunk-ms", "640"]);
    assert_eq!(code(&r), 0);
    let state: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("streamuni_k1_c640/doc-001.summary.json")).unwrap()).unwrap();
    assert_eq!(state["segments"], summary["segments"]);

    let broken = tmp.path().join("broken.jsonl");
    let text = fs::read_to_string(&trace).unwrap();
    fs::write(&broken, text.lines().skip(1).collect::<Vec<_>>().join("\n")).unwrap();
    let r = run(&["replay", "--trace", s(&broken), "--k", "1", "--chunk-ms", "640"]);
    assert_eq!(code(&r), 1);
}
