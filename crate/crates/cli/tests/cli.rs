use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::Arc;

use scout_core::catalog;
use scout_core::corpus::load_corpus;
use scout_core::enrich::{EnrichOptions, Enricher, Journal};
use scout_core::llm::LlmGateway;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/corpus.jsonl")
}

fn scout(dir: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scout"));
    c.current_dir(dir)
        .env("SCOUT_MOCK", "1")
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env("SCOUT_LOG", "warn")
        .env_remove("SCOUT_CONFIG");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = scout(dir).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn ingest(dir: &Path, name: &str) {
    run(dir, &["ingest", "--corpus", fixture().to_str().unwrap(), "--out", name]);
}

#[test]
fn resume_matches_an_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ingest(dir, "full.scout");
    run(dir, &["enrich", "--catalog", "full.scout"]);

    // Simulate a run that died after journaling the first 10 datasets.
    ingest(dir, "resumed.scout");
    let journal_path = Journal::path_for(&dir.join("resumed.scout"));
    let records = load_corpus(fixture()).unwrap().records.into_iter().take(10).collect();
    tokio::runtime::Runtime::new().unwrap().block_on(async {
        let (mut journal, done) = Journal::open(&journal_path).unwrap();
        assert!(done.is_empty());
        Enricher::new(Arc::new(LlmGateway::mock()), EnrichOptions::default()).run(records, Some(&mut journal)).await.unwrap();
    });
    let out = run(dir, &["enrich", "--catalog", "resumed.scout", "--resume"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("resuming with 10 journaled datasets"), "{stderr}");
    assert!(stderr.contains("enriched 90 datasets"), "{stderr}");
    assert!(!journal_path.exists());

    let full = catalog::load(dir.join("full.scout")).unwrap();
    let resumed = catalog::load(dir.join("resumed.scout")).unwrap();
    assert_eq!(full.datasets, resumed.datasets);
    assert_eq!(resumed.semantic().count(), 100);
}

#[test]
fn enrich_twice_is_a_no_op() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ingest(dir, "c.scout");
    run(dir, &["enrich", "--catalog", "c.scout"]);
    let before = std::fs::read(dir.join("c.scout")).unwrap();
    let out = run(dir, &["enrich", "--catalog", "c.scout"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("enriched 0 datasets"));
    assert_eq!(std::fs::read(dir.join("c.scout")).unwrap(), before);
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn query_through_a_running_server() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ingest(dir, "c.scout");
    run(dir, &["enrich", "--catalog", "c.scout"]);
    run(dir, &["index", "--catalog", "c.scout", "--out", "c.idx"]);
    std::fs::create_dir(dir.join("ui")).unwrap();
    std::fs::write(dir.join("ui/index.html"), "<html></html>").unwrap();

    let mut child = scout(dir)
        .args(["serve", "--catalog", "c.scout", "--index", "c.idx", "--listen", "127.0.0.1:0", "--static-dir", "ui"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let server = Server(child);
    let url = line.trim().strip_prefix("listening on ").expect("listen line").to_string();

    let local = run(dir, &["query", "movie ratings by genre", "--catalog", "c.scout", "--index", "c.idx", "--json"]);
    let remote = run(dir, &["query", "movie ratings by genre", "--server", &url, "--json"]);
    assert_eq!(local.stdout, remote.stdout);

    let table = run(dir, &["query", "movie ratings by genre", "--server", &url, "--limit", "3"]);
    let text = String::from_utf8_lossy(&table.stdout);
    assert!(text.lines().next().unwrap().starts_with("rank"));
    assert!(text.contains("... 97 more"), "{text}");
    assert!(text.contains("reformulations:"));

    #[cfg(unix)]
    {
        let mut server = server;
        let child = &mut server.0;
        let status = Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
        assert!(status.success());
        assert!(child.wait().unwrap().success());
        assert!(dir.join("c.scout.indicators.jsonl").exists());
    }
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let missing = scout(dir).args(["ingest", "--corpus", "nope.jsonl", "--out", "c.scout"]).output().unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.jsonl"));

    ingest(dir, "c.scout");
    run(dir, &["enrich", "--catalog", "c.scout"]);
    run(dir, &["index", "--catalog", "c.scout", "--out", "c.idx"]);
    for args in [
        vec!["query", "x", "--catalog", "c.scout", "--index", "c.idx", "--filters", "{\"temporal\":\"Decade\"}"],
        vec!["query", "x", "--catalog", "c.scout", "--index", "c.idx", "--task-type", "astrology"],
        vec!["query", "   ", "--catalog", "c.scout", "--index", "c.idx"],
        vec!["query", "x"],
        vec!["serve", "--catalog", "c.scout", "--index", "c.idx", "--static-dir", "missing"],
    ] {
        let out = scout(dir).args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}
