//! End-to-end tests against the compiled binary: exit codes, byte-exact
//! reproducibility, manifests, and a full campaign from a scenario file.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use killchain_core::campaign::CampaignReport;
use killchain_core::inversion::InversionResult;
use serde_json::Value;

fn bin(dir: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_killchain"));
    c.current_dir(dir);
    c
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = bin(dir).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "killchain {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json_at(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn no_arguments_exits_2_with_a_synopsis() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "no synopsis on stderr: {err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path())
        .args(["gen", "--bogus", "7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_inputs_are_domain_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path())
        .args(["train", "--data", "nope.csv", "--family", "blr", "--out", "m.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "unexpected stderr: {err}");
}

#[test]
fn generation_is_reproducible_byte_for_byte() {
    // same command, two directories: data and manifests must match exactly
    let gen = [
        "gen", "--kind", "blobs", "--seed", "7", "--per-class", "30", "--dims", "3",
        "--out", "data.csv",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_ok(a.path(), &gen);
    run_ok(b.path(), &gen);
    let csv_a = fs::read(a.path().join("data.csv")).unwrap();
    let csv_b = fs::read(b.path().join("data.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b);
    let man_a = fs::read(a.path().join("data.csv.manifest.json")).unwrap();
    let man_b = fs::read(b.path().join("data.csv.manifest.json")).unwrap();
    assert_eq!(man_a, man_b);
}

#[test]
fn quiet_mode_silences_progress_chatter() {
    let dir = tempfile::tempdir().unwrap();
    let gen = [
        "gen", "--kind", "blobs", "--seed", "3", "--per-class", "5", "--dims", "2",
        "--out", "d.csv",
    ];
    let chatty = bin(dir.path()).args(gen).output().unwrap();
    assert!(String::from_utf8_lossy(&chatty.stderr).contains("wrote"));
    let quiet = bin(dir.path())
        .args(gen)
        .env("KILLCHAIN_LOG", "quiet")
        .output()
        .unwrap();
    assert!(quiet.status.success());
    assert!(quiet.stderr.is_empty());
}

/// gen -> train -> extract, all in-process; the clone of a linear model from
/// exact confidences is exact, so both disagreement rates hit zero.
#[test]
fn a_trained_model_is_cloned_exactly_in_process() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &["gen", "--kind", "blobs", "--seed", "11", "--per-class", "60", "--dims", "3",
          "--out", "data.csv"],
    );
    run_ok(
        dir.path(),
        &["train", "--data", "data.csv", "--family", "blr", "--out", "model.json"],
    );
    run_ok(
        dir.path(),
        &["extract", "--attack", "blr", "--oracle", "inproc:model.json", "--budget", "4",
          "--seed", "3", "--out", "result.json"],
    );
    let doc = json_at(&dir.path().join("result.json"));
    assert_eq!(doc["attack"], "blr");
    assert_eq!(doc["queries_used"], 4);
    assert_eq!(doc["r_test"], 0.0);
    assert_eq!(doc["r_unif"], 0.0);
    let manifest = json_at(&dir.path().join("result.json.manifest.json"));
    assert_eq!(manifest["subcommand"], "extract");
    assert!(manifest["inputs"].get("model.json").is_some());
}

#[test]
fn report_renders_an_extraction_result() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &["gen", "--kind", "blobs", "--seed", "11", "--per-class", "40", "--dims", "2",
          "--out", "data.csv"],
    );
    run_ok(
        dir.path(),
        &["train", "--data", "data.csv", "--family", "blr", "--out", "model.json"],
    );
    run_ok(
        dir.path(),
        &["extract", "--attack", "blr", "--oracle", "inproc:model.json", "--budget", "3",
          "--seed", "1", "--out", "result.json"],
    );
    let out = run_ok(dir.path(), &["report", "--in", "result.json"]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("queries_used"), "{table}");
    assert!(table.contains("1 - r_test"), "{table}");
    assert!(table.contains("1 - r_unif"), "{table}");
}

#[test]
fn invert_writes_the_result_and_its_trace() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &["gen", "--kind", "blobs", "--seed", "21", "--per-class", "50", "--dims", "2",
          "--classes", "3", "--out", "data.csv"],
    );
    run_ok(
        dir.path(),
        &["train", "--data", "data.csv", "--family", "mlr", "--out", "model.json"],
    );
    run_ok(
        dir.path(),
        &["invert", "--model", "model.json", "--class", "1", "--grid", "9", "--passes", "3",
          "--seed", "5", "--out", "inv.json"],
    );
    let result: InversionResult =
        serde_json::from_str(&fs::read_to_string(dir.path().join("inv.json")).unwrap()).unwrap();
    let trace = fs::read_to_string(dir.path().join("inv.trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("step,confidence"));
    assert_eq!(lines.count(), result.trace.len());
}

#[test]
fn sweep_writes_one_row_per_budget_in_input_order() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &["sweep", "--attack", "blr", "--dims", "3", "--classes", "2", "--budgets", "6,4",
          "--trials", "1", "--seed", "5", "--out", "sweep.csv"],
    );
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "budget,fidelity_test,fidelity_unif,mean_queries");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("6,"), "{csv}");
    assert!(lines[2].starts_with("4,"), "{csv}");
}

#[test]
fn the_campaign_runs_from_a_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &["gen", "--kind", "continuum", "--seed", "41", "--per-class", "80", "--variants", "9",
          "--dims", "4", "--out", "traffic.csv"],
    );
    // anchor is the benign-class centroid of traffic.csv; the plant is its
    // grade-0.6 interpolant, malicious but close to the boundary
    fs::write(
        dir.path().join("scenario.toml"),
        r#"
seed = 1817
oracle_budget = 0

[target]
data = "traffic.csv"
family = "blr"

[recon]
probes_total = 12
window_ticks = 16
max_probes_per_window = 4
benign_anchor = [0.4923, 0.8622, 0.4005, 0.5931]

[weaponization]
boundary_band = 0.15
candidate_pool_size = 24

[exploitation]
attack = "blr"
budget = 200

[installation]
rounds = 30
injections_per_round = 8
x_star = [0.4723, 0.4917, 0.5925, 0.4095]

[defender]
detector_window = 16
detector_threshold = 6
retrain_period = 1
self_training_weight = 0.5
drift_samples = 256
"#,
    )
    .unwrap();
    run_ok(
        dir.path(),
        &["campaign", "--config", "scenario.toml", "--out", "report.json"],
    );
    let report: CampaignReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let drift = fs::read_to_string(dir.path().join("report.drift.csv")).unwrap();
    assert_eq!(drift.lines().count(), report.drift_trace.len() + 1);
    let manifest = json_at(&dir.path().join("report.json.manifest.json"));
    assert_eq!(manifest["seeds"]["master"], 1817);
    assert!(manifest["inputs"].get("traffic.csv").is_some());
    assert!(manifest["config"]["target"].get("family").is_some());
    // the rendered table names the phases
    let out = run_ok(dir.path(), &["report", "--in", "report.json"]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("recon"), "{table}");
    assert!(table.contains("drift"), "{table}");
}

struct KillOnDrop(Child);

impl Drop for KillOnDrop {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// Serve a model over TCP, extract against it from a separate process, then
/// shut the server down with SIGINT and expect a clean exit.
#[test]
fn a_served_oracle_answers_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &["gen", "--kind", "blobs", "--seed", "11", "--per-class", "60", "--dims", "3",
          "--out", "data.csv"],
    );
    run_ok(
        dir.path(),
        &["train", "--data", "data.csv", "--family", "blr", "--out", "model.json"],
    );

    let mut server = KillOnDrop(
        bin(dir.path())
            .args(["serve-oracle", "--model", "model.json", "--port", "0"])
            .env("KILLCHAIN_LOG", "quiet")
            .stdout(Stdio::piped())
            .spawn()
            .unwrap(),
    );
    let mut addr = String::new();
    BufReader::new(server.0.stdout.take().unwrap())
        .read_line(&mut addr)
        .unwrap();
    let addr = addr.trim();
    assert!(addr.starts_with("127.0.0.1:"), "bad bind line: {addr}");

    // without a local scoring basis both rates read zero and a note says so
    run_ok(
        dir.path(),
        &["extract", "--attack", "blr", "--oracle", &format!("net:{addr}"), "--dims", "3",
          "--budget", "4", "--seed", "9", "--out", "blind.json"],
    );
    let blind = json_at(&dir.path().join("blind.json"));
    assert_eq!(blind["queries_used"], 4);
    assert!(blind["notes"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n.as_str().unwrap().contains("no scoring basis")));

    // a lab snapshot of the target restores real fidelity scores
    run_ok(
        dir.path(),
        &["extract", "--attack", "blr", "--oracle", &format!("net:{addr}"), "--dims", "3",
          "--budget", "4", "--seed", "9", "--eval-model", "model.json",
          "--out", "scored.json"],
    );
    let scored = json_at(&dir.path().join("scored.json"));
    assert_eq!(scored["r_test"], 0.0);
    assert_eq!(scored["r_unif"], 0.0);

    unsafe {
        libc::kill(server.0.id() as libc::pid_t, libc::SIGINT);
    }
    let status = server.0.wait().unwrap();
    assert!(status.success(), "server exited with {status:?}");
}
