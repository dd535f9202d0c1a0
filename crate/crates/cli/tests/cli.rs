use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use crew_cli::experiment::{TrialRow, MANIFEST_JSON, REPORT_JSON, REPORT_TXT, TRIALS_CSV};
use crew_cli::{load_instance, read_csv, ScheduleFile};
use crew_core::domain::validate_schedule;
use crew_core::io::{read_artifact, FORMAT_VERSION};
use serde_json::Value;
use tempfile::TempDir;

const DEMO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/demo_instance.json");

fn crew(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crew")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A briefly trained policy, shared by the tests that need one.
fn weights() -> &'static Path {
    static W: OnceLock<PathBuf> = OnceLock::new();
    W.get_or_init(|| {
        let path = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-test-weights.json");
        let out = crew(&["train", "--episodes", "64", "--seed", "3", "--out", p(&path)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        path
    })
}

#[test]
fn baseline_schedule_on_the_demo_instance() {
    let dir = TempDir::new().unwrap();
    let sched = dir.path().join("s.json");
    let out = crew(&["schedule", "--instance", DEMO, "--method", "baseline", "--out", p(&sched)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let inst = load_instance(Path::new(DEMO)).unwrap();
    let file: ScheduleFile = read_artifact(&sched, "schedule").unwrap().payload;
    assert!(file.schedule.complete);
    assert_eq!(file.schedule.assignment.len(), inst.slots.len());
    assert!(validate_schedule(&inst, &file.schedule).is_empty());

    let dis = dir.path().join("d.json");
    let out = crew(&[
        "disrupt", "--instance", DEMO, "--schedule", p(&sched), "--fraction-delayed", "1", "--out", p(&dis),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (path, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        assert_eq!(code(&crew(&["gen", "--seed", seed, "--out", p(path)])), 0);
    }
    let read = |x: &Path| std::fs::read(x).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.json");
    assert_eq!(code(&crew(&["--help"])), 0);
    assert_eq!(code(&crew(&["frobnicate"])), 2);
    assert_eq!(code(&crew(&["schedule", "--instance", "/nonexistent.json", "--method", "baseline", "--out", p(&out)])), 2);
    assert_eq!(code(&crew(&["schedule", "--instance", DEMO, "--method", "nice", "--out", p(&out)])), 2);
    assert_eq!(code(&crew(&["experiment", "--trials", "0", "--out", p(dir.path())])), 2);
    assert_eq!(code(&crew(&["experiment", "--fraction-delayed", "1.5", "--out", p(dir.path())])), 2);
    // Valid inputs, unwritable destination.
    let blocked = dir.path().join("file");
    std::fs::write(&blocked, "").unwrap();
    let out = blocked.join("s.json");
    assert_eq!(code(&crew(&["schedule", "--instance", DEMO, "--method", "baseline", "--out", p(&out)])), 1);
}

#[test]
fn experiment_without_buffer_omits_its_column() {
    let dir = TempDir::new().unwrap();
    let out = crew(&[
        "experiment", "--density", "2", "--trials", "3", "--method", "baseline,nice,rl", "--fraction-delayed", "0.5",
        "--time-limit-secs", "5", "--weights", p(weights()), "--out", p(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join(REPORT_TXT)).unwrap();
    let header = report.lines().find(|l| l.trim_start().starts_with("f(%)")).unwrap();
    assert!(header.contains("baseline") && header.contains("nice"));
    assert!(!header.contains("buffer"));
}

/// Re-running from the manifest, on more threads, reproduces every trial row.
#[test]
fn manifest_rerun_and_artifact_headers() {
    let first = TempDir::new().unwrap();
    let out = crew(&[
        "experiment", "--trials", "4", "--method", "baseline,buffer,nice", "--fraction-delayed", "0.5,1",
        "--time-limit-secs", "5", "--seed", "11", "--weights", p(weights()), "--out", p(first.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let second = TempDir::new().unwrap();
    let manifest = first.path().join(MANIFEST_JSON);
    let out = crew(&["experiment", "--manifest", p(&manifest), "--jobs", "2", "--out", p(second.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = |d: &TempDir| std::fs::read(d.path().join(TRIALS_CSV)).unwrap();
    assert_eq!(csv(&first), csv(&second));
    let rows: Vec<TrialRow> = read_csv(&first.path().join(TRIALS_CSV)).unwrap();
    assert_eq!(rows.len(), 4 * 3 * 2);

    let hash = {
        let v: Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
        assert_eq!(v["format_version"], FORMAT_VERSION);
        v["config_hash"].as_str().unwrap().to_string()
    };
    for name in [REPORT_JSON, MANIFEST_JSON] {
        let v: Value = serde_json::from_slice(&std::fs::read(first.path().join(name)).unwrap()).unwrap();
        assert_eq!(v["config_hash"], hash.as_str(), "{name}");
        assert_eq!(v["format_version"], FORMAT_VERSION, "{name}");
    }
    let header = format!("# format_version={FORMAT_VERSION} config_hash={hash}");
    for name in [TRIALS_CSV, "builds.csv", REPORT_TXT] {
        let text = std::fs::read_to_string(first.path().join(name)).unwrap();
        assert_eq!(text.lines().next(), Some(header.as_str()), "{name}");
    }
}

#[test]
fn extract_writes_coefficients() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    let run = crew(&["extract", "--weights", p(weights()), "--instance", DEMO, "--n", "0", "--out", p(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["kind"], "coefficients");
    assert!(v["config_hash"].is_string());
}
