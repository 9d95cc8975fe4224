use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agreement_core::ensemble::LocalEnsemble;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_agreement"));
    cmd.arg("--quiet");
    cmd
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawning the binary")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

const SMALL_SWEEP: &str = "seed = 5
[params]
n = 16
k = 4
t = 2
d = 1
alphabet_size = 2
[sweep]
rates = [0.0]
trials = 3
[samples]
agree = 500
decode_per_point = 20
disagreement = 500
";

#[test]
fn gen_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        let out = run(&["gen", "--seed", "11", "--out", name], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.json")).unwrap());
    let e = LocalEnsemble::load(&dir.path().join("a.json")).unwrap();
    assert_eq!(e.params().n, 30);
}

#[test]
fn clean_ensemble_never_disagrees() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["gen", "--out", "e.json"], dir.path()).status.success());
    let out = run(&["agree", "--input", "e.json", "--samples", "2000"], dir.path());
    assert!(out.status.success());
    assert_eq!(json(&out)["epsilon_hat"], 0.0);
    let out = run(&["decode", "--input", "e.json", "--samples", "2000"], dir.path());
    assert_eq!(json(&out)["disagreement"]["value"], 0.0);
}

#[test]
fn corruption_is_visible_to_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "c.json", r#"{"corruption": {"mode": "flip_entry", "rate": 0.2}}"#);
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["gen", "--out", "e.json"], dir.path()).status.success());
    assert!(run(&["corrupt", "--config", cfg, "--input", "e.json", "--out", "b.json"], dir.path()).status.success());
    let eps = json(&run(&["agree", "--config", cfg, "--input", "b.json"], dir.path()))["epsilon_hat"].as_f64().unwrap();
    assert!(eps > 0.3, "{eps}");
}

#[test]
fn single_edge_survives_pruning() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir, "one.txt", "10 1\n0 1 2\n");
    let out = run(&["prune", "--input", "one.txt", "--pruned", "p.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["branching_ok"], true);
    assert_eq!(report["edges"], serde_json::json!([[0, 1, 2]]));
    assert_eq!(fs::read_to_string(dir.path().join("p.txt")).unwrap(), "10 1\n0 1 2\n");
}

#[test]
fn uniform_prune_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let star: String = std::iter::once("20 20\n".to_string()).chain((0..20).map(|i| format!("{i}\n"))).collect();
    write(&dir, "star.txt", &star);
    write(&dir, "u.toml", "[prune]\nk = 2\nepsilon = 0.25\n");

    let out = run(&["prune", "--config", "u.toml", "--input", "star.txt", "--pruned", "p.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["subhypergraph"], true);

    let out = run(&["verify", "--config", "u.toml", "--input", "p.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["min_unique_hit"].as_f64().unwrap() >= 0.75);
}

#[test]
fn failed_property_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let star: String = std::iter::once("20 20\n".to_string()).chain((0..20).map(|i| format!("{i}\n"))).collect();
    write(&dir, "star.txt", &star);
    let out = run(&["verify", "--input", "star.txt"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["ok"], false);
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["prune"], dir.path()).status.code(), Some(1));
    write(&dir, "bad.json", r#"{"params": {"n": 5, "k": 9, "t": 2, "d": 1, "alphabet_size": 2}}"#);
    let out = run(&["gen", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params"));
    write(&dir, "h.txt", "4 1\n0 9\n");
    assert_eq!(run(&["verify", "--input", "h.txt"], dir.path()).status.code(), Some(1));
}

#[test]
fn sweep_rows_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir, "s.toml", SMALL_SWEEP);
    let a = run(&["sweep", "--config", "s.toml"], dir.path());
    let b = run(&["sweep", "--config", "s.toml"], dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let mut reader = csv::Reader::from_reader(a.stdout.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, agreement_core::experiment::CSV_HEADER);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(row[7].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir, "s.toml", SMALL_SWEEP);
    let file_seed = run(&["sweep", "--config", "s.toml"], dir.path());
    let flag_seed = run(&["sweep", "--config", "s.toml", "--seed", "6"], dir.path());
    assert_ne!(file_seed.stdout, flag_seed.stdout);

    let out = run(&["sweep", "--config", "s.toml", "--out", "rows.csv"], dir.path());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}
