//! The `insdiff` binary end to end: exit codes, seeding, config files and echoes.

use std::path::Path;
use std::process::{Command, Output};

fn insdiff(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_insdiff")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = insdiff(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// `(id, sequence)` pairs of a FASTA file, wrapped lines joined.
fn fasta(path: &Path) -> Vec<(String, String)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut records: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        if let Some(header) = line.strip_prefix('>') {
            records.push((header.split_whitespace().next().unwrap_or("").to_string(), String::new()));
        } else {
            records.last_mut().unwrap().1.push_str(line.trim());
        }
    }
    records
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(insdiff(dir.path(), &[]).status.code(), Some(1));
    assert_eq!(insdiff(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(insdiff(dir.path(), &["toygen", "--n", "3", "--bogus"]).status.code(), Some(1));
    assert_eq!(insdiff(dir.path(), &["shrink", "--model", "m", "--in", "x"]).status.code(), Some(1));
    let out = insdiff(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("simulate-forward"));
}

#[test]
fn validation_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(insdiff(d, &["toygen", "--n", "3", "--max-len", "0"]).status.code(), Some(2));
    assert_eq!(insdiff(d, &["perplexity", "--model", "missing.ckpt", "--data", "x.fasta"]).status.code(), Some(2));
    std::fs::write(d.join("bad.json"), r#"{"seed": 1, "colour": "blue"}"#).unwrap();
    let out = insdiff(d, &["--config", "bad.json", "toygen", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    std::fs::write(d.join("bad_schedule.json"), r#"{"schedule": {"gamma": 1.0, "t_max": 1.5}}"#).unwrap();
    assert_eq!(insdiff(d, &["--config", "bad_schedule.json", "toygen", "--n", "3"]).status.code(), Some(2));
    std::fs::write(d.join("x.fasta"), ">a\nAXB\n").unwrap();
    let out = insdiff(d, &["--toy", "simulate-forward", "--in", "x.fasta", "--t", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown symbol X at record a, position 2"));
}

#[test]
fn toygen_is_byte_identical_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["toygen", "--n", "10000", "--max-len", "20", "--seed", "7", "--out", "a.fasta"]);
    ok(d, &["toygen", "--n", "10000", "--max-len", "20", "--seed", "7", "--out", "b.fasta"]);
    ok(d, &["toygen", "--n", "10000", "--max-len", "20", "--seed", "8", "--out", "c.fasta"]);
    let a = std::fs::read(d.join("a.fasta")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.fasta")).unwrap());
    assert_ne!(a, std::fs::read(d.join("c.fasta")).unwrap());
    let records = fasta(&d.join("a.fasta"));
    assert_eq!(records.len(), 10000);
    assert!(records.iter().all(|(_, s)| (1..=20).contains(&s.len())));
}

#[test]
fn every_output_gets_a_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.json"), r#"{"alphabet": "toy", "pi": "uniform", "seed": 7}"#).unwrap();
    ok(d, &["--config", "run.json", "toygen", "--n", "50", "--out", "from_config.fasta"]);
    ok(d, &["--toy", "--seed", "7", "toygen", "--n", "50", "--out", "from_flags.fasta"]);
    assert_eq!(
        std::fs::read(d.join("from_config.fasta")).unwrap(),
        std::fs::read(d.join("from_flags.fasta")).unwrap()
    );
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("from_config.fasta.config.json")).unwrap()).unwrap();
    assert_eq!(echo["seed"], 7);
    assert_eq!(echo["alphabet"], "ABC");
    assert!(echo["schedule"]["gamma"].is_number());
    assert!(echo["train"]["window"].is_number());

    // the echo is itself a valid config that reproduces the run
    ok(d, &["--config", "from_config.fasta.config.json", "toygen", "--n", "50", "--out", "again.fasta"]);
    assert_eq!(
        std::fs::read(d.join("again.fasta")).unwrap(),
        std::fs::read(d.join("from_flags.fasta")).unwrap()
    );
}

#[test]
fn greedy_half_shrink_rounds_deletions_up() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let toy = ["--toy", "--seed", "3"];
    let run = |args: &[&str]| ok(d, &toy.iter().chain(args).copied().collect::<Vec<_>>());
    run(&["toygen", "--n", "200", "--out", "train.fasta"]);
    run(&["train", "--data", "train.fasta", "--out", "model.ckpt", "--steps", "20"]);
    assert!(d.join("model.ckpt.config.json").exists());
    std::fs::write(d.join("x.fasta"), ">even\nABABABABAB\n>odd\nBABABAB\n>two\nAB\n").unwrap();
    for seed in ["1", "2"] {
        let out = format!("half{seed}.fasta");
        ok(d, &["--toy", "--seed", seed, "shrink", "--model", "model.ckpt", "--in", "x.fasta", "--frac", "0.5", "--mode", "greedy", "--out", &out]);
    }
    let shrunk = fasta(&d.join("half1.fasta"));
    let lens: Vec<(&str, usize)> = shrunk.iter().map(|(id, s)| (id.as_str(), s.len())).collect();
    assert_eq!(lens, vec![("even", 5), ("odd", 3), ("two", 1)]);
    let inputs = fasta(&d.join("x.fasta"));
    for ((_, x), (_, y)) in inputs.iter().zip(&shrunk) {
        let mut rest = x.chars();
        assert!(y.chars().all(|c| rest.any(|d| d == c)), "{y} is not a subsequence of {x}");
    }
    assert_eq!(std::fs::read(d.join("half1.fasta")).unwrap(), std::fs::read(d.join("half2.fasta")).unwrap());
}

#[test]
fn selftest_reports_every_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["selftest"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5, "{text}");
    assert!(lines.iter().all(|l| l.starts_with("PASS")), "{text}");
    for name in ["alignment", "forward", "posterior", "gradient", "prior KL"] {
        assert!(text.contains(name), "{name} missing from {text}");
    }
}
