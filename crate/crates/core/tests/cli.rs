use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use icu_adapt::data::N_CHANNELS;
use icu_adapt::synth::SynthCohortSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_icu-adapt"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn icu-adapt");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed");
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small four-domain cohort ingested into `dir/cohort.jsonl`.
fn small_cohort(dir: &Path) -> PathBuf {
    let mut spec = SynthCohortSpec::reference();
    for d in &mut spec.domains {
        d.n_patients = 24;
        d.mortality_rate = 0.3;
    }
    let spec_path = dir.join("spec.json");
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let raw = dir.join("raw");
    ok(&[
        "synth",
        "--spec",
        s(&spec_path),
        "--seed",
        "3",
        "--out",
        s(&raw),
    ]);
    assert!(raw.join("config.toml").exists());
    assert!(raw.join("truth.jsonl").exists());
    let cohort = dir.join("cohort.jsonl");
    let stdout = ok(&["ingest", "--data", s(&raw), "--out", s(&cohort)]);
    assert!(stdout.starts_with("domain,n,deaths,mortality_rate"));
    assert!(stdout.contains("total,96,"));
    cohort
}

const TINY: [&str; 8] = [
    "--filters",
    "4",
    "--hidden",
    "3",
    "--dense",
    "3",
    "--epochs",
    "3",
];

#[test]
fn experiment_writes_report_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = small_cohort(dir.path());
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("exp{k}"));
        let mut args = vec![
            "experiment",
            "--cohort",
            s(&cohort),
            "--target",
            "Cardiac",
            "--strategies",
            "A1,A3",
            "--folds",
            "1",
            "--seed",
            "11",
            "--out",
            s(&out),
        ];
        args.extend(TINY);
        ok(&args);
        let config = fs::read_to_string(out.join("config.toml")).unwrap();
        assert!(config.contains("seed = 11"));
        assert!(config.contains("code_version"));
        assert!(out.join("table.txt").exists());
        assert!(out.join("traces.csv").exists());
        reports.push(fs::read(out.join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let text = String::from_utf8(reports[0].clone()).unwrap();
    assert_eq!(text.lines().next(), Some("domain,model,fold,y,auc"));
    // A1, A3, POOLED, TT for one fold at one horizon
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = small_cohort(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 5\nstrategies = \"A2\"\n[train]\nmax_epochs = 2\n",
    )
    .unwrap();
    let out = dir.path().join("exp");
    let mut args = vec![
        "experiment",
        "--config",
        s(&cfg),
        "--cohort",
        s(&cohort),
        "--target",
        "Cardiac",
        "--folds",
        "1",
        "--seed",
        "6",
        "--no-controls",
        "--out",
        s(&out),
    ];
    args.extend(&TINY[..6]);
    ok(&args);
    let written = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(written.contains("seed = 6"));
    assert!(written.contains("strategies = \"A2\""));
    assert!(written.contains("max_epochs = 2"));
    assert!(written.contains("controls = false"));
}

#[test]
fn artifacts_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = small_cohort(dir.path());
    let adapt = dir.path().join("adapt");
    let mut args = vec![
        "adapt",
        "--cohort",
        s(&cohort),
        "--target",
        "Surgical",
        "--strategy",
        "A3",
        "--fold",
        "2",
        "--out",
        s(&adapt),
    ];
    args.extend(TINY);
    let stdout = ok(&args);
    assert!(stdout.contains("\"strategy\":\"A3\""));
    let ck = adapt.join("checkpoint.json");
    assert!(ck.exists());

    let curves = dir.path().join("curves");
    ok(&[
        "curves",
        "--checkpoint",
        s(&ck),
        "--cohort",
        s(&cohort),
        "--grid",
        "12,24,48",
        "--out",
        s(&curves),
    ]);
    let csv = fs::read_to_string(curves.join("curves.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("domain,model,y,auc"));
    assert!(curves.join("config.toml").exists());

    let project = dir.path().join("project");
    ok(&[
        "project",
        "--checkpoint",
        s(&ck),
        "--cohort",
        s(&cohort),
        "--perplexity",
        "5",
        "--iterations",
        "60",
        "--out",
        s(&project),
    ]);
    let traj = fs::read_to_string(project.join("trajectories.csv")).unwrap();
    let n_rows = traj.lines().count() - 1;
    assert!(n_rows > 0);
    assert_eq!(n_rows % 48, 0);
    assert!(project.join("kl_trace.csv").exists());

    let attr = dir.path().join("attr");
    ok(&[
        "attribute",
        "--checkpoint",
        s(&ck),
        "--cohort",
        s(&cohort),
        "--n-patients",
        "1",
        "--permutations",
        "20",
        "--out",
        s(&attr),
    ]);
    let rows = fs::read_to_string(attr.join("attributions.csv")).unwrap();
    assert_eq!(rows.lines().count() - 1, 48 * N_CHANNELS);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = run(&[
        "ingest",
        "--data",
        s(&empty),
        "--out",
        s(&dir.path().join("c.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = run(&[
        "curves",
        "--checkpoint",
        "/nonexistent.json",
        "--cohort",
        "x",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["experiment", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[
        "experiment",
        "--cohort",
        "x.jsonl",
        "--strategies",
        "A9",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));

    assert!(run(&["--help"]).status.success());
}

#[test]
fn gradcheck_command_passes() {
    let stdout = ok(&["gradcheck", "--features", "3", "--hours", "8"]);
    assert!(stdout.contains("gradient check passed"));
}
