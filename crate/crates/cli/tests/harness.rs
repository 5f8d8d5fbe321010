use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use multimatch_cli::experiment::{MetricRow, RuntimeRow, VacancyRow, METRIC_HEADER, VACANCY_HEADER};
use multimatch_cli::{run_experiment, Algorithm, ExperimentConfig, SpecName};
use multimatch_core::io::{read_matching, read_preferences};

fn small_config(out: &Path, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        specs: vec![SpecName::new(12, 10), SpecName::new(20, 15)],
        seed,
        out: out.to_path_buf(),
        measure_runtime: false,
        ..ExperimentConfig::default()
    }
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    csv::Reader::from_path(path).unwrap().deserialize().collect::<Result<_, _>>().unwrap()
}

#[test]
fn metric_files_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&small_config(a.path(), 5)).unwrap();
    run_experiment(&small_config(b.path(), 5)).unwrap();
    for dataset in ["12x10", "20x15"] {
        for file in ["metrics.csv", "vacancy.csv", "acceptances.csv", "matching_mixed.csv", "dense.csv"] {
            let x = fs::read(a.path().join(dataset).join(file)).unwrap();
            let y = fs::read(b.path().join(dataset).join(file)).unwrap();
            assert!(x == y, "{dataset}/{file} differs between runs");
        }
    }
    assert_eq!(fs::read(a.path().join("summary.json")).unwrap(), fs::read(b.path().join("summary.json")).unwrap());
}

#[test]
fn emitted_csvs_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small_config(dir.path(), 1)).unwrap();
    let ds = dir.path().join("20x15");

    assert_eq!(header(&ds.join("metrics.csv")), METRIC_HEADER.join(","));
    assert_eq!(header(&ds.join("vacancy.csv")), VACANCY_HEADER.join(","));
    let metrics: Vec<MetricRow> = read_rows(&ds.join("metrics.csv"));
    assert_eq!(metrics, report.metrics[1].1);
    let vacancy: Vec<VacancyRow> = read_rows(&ds.join("vacancy.csv"));
    assert_eq!(vacancy, report.vacancy[1].1);

    let (cand, emp) = read_preferences(fs::File::open(ds.join("preferences.csv")).unwrap()).unwrap();
    assert_eq!((cand.agent_count(), emp.agent_count()), (20, 15));
    let (dense_c, dense_e) = read_preferences(fs::File::open(ds.join("dense.csv")).unwrap()).unwrap();
    assert!(dense_c.rows().iter().all(|r| r.len() == 15));
    assert!(dense_e.rows().iter().all(|r| r.len() == 20));
    for algo in Algorithm::ALL {
        let m = read_matching(fs::File::open(ds.join(format!("matching_{algo}.csv"))).unwrap()).unwrap();
        assert!(m.candidates.violations().is_empty());
        assert!(m.employers.violations().is_empty());
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(ds.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 1);
    assert_eq!(meta["spec"]["candidates"], 20);
}

#[test]
fn every_algorithm_reports_both_sides_and_all_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { measure_runtime: true, ..small_config(dir.path(), 2) };
    let report = run_experiment(&cfg).unwrap();
    for (_, rows) in &report.metrics {
        let combos: BTreeSet<(&str, &str, &str)> =
            rows.iter().map(|r| (r.metric.as_str(), r.algorithm.as_str(), r.side.as_str())).collect();
        assert_eq!(combos.len(), 3 * 3 * 2);
    }
    let runtime: Vec<RuntimeRow> = read_rows(&dir.path().join("runtime.csv"));
    assert_eq!(runtime.len(), 2 * 3);
    assert!(runtime.iter().all(|r| r.rounds == 10 && r.millis >= 0.0));
}

#[test]
fn retention_of_normal_runs_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small_config(dir.path(), 3)).unwrap();
    for (_, rows) in &report.metrics {
        for r in rows.iter().filter(|r| r.metric == "retention" && r.algorithm == "normal") {
            assert!(r.average.is_none_or(|a| a == 1.0), "{r:?}");
        }
    }
}

fn multimatch() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multimatch"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{:?} failed: {}", cmd, String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn binary_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |s: &str| d.join(s).to_str().unwrap().to_string();

    run_ok(multimatch().args(["gen", "--spec", "15x12", "--seed", "4", "--out", &p("market")]));
    run_ok(multimatch().args([
        "match",
        "--prefs",
        &p("market/preferences.csv"),
        "--algo",
        "mixed",
        "--out",
        &p("mixed"),
    ]));
    run_ok(multimatch().args([
        "metrics",
        "--prefs",
        &p("market/preferences.csv"),
        "--matching",
        &p("mixed/matching.csv"),
        "--dense",
        &p("mixed/dense.csv"),
        "--algo",
        "mixed",
        "--penalty-per-round",
        "false",
        "--out",
        &p("scores"),
    ]));
    assert_eq!(header(&d.join("scores/metrics.csv")), METRIC_HEADER.join(","));
    let stdout = run_ok(multimatch().args([
        "simulate",
        "--prefs",
        &p("market/preferences.csv"),
        "--matching",
        &p("mixed/matching.csv"),
        "--out",
        &p("sim"),
    ]));
    assert_eq!(stdout.lines().count(), 3);
    let rows: Vec<VacancyRow> = read_rows(&d.join("sim/vacancy.csv"));
    assert!(rows.iter().all(|r| r.mode == "from_matches"));
}

#[test]
fn match_can_generate_its_own_market() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    run_ok(
        multimatch()
            .args(["match", "--spec", "8x6", "--algo", "lmf", "--rounds", "4", "--lmf-rank", "3"])
            .arg("--out")
            .arg(&out),
    );
    let m = read_matching(fs::File::open(out.join("matching.csv")).unwrap()).unwrap();
    assert_eq!(m.rounds(), 4);
}

#[test]
fn experiment_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, r#"{"specs": ["30x30"], "seed": 1, "algorithms": ["normal"]}"#).unwrap();
    let out = dir.path().join("exp");
    run_ok(
        multimatch()
            .args(["experiment", "--spec", "6x5", "--seed", "8", "--no-runtime", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out),
    );
    assert!(out.join("6x5/metrics.csv").exists());
    assert!(!out.join("30x30").exists());
    let rows: Vec<MetricRow> = read_rows(&out.join("6x5/metrics.csv"));
    assert!(rows.iter().all(|r| r.algorithm == "normal"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 8);
}

#[test]
fn fixtures_subcommand_passes() {
    let stdout = run_ok(multimatch().arg("fixtures"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "side,agent,rank,counterpart\nC,1,2,1\n").unwrap();
    let out = multimatch().args(["match", "--prefs"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected rank 1"));

    let out = multimatch().args(["gen", "--spec", "ten"]).output().unwrap();
    assert!(!out.status.success());
}
