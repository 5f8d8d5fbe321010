//! Dataset sweeps: generate, match, score, simulate, time.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use multimatch_core::datagen::{generate_market, Market};
use multimatch_core::io;
use multimatch_core::lmf::{lmf_mmdaa, LmfConfig, LmfRun, NnmfFit};
use multimatch_core::metrics::{displacement, retention, withholdings, MetricSeries, PenaltyMode};
use multimatch_core::mixed::mixed_mmdaa;
use multimatch_core::mmdaa::{normal_mmdaa, MmdaaConfig};
use multimatch_core::simulator::{assign_classes, build_plans, simulate_market, PlanSource, VacancyReport};
use multimatch_core::{MultiMatching, PreferenceTable, Provenance, Side};
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig, SpecName};

/// Label used in the vacancy CSV for the class-driven baseline market.
pub const BASELINE: &str = "baseline";

/// Everything computed for one market.
#[derive(Clone, Debug)]
pub struct DatasetRuns {
    pub spec: SpecName,
    pub market: Market,
    /// Round after which the unbounded normal run stopped.
    pub convergence: usize,
    /// Round cap applied to displacement and withholdings.
    pub metrics_rounds: usize,
    pub normal: MultiMatching,
    pub lmf: LmfRun,
    pub mixed: MultiMatching,
}

impl DatasetRuns {
    pub fn label(&self) -> String {
        self.spec.label()
    }

    /// The algorithm's output, capped at the metrics round count. LMF
    /// cells are relabelled inferred, since every LMF match is a position
    /// in the dense table.
    pub fn matches(&self, algo: Algorithm) -> MultiMatching {
        match algo {
            Algorithm::Normal => self.normal.truncated(self.metrics_rounds),
            Algorithm::Lmf => {
                let m = self.lmf.matches.truncated(self.metrics_rounds);
                MultiMatching {
                    candidates: m.candidates.with_provenance(Provenance::Inferred),
                    employers: m.employers.with_provenance(Provenance::Inferred),
                }
            }
            Algorithm::Mixed => self.mixed.clone(),
        }
    }

    fn stated(&self, side: Side) -> &PreferenceTable {
        match side {
            Side::Candidate => &self.market.cand_prefs,
            Side::Employer => &self.market.emp_prefs,
        }
    }

    fn dense(&self, side: Side) -> &PreferenceTable {
        match side {
            Side::Candidate => &self.lmf.dense_cand,
            Side::Employer => &self.lmf.dense_emp,
        }
    }

    pub fn displacement(&self, algo: Algorithm, side: Side, penalty: PenaltyMode) -> anyhow::Result<MetricSeries> {
        let matches = self.matches(algo);
        displacement(matches.side(side), self.stated(side), Some(self.dense(side)), penalty)
            .with_context(|| format!("{} / {algo}: {side} displacement", self.label()))
    }

    pub fn withholdings(&self, algo: Algorithm, side: Side) -> MetricSeries {
        withholdings(self.matches(algo).side(side))
    }

    /// Retention reads the uncapped runs, up to `rounds`, with the
    /// provenance recorded at match time.
    pub fn retention(&self, algo: Algorithm, side: Side, rounds: usize) -> MetricSeries {
        let table = match algo {
            Algorithm::Normal => &self.normal,
            Algorithm::Lmf => &self.lmf.matches,
            Algorithm::Mixed => &self.mixed,
        };
        retention(&table.side(side).truncated(rounds), self.stated(side))
    }

    pub fn vacancy_baseline(&self, rounds: usize) -> anyhow::Result<VacancyReport> {
        let classes = assign_classes(self.market.emp_prefs.agent_count());
        let plans = build_plans(PlanSource::RealWorld { emp_prefs: &self.market.emp_prefs, classes: &classes })?;
        Ok(simulate_market(plans, self.market.cand_prefs.agent_count(), rounds)?)
    }

    pub fn vacancy(&self, algo: Algorithm, rounds: usize) -> anyhow::Result<VacancyReport> {
        let matches = self.matches(algo);
        let plans = build_plans(PlanSource::FromMatches(&matches.employers))?;
        Ok(simulate_market(plans, self.market.cand_prefs.agent_count(), rounds)?)
    }
}

/// Generates the market for `spec` and runs all three algorithms on it.
pub fn run_dataset(spec: &SpecName, cfg: &ExperimentConfig) -> anyhow::Result<DatasetRuns> {
    let label = spec.label();
    let market = generate_market(spec.market(cfg.seed)).with_context(|| format!("{label}: generating market"))?;
    let (cand, emp) = (&market.cand_prefs, &market.emp_prefs);

    let full = normal_mmdaa(cand, emp, MmdaaConfig::unbounded()).with_context(|| format!("{label} / normal"))?;
    let convergence = full.rounds();
    let metrics_rounds = cfg.metrics_rounds.unwrap_or(convergence).max(1);
    let normal = full.truncated(metrics_rounds);

    // The overlay may draw substitutes from any LMF round, so the dense run
    // goes to convergence too.
    let lmf = lmf_mmdaa(cand, emp, MmdaaConfig::unbounded(), &cfg.lmf_for(cfg.seed))
        .with_context(|| format!("{label} / lmf"))?;
    let mixed = mixed_mmdaa(&normal, &lmf.matches).with_context(|| format!("{label} / mixed"))?;

    Ok(DatasetRuns { spec: spec.clone(), market, convergence, metrics_rounds, normal, lmf, mixed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub algorithm: String,
    pub side: String,
    pub round: usize,
    pub total: u64,
    pub participants: u64,
    pub average: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VacancyRow {
    pub mode: String,
    pub algorithm: String,
    pub round: usize,
    pub employer_vacancy: f64,
    pub candidate_vacancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRow {
    pub mode: String,
    pub algorithm: String,
    pub round: usize,
    pub employer: usize,
    pub candidate: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub dataset: String,
    pub algorithm: String,
    pub rounds: usize,
    pub millis: f64,
}

fn series_rows(out: &mut Vec<MetricRow>, metric: &str, algo: Algorithm, side: Side, series: &MetricSeries) {
    for (i, p) in series.points.iter().enumerate() {
        out.push(MetricRow {
            metric: metric.to_string(),
            algorithm: algo.as_str().to_string(),
            side: side.name().to_string(),
            round: i + 1,
            total: p.total,
            participants: p.participants,
            average: p.average_f64(),
        });
    }
}

pub fn metric_rows(runs: &DatasetRuns, cfg: &ExperimentConfig) -> anyhow::Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for &algo in &cfg.algorithms {
        for side in [Side::Candidate, Side::Employer] {
            series_rows(&mut rows, "displacement", algo, side, &runs.displacement(algo, side, cfg.penalty)?);
            series_rows(&mut rows, "withholdings", algo, side, &runs.withholdings(algo, side));
            series_rows(&mut rows, "retention", algo, side, &runs.retention(algo, side, cfg.retention_rounds));
        }
    }
    Ok(rows)
}

fn report_rows(
    mode: &str,
    algo: &str,
    report: &VacancyReport,
    vac: &mut Vec<VacancyRow>,
    acc: &mut Vec<AcceptanceRow>,
) {
    for (i, (&e, &c)) in report.employer_vacancy.iter().zip(&report.candidate_vacancy).enumerate() {
        vac.push(VacancyRow {
            mode: mode.to_string(),
            algorithm: algo.to_string(),
            round: i + 1,
            employer_vacancy: e,
            candidate_vacancy: c,
        });
    }
    for a in &report.acceptances {
        acc.push(AcceptanceRow {
            mode: mode.to_string(),
            algorithm: algo.to_string(),
            round: a.round,
            employer: a.employer + 1,
            candidate: a.candidate + 1,
        });
    }
}

pub fn vacancy_rows(
    runs: &DatasetRuns,
    cfg: &ExperimentConfig,
) -> anyhow::Result<(Vec<VacancyRow>, Vec<AcceptanceRow>)> {
    let (mut vac, mut acc) = (Vec::new(), Vec::new());
    let base = runs.vacancy_baseline(cfg.market_rounds)?;
    report_rows("real_world", BASELINE, &base, &mut vac, &mut acc);
    for &algo in &cfg.algorithms {
        let report = runs.vacancy(algo, cfg.market_rounds)?;
        report_rows("from_matches", algo.as_str(), &report, &mut vac, &mut acc);
    }
    Ok((vac, acc))
}

/// Wall-clock of each algorithm at `rounds`, factorization included. Mixed
/// is charged for the normal and LMF runs it consumes.
pub fn time_algorithms(market: &Market, rounds: usize, lmf: &LmfConfig) -> anyhow::Result<Vec<(Algorithm, f64)>> {
    let (cand, emp) = (&market.cand_prefs, &market.emp_prefs);
    let cap = MmdaaConfig::new(rounds);

    let t = Instant::now();
    let normal = normal_mmdaa(cand, emp, cap)?;
    let normal_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let run = lmf_mmdaa(cand, emp, cap, lmf)?;
    let lmf_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    mixed_mmdaa(&normal, &run.matches)?;
    let overlay_ms = t.elapsed().as_secs_f64() * 1e3;

    Ok(vec![
        (Algorithm::Normal, normal_ms),
        (Algorithm::Lmf, lmf_ms),
        (Algorithm::Mixed, normal_ms + lmf_ms + overlay_ms),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: Option<f64>,
}

impl From<&NnmfFit> for FitSummary {
    fn from(fit: &NnmfFit) -> Self {
        FitSummary {
            rank: fit.factors.rank(),
            iterations: fit.iterations(),
            converged: fit.converged,
            final_loss: fit.losses.last().copied(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset: String,
    pub candidates: usize,
    pub employers: usize,
    pub normal_convergence_rounds: usize,
    pub metrics_rounds: usize,
    pub lmf_rounds: usize,
    pub candidate_fit: FitSummary,
    pub employer_fit: FitSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub datasets: Vec<DatasetSummary>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub summary: ExperimentSummary,
    pub metrics: Vec<(String, Vec<MetricRow>)>,
    pub vacancy: Vec<(String, Vec<VacancyRow>)>,
    pub runtime: Vec<RuntimeRow>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub const METRIC_HEADER: [&str; 7] = ["metric", "algorithm", "side", "round", "total", "participants", "average"];
pub const VACANCY_HEADER: [&str; 5] = ["mode", "algorithm", "round", "employer_vacancy", "candidate_vacancy"];
pub const ACCEPTANCE_HEADER: [&str; 5] = ["mode", "algorithm", "round", "employer", "candidate"];
pub const RUNTIME_HEADER: [&str; 4] = ["dataset", "algorithm", "rounds", "millis"];

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> anyhow::Result<()> {
    write_csv(path, rows, &METRIC_HEADER)
}

pub fn write_vacancy(path: &Path, rows: &[VacancyRow]) -> anyhow::Result<()> {
    write_csv(path, rows, &VACANCY_HEADER)
}

pub fn write_acceptances(path: &Path, rows: &[AcceptanceRow]) -> anyhow::Result<()> {
    write_csv(path, rows, &ACCEPTANCE_HEADER)
}

pub fn write_market(dir: &Path, market: &Market) -> anyhow::Result<()> {
    let file = File::create(dir.join("preferences.csv"))?;
    io::write_preferences(BufWriter::new(file), &[&market.cand_prefs, &market.emp_prefs])?;
    let meta = serde_json::json!({ "spec": market.spec, "seed": market.spec.seed });
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

fn write_matching(path: &Path, m: &MultiMatching) -> anyhow::Result<()> {
    io::write_matching(BufWriter::new(File::create(path)?), m)?;
    Ok(())
}

/// Runs every configured spec and writes, under `cfg.out`:
/// `<dataset>/{preferences.csv, metadata.json, dense.csv, matching_<algo>.csv,
/// metrics.csv, vacancy.csv, acceptances.csv}`, plus `runtime.csv` and
/// `summary.json` at the top level.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentReport> {
    cfg.check()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut report = ExperimentReport {
        summary: ExperimentSummary { seed: cfg.seed, datasets: Vec::new() },
        metrics: Vec::new(),
        vacancy: Vec::new(),
        runtime: Vec::new(),
    };

    for spec in &cfg.specs {
        let label = spec.label();
        let dir = cfg.out.join(&label);
        fs::create_dir_all(&dir)?;
        let runs = run_dataset(spec, cfg)?;

        write_market(&dir, &runs.market)?;
        let dense = File::create(dir.join("dense.csv"))?;
        io::write_preferences(BufWriter::new(dense), &[&runs.lmf.dense_cand, &runs.lmf.dense_emp])?;
        for &algo in &cfg.algorithms {
            let m = match algo {
                Algorithm::Lmf => runs.lmf.matches.clone(),
                other => runs.matches(other),
            };
            write_matching(&dir.join(format!("matching_{algo}.csv")), &m)?;
        }

        let metrics = metric_rows(&runs, cfg)?;
        write_metrics(&dir.join("metrics.csv"), &metrics)?;
        let (vac, acc) = vacancy_rows(&runs, cfg)?;
        write_vacancy(&dir.join("vacancy.csv"), &vac)?;
        write_acceptances(&dir.join("acceptances.csv"), &acc)?;

        if cfg.measure_runtime {
            let times = time_algorithms(&runs.market, cfg.runtime_rounds, &cfg.lmf_for(cfg.seed))
                .with_context(|| format!("{label}: timing"))?;
            for (algo, millis) in times.into_iter().filter(|(a, _)| cfg.algorithms.contains(a)) {
                report.runtime.push(RuntimeRow {
                    dataset: label.clone(),
                    algorithm: algo.as_str().to_string(),
                    rounds: cfg.runtime_rounds,
                    millis,
                });
            }
        }

        report.summary.datasets.push(DatasetSummary {
            dataset: label.clone(),
            candidates: spec.candidates,
            employers: spec.employers,
            normal_convergence_rounds: runs.convergence,
            metrics_rounds: runs.metrics_rounds,
            lmf_rounds: runs.lmf.matches.rounds(),
            candidate_fit: (&runs.lmf.cand_fit).into(),
            employer_fit: (&runs.lmf.emp_fit).into(),
        });
        report.metrics.push((label.clone(), metrics));
        report.vacancy.push((label, vac));
    }

    if cfg.measure_runtime {
        write_csv(&cfg.out.join("runtime.csv"), &report.runtime, &RUNTIME_HEADER)?;
    }
    fs::write(cfg.out.join("summary.json"), serde_json::to_string_pretty(&report.summary)? + "\n")?;
    Ok(report)
}
