//! Command-line surface. Every subcommand writes into `--out`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use multimatch_core::datagen::generate_market;
use multimatch_core::io;
use multimatch_core::lmf::{lmf_mmdaa, LmfConfig};
use multimatch_core::metrics::{displacement, retention, withholdings, PenaltyMode};
use multimatch_core::mixed::mixed_mmdaa;
use multimatch_core::mmdaa::{normal_mmdaa, MmdaaConfig};
use multimatch_core::simulator::{assign_classes, build_plans, simulate_market, PlanSource};
use multimatch_core::{MultiMatching, PreferenceTable, Provenance, Side};

use crate::config::{Algorithm, ExperimentConfig, SpecName};
use crate::experiment::{self, AcceptanceRow, MetricRow, VacancyRow};
use crate::fixtures::run_fixture_suite;

#[derive(Debug, Parser)]
#[command(name = "multimatch", version, about = "Multi-round stable matching experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic market.
    Gen(GenArgs),
    /// Run one matching algorithm.
    Match(MatchArgs),
    /// Score a matching against its preference tables.
    Metrics(MetricsArgs),
    /// Run the job-offer market on preferences or on a matching.
    Simulate(SimulateArgs),
    /// Sweep datasets and algorithms, writing every CSV artifact.
    Experiment(ExperimentArgs),
    /// Replay the shipped worked examples.
    Fixtures,
}

#[derive(Debug, Args)]
pub struct MarketArgs {
    /// Preference CSV; when absent a market is generated from --spec.
    #[arg(long, conflicts_with = "spec")]
    pub prefs: Option<PathBuf>,
    /// Market shape `NxM` or `econ-proxy`.
    #[arg(long)]
    pub spec: Option<SpecName>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl MarketArgs {
    fn load(&self) -> anyhow::Result<(PreferenceTable, PreferenceTable)> {
        match (&self.prefs, &self.spec) {
            (Some(path), _) => read_prefs(path),
            (None, Some(spec)) => {
                let m = generate_market(spec.market(self.seed))?;
                Ok((m.cand_prefs, m.emp_prefs))
            }
            (None, None) => bail!("pass --prefs FILE or --spec NxM"),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Market shape `NxM` or `econ-proxy`
    #[arg(long)]
    pub spec: SpecName,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    #[arg(long, value_enum, default_value_t = Algorithm::Normal)]
    pub algo: Algorithm,
    /// Round cap; runs go to convergence by default.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub lmf_rank: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PenaltyArgs {
    /// Charge one penalty per withheld round (`false`: one per run of them).
    #[arg(long, action = clap::ArgAction::Set)]
    pub penalty_per_round: Option<bool>,
    /// Disable withholding penalties.
    #[arg(long)]
    pub no_penalty: bool,
}

impl PenaltyArgs {
    fn resolve(&self, fallback: PenaltyMode) -> PenaltyMode {
        match (self.no_penalty, self.penalty_per_round) {
            (true, _) => PenaltyMode::Off,
            (false, Some(per_round)) => PenaltyMode::from_flags(true, per_round),
            (false, None) => fallback,
        }
    }
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub prefs: PathBuf,
    #[arg(long)]
    pub matching: PathBuf,
    /// Dense preference CSV, needed for inferred matches.
    #[arg(long)]
    pub dense: Option<PathBuf>,
    /// `lmf` scores every match against the dense table.
    #[arg(long, value_enum, default_value_t = Algorithm::Normal)]
    pub algo: Algorithm,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub prefs: PathBuf,
    /// Offer from this matching's employer table instead of by class.
    #[arg(long)]
    pub matching: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub rounds: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON config; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Repeatable; replaces the configured spec list.
    #[arg(long)]
    pub spec: Vec<SpecName>,
    /// Repeatable; replaces the configured algorithm list.
    #[arg(long, value_enum)]
    pub algo: Vec<Algorithm>,
    /// Round cap for displacement and withholdings.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lmf_rank: Option<usize>,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Skip the timing runs and runtime.csv.
    #[arg(long)]
    pub no_runtime: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentArgs {
    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.spec.is_empty() {
            cfg.specs = self.spec.clone();
        }
        if !self.algo.is_empty() {
            cfg.algorithms = self.algo.clone();
        }
        if self.rounds.is_some() {
            cfg.metrics_rounds = self.rounds;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(rank) = self.lmf_rank {
            cfg.lmf.rank = rank;
        }
        cfg.penalty = self.penalty.resolve(cfg.penalty);
        if self.no_runtime {
            cfg.measure_runtime = false;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.check()?;
        Ok(cfg)
    }
}

fn read_prefs(path: &Path) -> anyhow::Result<(PreferenceTable, PreferenceTable)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    io::read_preferences(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn read_matching(path: &Path) -> anyhow::Result<MultiMatching> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    io::read_matching(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn gen(args: &GenArgs) -> anyhow::Result<()> {
    out_dir(&args.out)?;
    let market = generate_market(args.spec.market(args.seed))?;
    experiment::write_market(&args.out, &market)?;
    println!("wrote {} market to {}", args.spec, args.out.display());
    Ok(())
}

fn run_match(args: &MatchArgs) -> anyhow::Result<()> {
    let (cand, emp) = args.market.load()?;
    out_dir(&args.out)?;
    let cap = MmdaaConfig::new(args.rounds.unwrap_or(usize::MAX));
    let mut lcfg = LmfConfig { seed: args.market.seed, ..LmfConfig::default() };
    if let Some(rank) = args.lmf_rank {
        lcfg.rank = rank;
    }
    let matches = match args.algo {
        Algorithm::Normal => normal_mmdaa(&cand, &emp, cap)?,
        Algorithm::Lmf | Algorithm::Mixed => {
            let normal = normal_mmdaa(&cand, &emp, cap)?;
            // mixed substitutes may come from any LMF round
            let lmf_cap = match args.algo {
                Algorithm::Lmf => cap,
                _ => MmdaaConfig::unbounded(),
            };
            let run = lmf_mmdaa(&cand, &emp, lmf_cap, &lcfg)?;
            let dense = File::create(args.out.join("dense.csv"))?;
            io::write_preferences(BufWriter::new(dense), &[&run.dense_cand, &run.dense_emp])?;
            if args.algo == Algorithm::Lmf {
                run.matches
            } else {
                mixed_mmdaa(&normal, &run.matches)?
            }
        }
    };
    let file = File::create(args.out.join("matching.csv"))?;
    io::write_matching(BufWriter::new(file), &matches)?;
    println!("{}: {} rounds written to {}", args.algo, matches.rounds(), args.out.display());
    Ok(())
}

fn run_metrics(args: &MetricsArgs) -> anyhow::Result<()> {
    let (cand, emp) = read_prefs(&args.prefs)?;
    let mut matches = read_matching(&args.matching)?;
    if args.algo == Algorithm::Lmf {
        matches = MultiMatching {
            candidates: matches.candidates.with_provenance(Provenance::Inferred),
            employers: matches.employers.with_provenance(Provenance::Inferred),
        };
    }
    let dense = args.dense.as_deref().map(read_prefs).transpose()?;
    let penalty = args.penalty.resolve(PenaltyMode::PerRound);
    let mut rows: Vec<MetricRow> = Vec::new();
    for (side, stated, dense) in
        [(Side::Candidate, &cand, dense.as_ref().map(|d| &d.0)), (Side::Employer, &emp, dense.as_ref().map(|d| &d.1))]
    {
        let table = matches.side(side);
        for (metric, series) in [
            ("displacement", displacement(table, stated, dense, penalty)?),
            ("withholdings", withholdings(table)),
            ("retention", retention(table, stated)),
        ] {
            for (i, p) in series.points.iter().enumerate() {
                rows.push(MetricRow {
                    metric: metric.into(),
                    algorithm: args.algo.as_str().into(),
                    side: side.name().into(),
                    round: i + 1,
                    total: p.total,
                    participants: p.participants,
                    average: p.average_f64(),
                });
            }
        }
    }
    out_dir(&args.out)?;
    experiment::write_metrics(&args.out.join("metrics.csv"), &rows)?;
    println!("wrote {} metric rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let (cand, emp) = read_prefs(&args.prefs)?;
    let classes = assign_classes(emp.agent_count());
    let matching = args.matching.as_deref().map(read_matching).transpose()?;
    let source = match &matching {
        Some(m) => PlanSource::FromMatches(&m.employers),
        None => PlanSource::RealWorld { emp_prefs: &emp, classes: &classes },
    };
    let mode = source.mode().as_str();
    let report = simulate_market(build_plans(source)?, cand.agent_count(), args.rounds)?;
    let vac: Vec<VacancyRow> = report
        .employer_vacancy
        .iter()
        .zip(&report.candidate_vacancy)
        .enumerate()
        .map(|(i, (&e, &c))| VacancyRow {
            mode: mode.into(),
            algorithm: if matching.is_some() { "input".into() } else { experiment::BASELINE.into() },
            round: i + 1,
            employer_vacancy: e,
            candidate_vacancy: c,
        })
        .collect();
    let acc: Vec<AcceptanceRow> = report
        .acceptances
        .iter()
        .map(|a| AcceptanceRow {
            mode: mode.into(),
            algorithm: vac.first().map(|v| v.algorithm.clone()).unwrap_or_default(),
            round: a.round,
            employer: a.employer + 1,
            candidate: a.candidate + 1,
        })
        .collect();
    out_dir(&args.out)?;
    experiment::write_vacancy(&args.out.join("vacancy.csv"), &vac)?;
    experiment::write_acceptances(&args.out.join("acceptances.csv"), &acc)?;
    for v in &vac {
        println!(
            "round {}: employer vacancy {:.4}, candidate vacancy {:.4}",
            v.round, v.employer_vacancy, v.candidate_vacancy
        );
    }
    Ok(())
}

fn run_experiment(args: &ExperimentArgs) -> anyhow::Result<()> {
    let cfg = args.resolve()?;
    let report = experiment::run_experiment(&cfg)?;
    for d in &report.summary.datasets {
        println!(
            "{}: normal converged after {} rounds, metrics over {} rounds",
            d.dataset, d.normal_convergence_rounds, d.metrics_rounds
        );
    }
    for r in &report.runtime {
        println!("{} {} {:.1} ms", r.dataset, r.algorithm, r.millis);
    }
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}

fn run_fixtures() -> anyhow::Result<()> {
    let outcomes = run_fixture_suite();
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    if failed > 0 {
        bail!("{failed} fixture(s) failed");
    }
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Match(a) => run_match(a),
        Command::Metrics(a) => run_metrics(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Experiment(a) => run_experiment(a),
        Command::Fixtures => run_fixtures(),
    }
}
