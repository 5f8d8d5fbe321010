use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use multimatch_core::datagen::MarketSpec;
use multimatch_core::lmf::LmfConfig;
use multimatch_core::metrics::PenaltyMode;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Normal,
    Lmf,
    Mixed,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Normal, Algorithm::Lmf, Algorithm::Mixed];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Normal => "normal",
            Algorithm::Lmf => "lmf",
            Algorithm::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A market shape as written on the command line: `NxM`, or `econ-proxy`
/// for the 75x24 surplus-candidate market with mostly disjoint pools.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SpecName {
    pub candidates: usize,
    pub employers: usize,
    pub pool_window: Option<usize>,
    proxy: bool,
}

pub const ECON_PROXY: &str = "econ-proxy";

impl SpecName {
    pub fn new(candidates: usize, employers: usize) -> Self {
        SpecName { candidates, employers, pool_window: None, proxy: false }
    }

    pub fn econ_proxy() -> Self {
        SpecName { candidates: 75, employers: 24, pool_window: Some(4), proxy: true }
    }

    pub fn label(&self) -> String {
        if self.proxy {
            ECON_PROXY.to_string()
        } else {
            format!("{}x{}", self.candidates, self.employers)
        }
    }

    pub fn market(&self, seed: u64) -> MarketSpec {
        let mut spec = MarketSpec::new(self.candidates, self.employers, seed);
        spec.pool_window = self.pool_window;
        if self.proxy {
            spec.prefs_per_candidate = 3;
        }
        spec
    }
}

impl FromStr for SpecName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        if s == ECON_PROXY {
            return Ok(SpecName::econ_proxy());
        }
        let Some((n, m)) = s.split_once(['x', 'X']) else {
            bail!("market spec {s:?} is not of the form NxM");
        };
        let n: usize = n.trim().parse().with_context(|| format!("bad candidate count in {s:?}"))?;
        let m: usize = m.trim().parse().with_context(|| format!("bad employer count in {s:?}"))?;
        if n == 0 || m == 0 {
            bail!("market spec {s:?} needs at least one agent per side");
        }
        Ok(SpecName::new(n, m))
    }
}

impl TryFrom<String> for SpecName {
    type Error = anyhow::Error;
    fn try_from(s: String) -> anyhow::Result<Self> {
        s.parse()
    }
}

impl From<SpecName> for String {
    fn from(s: SpecName) -> String {
        s.label()
    }
}

impl fmt::Display for SpecName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub fn default_specs() -> Vec<SpecName> {
    [(10, 100), (50, 100), (100, 100), (110, 100), (150, 100)].into_iter().map(|(n, m)| SpecName::new(n, m)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub specs: Vec<SpecName>,
    pub algorithms: Vec<Algorithm>,
    /// Round cap for displacement and withholdings; `None` uses the round
    /// at which the normal run converges.
    pub metrics_rounds: Option<usize>,
    pub retention_rounds: usize,
    pub runtime_rounds: usize,
    /// Offer rounds in the job-market simulation.
    pub market_rounds: usize,
    pub lmf: LmfConfig,
    pub penalty: PenaltyMode,
    pub out: PathBuf,
    /// Seeds both market generation and factor initialization.
    pub seed: u64,
    /// Time each algorithm at `runtime_rounds` and write `runtime.csv`.
    pub measure_runtime: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            specs: default_specs(),
            algorithms: Algorithm::ALL.to_vec(),
            metrics_rounds: None,
            retention_rounds: 19,
            runtime_rounds: 10,
            market_rounds: 3,
            lmf: LmfConfig::default(),
            penalty: PenaltyMode::PerRound,
            out: PathBuf::from("out"),
            seed: 0,
            measure_runtime: true,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn check(&self) -> anyhow::Result<()> {
        if self.specs.is_empty() {
            bail!("no market specs configured");
        }
        if self.algorithms.is_empty() {
            bail!("no algorithms configured");
        }
        if self.metrics_rounds == Some(0)
            || self.retention_rounds == 0
            || self.runtime_rounds == 0
            || self.market_rounds == 0
        {
            bail!("round caps must be at least 1");
        }
        Ok(())
    }

    pub fn lmf_for(&self, seed: u64) -> LmfConfig {
        LmfConfig { seed, ..self.lmf }
    }
}
