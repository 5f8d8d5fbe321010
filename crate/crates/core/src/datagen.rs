//! Seeded synthetic markets with two-attribute linear utilities.
//!
//! Every agent draws two attributes from N(0, 1) and one of two types with
//! equal odds. Type 1 weighs the first attribute twice as much as the
//! second; type 2 the reverse. Candidates rank a random subset of employers
//! by utility, and each employer ranks exactly the candidates that applied.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PreferenceTable, Side};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentType {
    Type1,
    Type2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub attributes: (f64, f64),
    pub kind: AgentType,
}

/// Utility `evaluator` assigns to `target`.
pub fn utility(evaluator: &Agent, target: &Agent) -> f64 {
    let (a1, a2) = target.attributes;
    match evaluator.kind {
        AgentType::Type1 => 2.0 * a1 + a2,
        AgentType::Type2 => a1 + 2.0 * a2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub candidates: usize,
    pub employers: usize,
    #[serde(default = "default_prefs")]
    pub prefs_per_candidate: usize,
    #[serde(default)]
    pub seed: u64,
    /// When set, candidate `i` samples only from a window of this many
    /// employers around `i * m / n`, which keeps applicant pools mostly
    /// disjoint. `None` samples uniformly from all employers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_window: Option<usize>,
}

fn default_prefs() -> usize {
    10
}

impl MarketSpec {
    pub fn new(candidates: usize, employers: usize, seed: u64) -> Self {
        MarketSpec { candidates, employers, prefs_per_candidate: default_prefs(), seed, pool_window: None }
    }

    pub fn check(&self) -> Result<()> {
        if self.candidates == 0 || self.employers == 0 {
            return Err(Error::InvalidConfig("a market needs at least one agent per side".into()));
        }
        if self.prefs_per_candidate == 0 {
            return Err(Error::InvalidConfig("prefs_per_candidate must be at least 1".into()));
        }
        if self.pool_window == Some(0) {
            return Err(Error::InvalidConfig("pool_window must be at least 1".into()));
        }
        Ok(())
    }

    /// `"NxM"`, e.g. `"110x100"`.
    pub fn label(&self) -> String {
        format!("{}x{}", self.candidates, self.employers)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Market {
    pub spec: MarketSpec,
    pub candidates: Vec<Agent>,
    pub employers: Vec<Agent>,
    pub cand_prefs: PreferenceTable,
    pub emp_prefs: PreferenceTable,
}

fn draw_agent(rng: &mut ChaCha8Rng) -> Agent {
    let a1: f64 = rng.sample(StandardNormal);
    let a2: f64 = rng.sample(StandardNormal);
    let kind = if rng.random_bool(0.5) { AgentType::Type1 } else { AgentType::Type2 };
    Agent { attributes: (a1, a2), kind }
}

/// Draws `count` agents from a fresh generator; exposed for distribution checks.
pub fn draw_agents(count: usize, seed: u64) -> Vec<Agent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| draw_agent(&mut rng)).collect()
}

/// Orders `targets` by descending utility for `evaluator`, ties by index.
fn rank_by_utility(evaluator: &Agent, targets: &mut [usize], pool: &[Agent]) {
    targets.sort_by(|&a, &b| utility(evaluator, &pool[b]).total_cmp(&utility(evaluator, &pool[a])).then(a.cmp(&b)));
}

pub fn generate_market(spec: MarketSpec) -> Result<Market> {
    spec.check()?;
    let (n, m) = (spec.candidates, spec.employers);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let candidates: Vec<Agent> = (0..n).map(|_| draw_agent(&mut rng)).collect();
    let employers: Vec<Agent> = (0..m).map(|_| draw_agent(&mut rng)).collect();

    let mut cand_rows = Vec::with_capacity(n);
    for (i, cand) in candidates.iter().enumerate() {
        let mut row: Vec<usize> = match spec.pool_window {
            None => index::sample(&mut rng, m, spec.prefs_per_candidate.min(m)).into_vec(),
            Some(window) => {
                let window = window.min(m);
                let home = i * m / n;
                let start = (home + m - window / 2) % m;
                index::sample(&mut rng, window, spec.prefs_per_candidate.min(window))
                    .into_iter()
                    .map(|k| (start + k) % m)
                    .collect()
            }
        };
        rank_by_utility(cand, &mut row, &employers);
        cand_rows.push(row);
    }

    let mut emp_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (c, row) in cand_rows.iter().enumerate() {
        for &e in row {
            emp_rows[e].push(c);
        }
    }
    for (e, row) in emp_rows.iter_mut().enumerate() {
        rank_by_utility(&employers[e], row, &candidates);
    }

    Ok(Market {
        spec,
        candidates,
        employers,
        cand_prefs: PreferenceTable::new(Side::Candidate, cand_rows),
        emp_prefs: PreferenceTable::new(Side::Employer, emp_rows),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(a1: f64, a2: f64, kind: AgentType) -> Agent {
        Agent { attributes: (a1, a2), kind }
    }

    #[test]
    fn type_weights() {
        let t1 = agent(0.0, 0.0, AgentType::Type1);
        let t2 = agent(0.0, 0.0, AgentType::Type2);
        let x = agent(1.0, 0.0, AgentType::Type1);
        let y = agent(0.0, 1.0, AgentType::Type1);
        assert!(utility(&t1, &x) > utility(&t1, &y));
        assert!(utility(&t2, &x) < utility(&t2, &y));
        let zero = agent(0.0, 0.0, AgentType::Type2);
        assert_eq!(utility(&t1, &zero), 0.0);
        assert_eq!(utility(&t2, &zero), 0.0);
    }

    #[test]
    fn ten_applications_per_candidate() {
        let market = generate_market(MarketSpec::new(10, 100, 3)).unwrap();
        assert!(market.cand_prefs.rows().iter().all(|r| r.len() == 10));
        assert_eq!(market.emp_prefs.agent_count(), 100);
    }

    #[test]
    fn forced_single_pair() {
        let market = generate_market(MarketSpec::new(1, 1, 0)).unwrap();
        assert_eq!(market.cand_prefs.rows(), &[vec![0]]);
        assert_eq!(market.emp_prefs.rows(), &[vec![0]]);
    }

    #[test]
    fn application_counts_balance() {
        let market = generate_market(MarketSpec::new(100, 100, 8)).unwrap();
        assert_eq!(market.cand_prefs.entry_count(), 1000);
        assert_eq!(market.emp_prefs.entry_count(), 1000);
    }

    #[test]
    fn rows_are_mutual_and_sorted_by_utility() {
        let market = generate_market(MarketSpec::new(50, 30, 21)).unwrap();
        market.cand_prefs.ensure_valid(30).unwrap();
        market.emp_prefs.ensure_valid(50).unwrap();
        for (c, row) in market.cand_prefs.rows().iter().enumerate() {
            for &e in row {
                assert!(market.emp_prefs.row(e).contains(&c));
            }
            for w in row.windows(2) {
                let me = &market.candidates[c];
                assert!(utility(me, &market.employers[w[0]]) >= utility(me, &market.employers[w[1]]));
            }
        }
        for (e, row) in market.emp_prefs.rows().iter().enumerate() {
            for &c in row {
                assert!(market.cand_prefs.row(c).contains(&e));
            }
            for w in row.windows(2) {
                let me = &market.employers[e];
                assert!(utility(me, &market.candidates[w[0]]) >= utility(me, &market.candidates[w[1]]));
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_market(MarketSpec::new(20, 15, 4)).unwrap();
        let b = generate_market(MarketSpec::new(20, 15, 4)).unwrap();
        assert_eq!(a, b);
        let c = generate_market(MarketSpec::new(20, 15, 5)).unwrap();
        assert_ne!(a.cand_prefs, c.cand_prefs);
    }

    #[test]
    fn attribute_distribution() {
        let agents = draw_agents(10_000, 17);
        for pick in [|a: &Agent| a.attributes.0, |a: &Agent| a.attributes.1] {
            let xs: Vec<f64> = agents.iter().map(pick).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
            assert!(mean.abs() < 0.05, "mean {mean}");
            assert!((sd - 1.0).abs() < 0.05, "sd {sd}");
        }
        let type1 = agents.iter().filter(|a| a.kind == AgentType::Type1).count();
        assert!((4_800..=5_200).contains(&type1));
    }

    #[test]
    fn windowed_pools_stay_local() {
        let spec = MarketSpec { prefs_per_candidate: 3, pool_window: Some(4), ..MarketSpec::new(75, 24, 1) };
        let market = generate_market(spec).unwrap();
        assert!(market.cand_prefs.rows().iter().all(|r| r.len() == 3));
        market.cand_prefs.ensure_valid(24).unwrap();
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate_market(MarketSpec::new(0, 3, 0)).is_err());
        assert!(generate_market(MarketSpec { prefs_per_candidate: 0, ..MarketSpec::new(2, 3, 0) }).is_err());
    }
}
