//! Worked examples shipped as JSON and replayed exactly.

use std::fmt;

use anyhow::{anyhow, bail, Context};
use multimatch_core::metrics::{displacement, PenaltyMode};
use multimatch_core::mixed::mixed_mmdaa;
use multimatch_core::simulator::{assign_classes, build_plans, simulate_market, PlanSource};
use multimatch_core::{Cell, MultiMatching, PreferenceTable, Provenance, Side, SideMatches};
use num_rational::Ratio;
use serde::Deserialize;

const LMF_DISPLACEMENT: &str = include_str!("../fixtures/lmf_displacement.json");
const MIXED_OVERLAY: &str = include_str!("../fixtures/mixed_overlay.json");
const JOB_MARKET: &str = include_str!("../fixtures/job_market.json");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixtureOutcome {
    pub name: &'static str,
    /// Empty when the fixture passed.
    pub mismatches: Vec<String>,
}

impl FixtureOutcome {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl fmt::Display for FixtureOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "PASS {}", self.name);
        }
        write!(f, "FAIL {}", self.name)?;
        for m in &self.mismatches {
            write!(f, "\n    {m}")?;
        }
        Ok(())
    }
}

fn ratio(text: &str) -> anyhow::Result<Ratio<u64>> {
    text.parse().map_err(|e| anyhow!("bad ratio {text:?}: {e:?}"))
}

fn zero_based(rows: &[Vec<usize>]) -> anyhow::Result<Vec<Vec<usize>>> {
    rows.iter().map(|r| r.iter().map(|&x| x.checked_sub(1).context("indices are 1-based")).collect()).collect()
}

fn cell(text: &str) -> anyhow::Result<Cell> {
    Ok(match text {
        "none" => Cell::Withheld,
        "departed" => Cell::Departed,
        t => {
            let (provenance, num) = match t.strip_prefix('~') {
                Some(rest) => (Provenance::Inferred, rest),
                None => (Provenance::Stated, t),
            };
            let k: usize = num.parse().with_context(|| format!("bad cell {t:?}"))?;
            if k == 0 {
                bail!("cells are 1-based: {t:?}");
            }
            Cell::Matched { counterpart: k - 1, provenance }
        }
    })
}

fn side(s: Side, rows: &[Vec<String>]) -> anyhow::Result<SideMatches> {
    let rows = rows.iter().map(|r| r.iter().map(|c| cell(c)).collect()).collect::<anyhow::Result<_>>()?;
    Ok(SideMatches::new(s, rows)?)
}

#[derive(Deserialize)]
struct MatchTables {
    candidates: Vec<Vec<String>>,
    employers: Vec<Vec<String>>,
}

impl MatchTables {
    fn build(&self) -> anyhow::Result<MultiMatching> {
        Ok(MultiMatching {
            candidates: side(Side::Candidate, &self.candidates)?,
            employers: side(Side::Employer, &self.employers)?,
        })
    }
}

fn check<T: PartialEq + fmt::Debug>(out: &mut Vec<String>, what: &str, got: T, want: T) {
    if got != want {
        out.push(format!("{what}: expected {want:?}, got {got:?}"));
    }
}

fn check_displacement(
    out: &mut Vec<String>,
    matches: &SideMatches,
    stated: &[Vec<usize>],
    dense: &[Vec<usize>],
    penalty: PenaltyMode,
    expected_average: &[String],
    expected_participants: &[u64],
) -> anyhow::Result<()> {
    let stated = PreferenceTable::new(Side::Candidate, zero_based(stated)?);
    let dense = PreferenceTable::new(Side::Candidate, zero_based(dense)?);
    let series = displacement(matches, &stated, Some(&dense), penalty)?;
    let want = expected_average.iter().map(|s| ratio(s).map(Some)).collect::<anyhow::Result<Vec<_>>>()?;
    check(out, "average displacement", series.averages(), want);
    let participants: Vec<u64> = series.points.iter().map(|p| p.participants).collect();
    check(out, "participants", participants, expected_participants.to_vec());
    Ok(())
}

#[derive(Deserialize)]
struct LmfDisplacement {
    stated: Vec<Vec<usize>>,
    dense: Vec<Vec<usize>>,
    matches: Vec<Vec<String>>,
    relabel_inferred: bool,
    penalty: PenaltyMode,
    expected_average: Vec<String>,
    expected_participants: Vec<u64>,
}

fn lmf_displacement() -> anyhow::Result<Vec<String>> {
    let fx: LmfDisplacement = serde_json::from_str(LMF_DISPLACEMENT)?;
    let mut matches = side(Side::Candidate, &fx.matches)?;
    if fx.relabel_inferred {
        matches = matches.with_provenance(Provenance::Inferred);
    }
    let mut out = Vec::new();
    check_displacement(
        &mut out,
        &matches,
        &fx.stated,
        &fx.dense,
        fx.penalty,
        &fx.expected_average,
        &fx.expected_participants,
    )?;
    Ok(out)
}

#[derive(Deserialize)]
struct MixedOverlay {
    normal: MatchTables,
    lmf: MatchTables,
    expected: MatchTables,
    stated: Vec<Vec<usize>>,
    dense: Vec<Vec<usize>>,
    penalty: PenaltyMode,
    expected_average: Vec<String>,
    expected_participants: Vec<u64>,
}

fn mixed_overlay() -> anyhow::Result<Vec<String>> {
    let fx: MixedOverlay = serde_json::from_str(MIXED_OVERLAY)?;
    let mixed = mixed_mmdaa(&fx.normal.build()?, &fx.lmf.build()?)?;
    let expected = fx.expected.build()?;
    let mut out = Vec::new();
    check(&mut out, "candidate table", mixed.candidates.rows(), expected.candidates.rows());
    check(&mut out, "employer table", mixed.employers.rows(), expected.employers.rows());
    check_displacement(
        &mut out,
        &mixed.candidates,
        &fx.stated,
        &fx.dense,
        fx.penalty,
        &fx.expected_average,
        &fx.expected_participants,
    )?;
    Ok(out)
}

#[derive(Deserialize)]
struct ExpectedAcceptance {
    round: usize,
    employer: usize,
    candidate: usize,
}

#[derive(Deserialize)]
struct JobMarket {
    candidates: usize,
    rounds: usize,
    employer_prefs: Vec<Vec<usize>>,
    expected_employer_vacancy: Vec<String>,
    expected_candidate_vacancy: Vec<String>,
    expected_acceptances: Vec<ExpectedAcceptance>,
}

fn job_market() -> anyhow::Result<Vec<String>> {
    let fx: JobMarket = serde_json::from_str(JOB_MARKET)?;
    let emp = PreferenceTable::new(Side::Employer, zero_based(&fx.employer_prefs)?);
    let m = emp.agent_count() as u64;
    let n = fx.candidates as u64;
    let classes = assign_classes(emp.agent_count());
    let report = simulate_market(
        build_plans(PlanSource::RealWorld { emp_prefs: &emp, classes: &classes })?,
        fx.candidates,
        fx.rounds,
    )?;

    let mut out = Vec::new();
    let emp_vac: Vec<Ratio<u64>> = report.filled_after.iter().map(|&f| Ratio::new(m - f as u64, m)).collect();
    let cand_vac: Vec<Ratio<u64>> = report.filled_after.iter().map(|&f| Ratio::new(n - f as u64, n)).collect();
    let want_emp = fx.expected_employer_vacancy.iter().map(|s| ratio(s)).collect::<anyhow::Result<Vec<_>>>()?;
    let want_cand = fx.expected_candidate_vacancy.iter().map(|s| ratio(s)).collect::<anyhow::Result<Vec<_>>>()?;
    check(&mut out, "employer vacancy", emp_vac, want_emp);
    check(&mut out, "candidate vacancy", cand_vac, want_cand);
    for a in &fx.expected_acceptances {
        let got = report.accepted(a.employer - 1, a.candidate - 1);
        if got != Some(a.round) {
            out.push(format!(
                "candidate {} should accept employer {} in round {}, got {got:?}",
                a.candidate, a.employer, a.round
            ));
        }
    }
    Ok(out)
}

/// Runs every shipped fixture. A fixture that cannot even be evaluated
/// reports the error as its mismatch.
pub fn run_fixture_suite() -> Vec<FixtureOutcome> {
    type Fixture = fn() -> anyhow::Result<Vec<String>>;
    let suite: [(&'static str, Fixture); 3] =
        [("lmf-displacement", lmf_displacement), ("mixed-overlay", mixed_overlay), ("job-market", job_market)];
    suite
        .into_iter()
        .map(|(name, run)| FixtureOutcome { name, mismatches: run().unwrap_or_else(|e| vec![format!("error: {e:#}")]) })
        .collect()
}
