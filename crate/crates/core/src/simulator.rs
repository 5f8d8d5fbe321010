//! Three-round job-offer market.
//!
//! Each round, every employer that has not filled its position offers it to
//! the candidate at its plan cursor, in ascending employer order. A jobless
//! candidate accepts the first offer that reaches it and declines every
//! later one. Exhausted plans leave the employer vacant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PreferenceTable, SideMatches};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmployerClass {
    High,
    Medium,
    Low,
}

/// First `m/3` employers High, next `m/3` Medium, the rest Low.
pub fn assign_classes(employer_count: usize) -> Vec<EmployerClass> {
    let third = employer_count / 3;
    (0..employer_count)
        .map(|e| match e {
            e if e < third => EmployerClass::High,
            e if e < 2 * third => EmployerClass::Medium,
            _ => EmployerClass::Low,
        })
        .collect()
}

/// Medium employers skip the top third of their own row, Low employers the
/// top two thirds.
pub fn class_offer_sequence(row: &[usize], class: EmployerClass) -> Vec<usize> {
    let skip = match class {
        EmployerClass::High => 0,
        EmployerClass::Medium => row.len() / 3,
        EmployerClass::Low => 2 * row.len() / 3,
    };
    row[skip..].to_vec()
}

/// Ordered candidates an employer will offer to, with a forward-only cursor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OfferPlan {
    sequence: Vec<usize>,
    cursor: usize,
}

impl OfferPlan {
    pub fn new(sequence: Vec<usize>) -> Self {
        OfferPlan { sequence, cursor: 0 }
    }

    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    fn next_offer(&mut self) -> Option<usize> {
        let c = self.sequence.get(self.cursor).copied();
        if c.is_some() {
            self.cursor += 1;
        }
        c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    /// Class-skewed offers straight from the employer preference rows.
    RealWorld,
    /// Offers follow each employer's match row, skipping rounds without a match.
    FromMatches,
}

impl PlanMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanMode::RealWorld => "real_world",
            PlanMode::FromMatches => "from_matches",
        }
    }
}

/// Input for [`build_plans`].
#[derive(Clone, Copy, Debug)]
pub enum PlanSource<'a> {
    RealWorld { emp_prefs: &'a PreferenceTable, classes: &'a [EmployerClass] },
    FromMatches(&'a SideMatches),
}

impl PlanSource<'_> {
    pub fn mode(&self) -> PlanMode {
        match self {
            PlanSource::RealWorld { .. } => PlanMode::RealWorld,
            PlanSource::FromMatches(_) => PlanMode::FromMatches,
        }
    }
}

pub fn build_plans(source: PlanSource<'_>) -> Result<Vec<OfferPlan>> {
    match source {
        PlanSource::RealWorld { emp_prefs, classes } => plans_from_preferences(emp_prefs, classes),
        PlanSource::FromMatches(side) => Ok(plans_from_matches(side)),
    }
}

/// Offer plans from raw preference rows and classes.
pub fn plans_from_preferences(emp_prefs: &PreferenceTable, classes: &[EmployerClass]) -> Result<Vec<OfferPlan>> {
    if classes.len() != emp_prefs.agent_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} classes for {} employers",
            classes.len(),
            emp_prefs.agent_count()
        )));
    }
    Ok(emp_prefs
        .rows()
        .iter()
        .zip(classes)
        .map(|(row, &class)| OfferPlan::new(class_offer_sequence(row, class)))
        .collect())
}

/// Offer plans from an employer match table; classes play no part.
pub fn plans_from_matches(emp_matches: &SideMatches) -> Vec<OfferPlan> {
    emp_matches.rows().iter().map(|row| OfferPlan::new(row.iter().filter_map(|c| c.counterpart()).collect())).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acceptance {
    /// 1-based offer round.
    pub round: usize,
    pub employer: usize,
    pub candidate: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VacancyReport {
    /// Unfilled employers over all employers, after each round.
    pub employer_vacancy: Vec<f64>,
    /// Jobless candidates over all candidates, after each round.
    pub candidate_vacancy: Vec<f64>,
    pub filled_after: Vec<usize>,
    pub acceptances: Vec<Acceptance>,
}

impl VacancyReport {
    pub fn accepted(&self, employer: usize, candidate: usize) -> Option<usize> {
        self.acceptances.iter().find(|a| a.employer == employer && a.candidate == candidate).map(|a| a.round)
    }
}

pub fn simulate_market(mut plans: Vec<OfferPlan>, candidate_count: usize, rounds: usize) -> Result<VacancyReport> {
    if rounds < 1 {
        return Err(Error::InvalidConfig("the market needs at least one offer round".into()));
    }
    if let Some(bad) = plans.iter().flat_map(|p| p.sequence.iter()).find(|&&c| c >= candidate_count) {
        return Err(Error::DimensionMismatch(format!("offer plan names candidate {} of {candidate_count}", bad + 1)));
    }
    let m = plans.len();
    let mut filled = vec![false; m];
    let mut employed = vec![false; candidate_count];
    let mut filled_count = 0;
    let mut report = VacancyReport {
        employer_vacancy: Vec::with_capacity(rounds),
        candidate_vacancy: Vec::with_capacity(rounds),
        filled_after: Vec::with_capacity(rounds),
        acceptances: Vec::new(),
    };

    for round in 1..=rounds {
        for (e, plan) in plans.iter_mut().enumerate() {
            if filled[e] {
                continue;
            }
            let Some(c) = plan.next_offer() else { continue };
            if !employed[c] {
                employed[c] = true;
                filled[e] = true;
                filled_count += 1;
                report.acceptances.push(Acceptance { round, employer: e, candidate: c });
            }
        }
        let employer_vac = if m == 0 { 0.0 } else { (m - filled_count) as f64 / m as f64 };
        let candidate_vac =
            if candidate_count == 0 { 0.0 } else { (candidate_count - filled_count) as f64 / candidate_count as f64 };
        report.employer_vacancy.push(employer_vac);
        report.candidate_vacancy.push(candidate_vac);
        report.filled_after.push(filled_count);
    }
    Ok(report)
}
