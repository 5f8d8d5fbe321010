//! Per-round match quality and coverage series.
//!
//! All averages are exact rationals; an average is absent when no agent
//! counts toward the round.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::types::{AgentId, Cell, PreferenceTable, Provenance, SideMatches};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricPoint {
    pub total: u64,
    pub participants: u64,
}

impl MetricPoint {
    pub fn average(&self) -> Option<Ratio<u64>> {
        (self.participants > 0).then(|| Ratio::new(self.total, self.participants))
    }

    pub fn average_f64(&self) -> Option<f64> {
        (self.participants > 0).then(|| self.total as f64 / self.participants as f64)
    }
}

/// One [`MetricPoint`] per round, round 1 first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetricSeries {
    pub points: Vec<MetricPoint>,
}

impl MetricSeries {
    pub fn averages(&self) -> Vec<Option<Ratio<u64>>> {
        self.points.iter().map(MetricPoint::average).collect()
    }

    pub fn averages_f64(&self) -> Vec<Option<f64>> {
        self.points.iter().map(MetricPoint::average_f64).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// How withheld rounds are charged to the agent's next match.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMode {
    Off,
    /// One stated-row-length penalty per withheld round.
    #[default]
    PerRound,
    /// One penalty per run of consecutive withheld rounds.
    PerDrought,
}

impl PenaltyMode {
    pub fn from_flags(apply: bool, per_round: bool) -> Self {
        match (apply, per_round) {
            (false, _) => PenaltyMode::Off,
            (true, true) => PenaltyMode::PerRound,
            (true, false) => PenaltyMode::PerDrought,
        }
    }
}

/// Withheld rounds owed by each agent since its last match, and the size of
/// its stated row (the unit penalty).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PenaltyLedger {
    owed: Vec<u64>,
    unit: Vec<u64>,
    mode: PenaltyMode,
}

impl PenaltyLedger {
    pub fn new(stated: &PreferenceTable, mode: PenaltyMode) -> Self {
        PenaltyLedger {
            owed: vec![0; stated.agent_count()],
            unit: stated.rows().iter().map(|r| r.len() as u64).collect(),
            mode,
        }
    }

    pub fn withhold(&mut self, agent: usize) {
        match self.mode {
            PenaltyMode::Off => {}
            PenaltyMode::PerRound => self.owed[agent] += 1,
            PenaltyMode::PerDrought => self.owed[agent] = 1,
        }
    }

    /// Penalty due on a match received now; clears the debt.
    pub fn settle(&mut self, agent: usize) -> u64 {
        std::mem::take(&mut self.owed[agent]) * self.unit[agent]
    }

    pub fn owed(&self, agent: usize) -> u64 {
        self.owed[agent]
    }
}

/// Position of each round's match in the consulted row: the stated row for
/// [`Provenance::Stated`] cells, the dense row for [`Provenance::Inferred`]
/// ones. Only matched agents count toward a round.
pub fn displacement(
    side: &SideMatches,
    stated: &PreferenceTable,
    dense: Option<&PreferenceTable>,
    penalties: PenaltyMode,
) -> Result<MetricSeries> {
    if stated.agent_count() != side.agent_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} matches for {} agents, stated table has {}",
            side.side(),
            side.agent_count(),
            stated.agent_count()
        )));
    }
    if let Some(d) = dense {
        if d.agent_count() != side.agent_count() {
            return Err(Error::DimensionMismatch("dense table size differs".into()));
        }
    }
    let mut ledger = PenaltyLedger::new(stated, penalties);
    let mut points = Vec::with_capacity(side.rounds());
    for round in 0..side.rounds() {
        let mut point = MetricPoint { total: 0, participants: 0 };
        for agent in 0..side.agent_count() {
            match side.cell(agent, round) {
                Cell::Matched { counterpart, provenance } => {
                    let table = match provenance {
                        Provenance::Stated => stated,
                        Provenance::Inferred => dense.ok_or(Error::MissingDenseTable)?,
                    };
                    let pos = table.position(agent, counterpart).ok_or(Error::CounterpartNotInRow {
                        agent: AgentId { side: side.side(), index: agent },
                        counterpart,
                        round: round + 1,
                    })?;
                    point.total += pos as u64 + ledger.settle(agent);
                    point.participants += 1;
                }
                Cell::Withheld => ledger.withhold(agent),
                Cell::Departed => {}
            }
        }
        points.push(point);
    }
    Ok(MetricSeries { points })
}

/// Withheld agents over agents still in the algorithm, per round.
pub fn withholdings(side: &SideMatches) -> MetricSeries {
    let points = (0..side.rounds())
        .map(|r| MetricPoint { total: side.withheld(r) as u64, participants: side.participants(r) as u64 })
        .collect();
    MetricSeries { points }
}

/// Matched agents whose counterpart appears in their stated row, over
/// matched agents, per round.
pub fn retention(side: &SideMatches, stated: &PreferenceTable) -> MetricSeries {
    let points = (0..side.rounds())
        .map(|round| {
            let mut point = MetricPoint { total: 0, participants: 0 };
            for agent in 0..side.agent_count() {
                if let Some(c) = side.cell(agent, round).counterpart() {
                    point.participants += 1;
                    if stated.rows().get(agent).is_some_and(|row| row.contains(&c)) {
                        point.total += 1;
                    }
                }
            }
            point
        })
        .collect();
    MetricSeries { points }
}
