//! Shared domain types.
//!
//! Agent indices are 0-based everywhere in memory. Ranks are positional: the
//! rank of a counterpart is its index within the owning agent's row, so a
//! table can never contain rank gaps or ties.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Candidate,
    Employer,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Candidate => Side::Employer,
            Side::Employer => Side::Candidate,
        }
    }

    /// Single-letter code used by the CSV formats.
    pub fn code(self) -> &'static str {
        match self {
            Side::Candidate => "C",
            Side::Employer => "E",
        }
    }

    pub fn from_code(code: &str) -> Option<Side> {
        match code {
            "C" | "c" => Some(Side::Candidate),
            "E" | "e" => Some(Side::Employer),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Candidate => "candidate",
            Side::Employer => "employer",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId {
    pub side: Side,
    pub index: usize,
}

impl AgentId {
    pub fn candidate(index: usize) -> Self {
        AgentId { side: Side::Candidate, index }
    }

    pub fn employer(index: usize) -> Self {
        AgentId { side: Side::Employer, index }
    }
}

impl fmt::Display for AgentId {
    // 1-based, like the file formats.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.side.code(), self.index + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IssueKind {
    DuplicateCounterpart(usize),
    OutOfRange(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationIssue {
    pub agent: AgentId,
    pub kind: IssueKind,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            IssueKind::DuplicateCounterpart(c) => {
                write!(f, "{}: duplicate counterpart {}", self.agent, c + 1)
            }
            IssueKind::OutOfRange(c) => write!(f, "{}: counterpart {} out of range", self.agent, c + 1),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Ordered partial rankings, one row per agent of `side`, most preferred first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreferenceTable {
    side: Side,
    rows: Vec<Vec<usize>>,
}

impl PreferenceTable {
    pub fn new(side: Side, rows: Vec<Vec<usize>>) -> Self {
        PreferenceTable { side, rows }
    }

    /// Builds a table and rejects it unless [`validate`](Self::validate) is clean.
    pub fn validated(side: Side, rows: Vec<Vec<usize>>, counterpart_count: usize) -> Result<Self> {
        let table = PreferenceTable::new(side, rows);
        table.ensure_valid(counterpart_count)?;
        Ok(table)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn row(&self, agent: usize) -> &[usize] {
        &self.rows[agent]
    }

    /// Number of agents (rows), including agents with empty rows.
    pub fn agent_count(&self) -> usize {
        self.rows.len()
    }

    pub fn entry_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// True when no row holds any entry.
    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn max_row_len(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// 0-based rank of `counterpart` in `agent`'s row.
    pub fn position(&self, agent: usize, counterpart: usize) -> Option<usize> {
        self.rows[agent].iter().position(|&c| c == counterpart)
    }

    pub fn validate(&self, counterpart_count: usize) -> ValidationReport {
        let mut issues = Vec::new();
        for (agent, row) in self.rows.iter().enumerate() {
            let id = AgentId { side: self.side, index: agent };
            let mut seen = HashSet::with_capacity(row.len());
            for &c in row {
                if c >= counterpart_count {
                    issues.push(ValidationIssue { agent: id, kind: IssueKind::OutOfRange(c) });
                } else if !seen.insert(c) {
                    issues.push(ValidationIssue { agent: id, kind: IssueKind::DuplicateCounterpart(c) });
                }
            }
        }
        ValidationReport { issues }
    }

    pub fn ensure_valid(&self, counterpart_count: usize) -> Result<()> {
        let report = self.validate(counterpart_count);
        if report.ok() {
            return Ok(());
        }
        let detail = report.issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        Err(Error::InvalidTable { side: self.side, detail })
    }

    /// Dense rank lookup: `ranks[agent][counterpart]` is the position of the
    /// counterpart in the agent's row, if listed.
    pub fn rank_index(&self, counterpart_count: usize) -> Vec<Vec<Option<u32>>> {
        self.rows
            .iter()
            .map(|row| {
                let mut ranks = vec![None; counterpart_count];
                for (pos, &c) in row.iter().enumerate() {
                    ranks[c] = Some(pos as u32);
                }
                ranks
            })
            .collect()
    }

    pub(crate) fn remove_entry(&mut self, agent: usize, counterpart: usize) -> bool {
        let row = &mut self.rows[agent];
        match row.iter().position(|&c| c == counterpart) {
            Some(pos) => {
                row.remove(pos);
                true
            }
            None => false,
        }
    }
}

/// A one-to-one set of (candidate, employer) pairs. Unmatched agents have no
/// partner; the representation makes double assignment impossible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    cand_partner: Vec<Option<usize>>,
    emp_partner: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(candidate_count: usize, employer_count: usize) -> Self {
        Matching { cand_partner: vec![None; candidate_count], emp_partner: vec![None; employer_count] }
    }

    pub fn from_pairs(
        candidate_count: usize,
        employer_count: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut m = Matching::empty(candidate_count, employer_count);
        for (c, e) in pairs {
            if c >= candidate_count || e >= employer_count {
                return Err(Error::DimensionMismatch(format!(
                    "pair (C{}, E{}) outside a {candidate_count}x{employer_count} market",
                    c + 1,
                    e + 1
                )));
            }
            if m.cand_partner[c].is_some() || m.emp_partner[e].is_some() {
                return Err(Error::InvalidConfig(format!("pair (C{}, E{}) breaks one-to-one matching", c + 1, e + 1)));
            }
            m.engage(c, e);
        }
        Ok(m)
    }

    pub fn candidate_count(&self) -> usize {
        self.cand_partner.len()
    }

    pub fn employer_count(&self) -> usize {
        self.emp_partner.len()
    }

    pub fn partner_of_candidate(&self, c: usize) -> Option<usize> {
        self.cand_partner[c]
    }

    pub fn partner_of_employer(&self, e: usize) -> Option<usize> {
        self.emp_partner[e]
    }

    /// Pairs in ascending candidate order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cand_partner.iter().enumerate().filter_map(|(c, e)| e.map(|e| (c, e)))
    }

    pub fn len(&self) -> usize {
        self.cand_partner.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn engage(&mut self, c: usize, e: usize) {
        self.cand_partner[c] = Some(e);
        self.emp_partner[e] = Some(c);
    }

    pub(crate) fn release_candidate(&mut self, c: usize) {
        if let Some(e) = self.cand_partner[c].take() {
            self.emp_partner[e] = None;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// The counterpart appears in the agent's original stated row.
    Stated,
    /// The counterpart came from a densified (inferred) ranking.
    Inferred,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Stated => "stated",
            Provenance::Inferred => "inferred",
        }
    }
}

/// One agent's outcome in one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Matched {
        counterpart: usize,
        provenance: Provenance,
    },
    /// Still has preferences but received no partner (a withholding).
    Withheld,
    /// Residual row exhausted; out of the algorithm for this round.
    Departed,
}

impl Cell {
    pub fn stated(counterpart: usize) -> Self {
        Cell::Matched { counterpart, provenance: Provenance::Stated }
    }

    pub fn inferred(counterpart: usize) -> Self {
        Cell::Matched { counterpart, provenance: Provenance::Inferred }
    }

    pub fn counterpart(self) -> Option<usize> {
        match self {
            Cell::Matched { counterpart, .. } => Some(counterpart),
            _ => None,
        }
    }

    pub fn is_participating(self) -> bool {
        !matches!(self, Cell::Departed)
    }
}

/// Rounds x agents table for one side: `row(agent)[round]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SideMatches {
    side: Side,
    rows: Vec<Vec<Cell>>,
}

impl SideMatches {
    /// All rows must have the same length (the round count).
    pub fn new(side: Side, rows: Vec<Vec<Cell>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().position(|r| r.len() != first.len()) {
                return Err(Error::DimensionMismatch(format!(
                    "{side} {} has {} rounds, expected {}",
                    bad + 1,
                    rows[bad].len(),
                    first.len()
                )));
            }
        }
        Ok(SideMatches { side, rows })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn agent_count(&self) -> usize {
        self.rows.len()
    }

    pub fn rounds(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, agent: usize) -> &[Cell] {
        &self.rows[agent]
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn cell(&self, agent: usize, round: usize) -> Cell {
        self.rows[agent][round]
    }

    pub fn participants(&self, round: usize) -> usize {
        self.rows.iter().filter(|r| r[round].is_participating()).count()
    }

    pub fn withheld(&self, round: usize) -> usize {
        self.rows.iter().filter(|r| r[round] == Cell::Withheld).count()
    }

    pub fn matched(&self, round: usize) -> usize {
        self.rows.iter().filter(|r| r[round].counterpart().is_some()).count()
    }

    /// Same assignments with every matched cell carrying `provenance`.
    pub fn with_provenance(&self, provenance: Provenance) -> SideMatches {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&cell| match cell {
                        Cell::Matched { counterpart, .. } => Cell::Matched { counterpart, provenance },
                        other => other,
                    })
                    .collect()
            })
            .collect();
        SideMatches { side: self.side, rows }
    }

    /// Keeps only the first `rounds` rounds.
    pub fn truncated(&self, rounds: usize) -> SideMatches {
        let rows = self.rows.iter().map(|r| r[..rounds.min(r.len())].to_vec()).collect();
        SideMatches { side: self.side, rows }
    }

    /// Violations of the per-side invariants: a counterpart used twice in a
    /// round, or an agent given the same counterpart in two rounds.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for round in 0..self.rounds() {
            let mut seen = HashSet::new();
            for (agent, row) in self.rows.iter().enumerate() {
                if let Some(c) = row[round].counterpart() {
                    if !seen.insert(c) {
                        out.push(format!(
                            "round {}: counterpart {} assigned twice on the {} side (again at agent {})",
                            round + 1,
                            c + 1,
                            self.side,
                            agent + 1
                        ));
                    }
                }
            }
        }
        for (agent, row) in self.rows.iter().enumerate() {
            let mut seen = HashSet::new();
            for c in row.iter().filter_map(|c| c.counterpart()) {
                if !seen.insert(c) {
                    out.push(format!("{} {} receives counterpart {} in two rounds", self.side, agent + 1, c + 1));
                }
            }
        }
        out
    }
}

/// Output of a multi-round matching run: one table per side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiMatching {
    pub candidates: SideMatches,
    pub employers: SideMatches,
}

impl MultiMatching {
    pub fn rounds(&self) -> usize {
        self.candidates.rounds().max(self.employers.rounds())
    }

    pub fn side(&self, side: Side) -> &SideMatches {
        match side {
            Side::Candidate => &self.candidates,
            Side::Employer => &self.employers,
        }
    }

    pub fn truncated(&self, rounds: usize) -> MultiMatching {
        MultiMatching { candidates: self.candidates.truncated(rounds), employers: self.employers.truncated(rounds) }
    }

    /// Round `round` as a [`Matching`], read from the candidate table.
    pub fn round_matching(&self, round: usize) -> Result<Matching> {
        let pairs = (0..self.candidates.agent_count())
            .filter_map(|c| self.candidates.cell(c, round).counterpart().map(|e| (c, e)));
        Matching::from_pairs(self.candidates.agent_count(), self.employers.agent_count(), pairs)
    }

    /// Every invariant violation. With `cross_side`, also requires the two
    /// tables to describe the same pairs every round.
    pub fn violations(&self, cross_side: bool) -> Vec<String> {
        let mut out = self.candidates.violations();
        out.extend(self.employers.violations());
        if cross_side {
            if self.candidates.rounds() != self.employers.rounds() {
                out.push(format!(
                    "candidate table has {} rounds, employer table {}",
                    self.candidates.rounds(),
                    self.employers.rounds()
                ));
                return out;
            }
            for round in 0..self.candidates.rounds() {
                for c in 0..self.candidates.agent_count() {
                    if let Some(e) = self.candidates.cell(c, round).counterpart() {
                        let back = self.employers.rows.get(e).and_then(|r| r[round].counterpart());
                        if back != Some(c) {
                            out.push(format!("round {}: C{} -> E{} not mirrored", round + 1, c + 1, e + 1));
                        }
                    }
                }
                for e in 0..self.employers.agent_count() {
                    if let Some(c) = self.employers.cell(e, round).counterpart() {
                        let back = self.candidates.rows.get(c).and_then(|r| r[round].counterpart());
                        if back != Some(e) {
                            out.push(format!("round {}: E{} -> C{} not mirrored", round + 1, e + 1, c + 1));
                        }
                    }
                }
            }
        }
        out
    }
}
