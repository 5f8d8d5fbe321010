//! Overlay of sparse-run matches with dense-run substitutes.
//!
//! Each withheld round of the normal run is filled with the earliest match
//! from the agent's LMF sequence that (a) the agent does not already hold in
//! any round and (b) no other agent on the same side holds in that round.
//! Departed rounds stay departed. Sides are filled independently, so the two
//! output tables need not mirror each other.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::types::{Cell, MultiMatching, SideMatches};

/// Counterparts already assigned on one side, per round.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundOccupancy {
    rounds: Vec<HashSet<usize>>,
}

impl RoundOccupancy {
    pub fn new(rounds: usize) -> Self {
        RoundOccupancy { rounds: vec![HashSet::new(); rounds] }
    }

    /// Seeded with every assignment already present in `side`.
    pub fn from_side(side: &SideMatches) -> Self {
        let mut occ = RoundOccupancy::new(side.rounds());
        for row in side.rows() {
            for (round, cell) in row.iter().enumerate() {
                if let Some(c) = cell.counterpart() {
                    occ.rounds[round].insert(c);
                }
            }
        }
        occ
    }

    pub fn contains(&self, round: usize, counterpart: usize) -> bool {
        self.rounds.get(round).is_some_and(|s| s.contains(&counterpart))
    }

    /// Returns false if the counterpart was already taken that round.
    pub fn insert(&mut self, round: usize, counterpart: usize) -> bool {
        if round >= self.rounds.len() {
            self.rounds.resize(round + 1, HashSet::new());
        }
        self.rounds[round].insert(counterpart)
    }
}

/// Fills the withheld cells of one agent's normal sequence from its LMF
/// sequence. Filled cells are tagged inferred and recorded in `occ`.
pub fn fill_no_matches(normal: &[Cell], lmf: &[Cell], occ: &mut RoundOccupancy) -> Vec<Cell> {
    let mut out = normal.to_vec();
    let pool: Vec<usize> = lmf.iter().filter_map(|c| c.counterpart()).collect();
    for round in 0..out.len() {
        if out[round] != Cell::Withheld {
            continue;
        }
        let held: HashSet<usize> = out.iter().filter_map(|c| c.counterpart()).collect();
        if let Some(&sub) = pool.iter().find(|&&c| !held.contains(&c) && !occ.contains(round, c)) {
            out[round] = Cell::inferred(sub);
            occ.insert(round, sub);
        }
    }
    out
}

fn fill_side(normal: &SideMatches, lmf: &SideMatches) -> Result<SideMatches> {
    if normal.side() != lmf.side() || normal.agent_count() != lmf.agent_count() {
        return Err(Error::DimensionMismatch(format!(
            "normal {} table has {} agents, LMF {} table has {}",
            normal.side(),
            normal.agent_count(),
            lmf.side(),
            lmf.agent_count()
        )));
    }
    let mut occ = RoundOccupancy::from_side(normal);
    let rows =
        (0..normal.agent_count()).map(|agent| fill_no_matches(normal.row(agent), lmf.row(agent), &mut occ)).collect();
    SideMatches::new(normal.side(), rows)
}

/// Fills the candidate table agent by agent in ascending index, then the
/// employer table the same way. The output keeps the normal run's round
/// count.
pub fn mixed_mmdaa(normal: &MultiMatching, lmf: &MultiMatching) -> Result<MultiMatching> {
    if normal.employers.agent_count() != lmf.employers.agent_count() {
        return Err(Error::DimensionMismatch("employer counts differ".into()));
    }
    Ok(MultiMatching {
        candidates: fill_side(&normal.candidates, &lmf.candidates)?,
        employers: fill_side(&normal.employers, &lmf.employers)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Provenance, Side};

    #[test]
    fn fills_withheld_round_from_lmf() {
        // normal (e3, NONE, e1), lmf (e1, e3, e2), e1 taken in round 2
        let normal = [Cell::stated(2), Cell::Withheld, Cell::stated(0)];
        let lmf = [Cell::stated(0), Cell::inferred(2), Cell::inferred(1)];
        let mut occ = RoundOccupancy::new(3);
        occ.insert(1, 0);
        let out = fill_no_matches(&normal, &lmf, &mut occ);
        assert_eq!(out, vec![Cell::stated(2), Cell::inferred(1), Cell::stated(0)]);
        assert!(occ.contains(1, 1));
    }

    #[test]
    fn complete_rows_are_untouched() {
        let normal = [Cell::stated(1), Cell::stated(0)];
        let lmf = [Cell::inferred(2), Cell::inferred(3)];
        let mut occ = RoundOccupancy::new(2);
        assert_eq!(fill_no_matches(&normal, &lmf, &mut occ), normal.to_vec());
    }

    #[test]
    fn no_legal_substitute_leaves_none() {
        let mut occ = RoundOccupancy::new(1);
        occ.insert(0, 0);
        assert_eq!(fill_no_matches(&[Cell::Withheld], &[Cell::stated(0)], &mut occ), vec![Cell::Withheld]);
    }

    #[test]
    fn departed_rounds_are_not_filled() {
        let mut occ = RoundOccupancy::new(2);
        let out = fill_no_matches(&[Cell::stated(0), Cell::Departed], &[Cell::stated(0), Cell::inferred(1)], &mut occ);
        assert_eq!(out[1], Cell::Departed);
    }

    fn side(s: Side, rows: Vec<Vec<Cell>>) -> SideMatches {
        SideMatches::new(s, rows).unwrap()
    }

    #[test]
    fn worked_example_candidate_table() {
        use Cell::{Departed as D, Withheld as W};
        let s = Cell::stated;
        let normal = MultiMatching {
            candidates: side(Side::Candidate, vec![vec![s(1), s(0), s(2)], vec![s(2), W, s(0)], vec![s(0), D, D]]),
            employers: side(Side::Employer, vec![vec![s(2), s(0), s(1)], vec![s(0), D, D], vec![s(1), W, s(0)]]),
        };
        let lmf = MultiMatching {
            candidates: side(
                Side::Candidate,
                vec![vec![s(1), s(0), s(2)], vec![s(0), s(2), s(1)], vec![s(2), s(1), s(0)]],
            ),
            employers: side(
                Side::Employer,
                vec![vec![s(1), s(0), s(2)], vec![s(0), s(2), s(1)], vec![s(2), s(1), s(0)]],
            ),
        };
        let mixed = mixed_mmdaa(&normal, &lmf).unwrap();
        assert_eq!(mixed.candidates.row(0), normal.candidates.row(0));
        assert_eq!(mixed.candidates.row(1), &[s(2), Cell::inferred(1), s(0)]);
        assert_eq!(mixed.candidates.row(2), &[s(0), D, D]);
        assert_eq!(mixed.employers.row(2), &[s(1), Cell::inferred(2), s(0)]);
        assert!(mixed.violations(false).is_empty());
    }

    #[test]
    fn identical_inputs_pass_through() {
        let s = Cell::stated;
        let mm = MultiMatching {
            candidates: side(Side::Candidate, vec![vec![s(0), s(1)], vec![s(1), s(0)]]),
            employers: side(Side::Employer, vec![vec![s(0), s(1)], vec![s(1), s(0)]]),
        };
        assert_eq!(mixed_mmdaa(&mm, &mm).unwrap(), mm);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = MultiMatching {
            candidates: side(Side::Candidate, vec![vec![Cell::stated(0)]]),
            employers: side(Side::Employer, vec![vec![Cell::stated(0)]]),
        };
        let b = MultiMatching {
            candidates: side(Side::Candidate, vec![vec![Cell::stated(0)], vec![Cell::Withheld]]),
            employers: side(Side::Employer, vec![vec![Cell::stated(0)]]),
        };
        assert!(mixed_mmdaa(&a, &b).is_err());
    }

    #[test]
    fn stated_cells_survive() {
        let s = Cell::stated;
        let normal = side(Side::Candidate, vec![vec![s(0), Cell::Withheld], vec![Cell::Withheld, s(0)]]);
        let lmf = side(Side::Candidate, vec![vec![s(1), s(0)], vec![s(0), s(1)]]);
        let out = fill_side(&normal, &lmf).unwrap();
        for (a, b) in normal.rows().iter().flatten().zip(out.rows().iter().flatten()) {
            if let Cell::Matched { provenance: Provenance::Stated, .. } = a {
                assert_eq!(a, b);
            }
        }
        assert!(out.violations().is_empty());
    }
}
