//! Multi-round deferred acceptance.
//!
//! Each round runs [`deferred_acceptance`](crate::daa::deferred_acceptance)
//! on residual tables, then deletes every matched pair from both sides.
//! Unmatched entries carry over to later rounds.
//!
//! Every agent takes part in round 1. From round 2 on, an agent whose
//! residual row is empty is [`Cell::Departed`]; an agent that still holds
//! entries but gets no partner is [`Cell::Withheld`].
//!
//! The run stops after `max_rounds` rounds, or earlier once a round would
//! produce no pair at all (no mutually acceptable pair is left, which for
//! mutual tables means both tables are empty).

use crate::daa::{self, DaaConfig};
use crate::error::{Error, Result};
use crate::types::{Cell, MultiMatching, PreferenceTable, Side, SideMatches};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MmdaaConfig {
    pub max_rounds: usize,
}

impl MmdaaConfig {
    pub fn new(max_rounds: usize) -> Self {
        MmdaaConfig { max_rounds }
    }

    /// Run until convergence.
    pub fn unbounded() -> Self {
        MmdaaConfig { max_rounds: usize::MAX }
    }
}

pub fn normal_mmdaa(
    cand_prefs: &PreferenceTable,
    emp_prefs: &PreferenceTable,
    cfg: MmdaaConfig,
) -> Result<MultiMatching> {
    if cfg.max_rounds == 0 {
        return Err(Error::InvalidConfig("max_rounds must be at least 1".into()));
    }
    daa::check_tables(cand_prefs, emp_prefs)?;
    let n = cand_prefs.agent_count();
    let m = emp_prefs.agent_count();

    let mut cand = cand_prefs.clone();
    let mut emp = emp_prefs.clone();
    // Rank lookups survive removals: deleting entries never reorders the rest,
    // so we only need to forget removed pairs.
    let mut emp_ranks = emp.rank_index(n);

    let mut cand_rows: Vec<Vec<Cell>> = vec![Vec::new(); n];
    let mut emp_rows: Vec<Vec<Cell>> = vec![Vec::new(); m];

    let mut round = 0;
    while round < cfg.max_rounds && !(cand.is_empty() && emp.is_empty()) {
        let matching = daa::propose(&cand, &emp_ranks, DaaConfig::default())?;
        if matching.is_empty() {
            break;
        }
        for (c, row) in cand_rows.iter_mut().enumerate() {
            row.push(match matching.partner_of_candidate(c) {
                Some(e) => Cell::stated(e),
                None if round > 0 && cand.row(c).is_empty() => Cell::Departed,
                None => Cell::Withheld,
            });
        }
        for (e, row) in emp_rows.iter_mut().enumerate() {
            row.push(match matching.partner_of_employer(e) {
                Some(c) => Cell::stated(c),
                None if round > 0 && emp.row(e).is_empty() => Cell::Departed,
                None => Cell::Withheld,
            });
        }
        for (c, e) in matching.pairs() {
            cand.remove_entry(c, e);
            emp.remove_entry(e, c);
            emp_ranks[e][c] = None;
        }
        round += 1;
    }

    Ok(MultiMatching {
        candidates: SideMatches::new(Side::Candidate, cand_rows)?,
        employers: SideMatches::new(Side::Employer, emp_rows)?,
    })
}

/// Residual tables at the start of round `round` (0-based): the inputs with
/// every pair matched in earlier rounds removed.
pub fn residual_tables(
    cand_prefs: &PreferenceTable,
    emp_prefs: &PreferenceTable,
    matches: &MultiMatching,
    round: usize,
) -> (PreferenceTable, PreferenceTable) {
    let mut cand = cand_prefs.clone();
    let mut emp = emp_prefs.clone();
    for r in 0..round.min(matches.candidates.rounds()) {
        for c in 0..matches.candidates.agent_count() {
            if let Some(e) = matches.candidates.cell(c, r).counterpart() {
                cand.remove_entry(c, e);
                emp.remove_entry(e, c);
            }
        }
    }
    (cand, emp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::daa::{deferred_acceptance, find_blocking_pairs};
    use proptest::prelude::*;

    fn tables(c: Vec<Vec<usize>>, e: Vec<Vec<usize>>) -> (PreferenceTable, PreferenceTable) {
        (PreferenceTable::new(Side::Candidate, c), PreferenceTable::new(Side::Employer, e))
    }

    fn counterparts(row: &[Cell]) -> Vec<Option<usize>> {
        row.iter().map(|c| c.counterpart()).collect()
    }

    #[test]
    fn one_round_is_plain_daa() {
        let (c, e) = tables(vec![vec![0, 1], vec![0, 1]], vec![vec![1, 0], vec![0, 1]]);
        let mm = normal_mmdaa(&c, &e, MmdaaConfig::new(1)).unwrap();
        assert_eq!(mm.rounds(), 1);
        assert_eq!(mm.round_matching(0).unwrap(), deferred_acceptance(&c, &e, DaaConfig::default()).unwrap());
    }

    #[test]
    fn two_rounds_swap_partners() {
        let (c, e) = tables(vec![vec![0, 1], vec![1, 0]], vec![vec![0, 1], vec![1, 0]]);
        let mm = normal_mmdaa(&c, &e, MmdaaConfig::new(2)).unwrap();
        assert_eq!(counterparts(mm.candidates.row(0)), vec![Some(0), Some(1)]);
        assert_eq!(counterparts(mm.candidates.row(1)), vec![Some(1), Some(0)]);
    }

    #[test]
    fn three_by_three_worked_example() {
        // c1:[e2,e1,e3] c2:[e3,e1] c3:[e1]; e1:[c1,c2,c3] e2:[c1] e3:[c2,c1]
        let (c, e) = tables(vec![vec![1, 0, 2], vec![2, 0], vec![0]], vec![vec![0, 1, 2], vec![0], vec![1, 0]]);
        let mm = normal_mmdaa(&c, &e, MmdaaConfig::new(3)).unwrap();
        assert_eq!(mm.candidates.row(0), &[Cell::stated(1), Cell::stated(0), Cell::stated(2)]);
        assert_eq!(mm.candidates.row(1), &[Cell::stated(2), Cell::Withheld, Cell::stated(0)]);
        assert_eq!(mm.candidates.row(2), &[Cell::stated(0), Cell::Departed, Cell::Departed]);
        assert_eq!(mm.employers.row(0), &[Cell::stated(2), Cell::stated(0), Cell::stated(1)]);
        assert_eq!(mm.employers.row(1), &[Cell::stated(0), Cell::Departed, Cell::Departed]);
        assert_eq!(mm.employers.row(2), &[Cell::stated(1), Cell::Withheld, Cell::stated(0)]);
        assert!(mm.violations(true).is_empty());
    }

    #[test]
    fn stops_when_tables_run_dry() {
        let (c, e) = tables(vec![vec![0]], vec![vec![0]]);
        let mm = normal_mmdaa(&c, &e, MmdaaConfig::new(10)).unwrap();
        assert_eq!(mm.rounds(), 1);
    }

    #[test]
    fn zero_rounds_rejected() {
        let (c, e) = tables(vec![vec![0]], vec![vec![0]]);
        assert!(normal_mmdaa(&c, &e, MmdaaConfig::new(0)).is_err());
    }

    #[test]
    fn invalid_tables_rejected() {
        let (c, e) = tables(vec![vec![0, 0]], vec![vec![0]]);
        assert!(matches!(normal_mmdaa(&c, &e, MmdaaConfig::new(2)), Err(Error::InvalidTable { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn rounds_are_stable_against_residuals((c, e) in crate::daa::tests::instance(), k in 1usize..8) {
            let mm = normal_mmdaa(&c, &e, MmdaaConfig::new(k)).unwrap();
            prop_assert!(mm.violations(true).is_empty());
            let mut consumed = 0;
            for r in 0..mm.rounds() {
                let (rc, re) = residual_tables(&c, &e, &mm, r);
                let matching = mm.round_matching(r).unwrap();
                prop_assert!(find_blocking_pairs(&matching, &rc, &re).is_empty());
                for (ci, ej) in matching.pairs() {
                    // each consumed entry is live in both residual rows
                    prop_assert!(rc.row(ci).contains(&ej) && re.row(ej).contains(&ci));
                }
                consumed += matching.len();
            }
            prop_assert!(consumed <= c.entry_count().min(e.entry_count()));
            // departure is permanent
            for side in [&mm.candidates, &mm.employers] {
                for row in side.rows() {
                    if let Some(first) = row.iter().position(|x| *x == Cell::Departed) {
                        prop_assert!(row[first..].iter().all(|x| *x == Cell::Departed));
                    }
                }
            }
        }
    }
}
