//! Candidate-proposing deferred acceptance for sparse, unequal markets.
//!
//! A pair may only match when each side lists the other; an employer rejects
//! any proposer absent from its own row. Free candidates are processed in
//! ascending index and a displaced candidate resumes proposing immediately
//! (the McVitie-Wilson formulation), so every candidate proposes to each
//! listed employer at most once.

use crate::error::{Error, Result};
use crate::types::{Matching, PreferenceTable, Side};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DaaConfig {
    /// Upper bound on proposals. `None` derives it from the candidate table
    /// (sum of row lengths), which can never be exceeded.
    pub proposal_cap: Option<usize>,
}

pub(crate) fn check_sides(cand_prefs: &PreferenceTable, emp_prefs: &PreferenceTable) -> Result<()> {
    if cand_prefs.side() != Side::Candidate {
        return Err(Error::WrongSide { expected: Side::Candidate, found: cand_prefs.side() });
    }
    if emp_prefs.side() != Side::Employer {
        return Err(Error::WrongSide { expected: Side::Employer, found: emp_prefs.side() });
    }
    Ok(())
}

pub(crate) fn check_tables(cand_prefs: &PreferenceTable, emp_prefs: &PreferenceTable) -> Result<()> {
    check_sides(cand_prefs, emp_prefs)?;
    cand_prefs.ensure_valid(emp_prefs.agent_count())?;
    emp_prefs.ensure_valid(cand_prefs.agent_count())
}

pub fn deferred_acceptance(
    cand_prefs: &PreferenceTable,
    emp_prefs: &PreferenceTable,
    cfg: DaaConfig,
) -> Result<Matching> {
    check_tables(cand_prefs, emp_prefs)?;
    let n = cand_prefs.agent_count();
    let emp_ranks = emp_prefs.rank_index(n);
    propose(cand_prefs, &emp_ranks, cfg)
}

/// Core proposal loop over pre-validated tables. `emp_ranks[e][c]` is the
/// rank employer `e` gives candidate `c`.
pub(crate) fn propose(
    cand_prefs: &PreferenceTable,
    emp_ranks: &[Vec<Option<u32>>],
    cfg: DaaConfig,
) -> Result<Matching> {
    let n = cand_prefs.agent_count();
    let m = emp_ranks.len();
    let cap = cfg.proposal_cap.unwrap_or_else(|| cand_prefs.entry_count());
    let mut matching = Matching::empty(n, m);
    // next[c] = index into c's row of the next employer to propose to
    let mut next = vec![0usize; n];
    let mut proposals = 0usize;

    for start in 0..n {
        let mut proposer = Some(start);
        while let Some(c) = proposer {
            let row = cand_prefs.row(c);
            let Some(&e) = row.get(next[c]) else {
                // list exhausted; c stays unmatched
                break;
            };
            next[c] += 1;
            proposals += 1;
            if proposals > cap {
                return Err(Error::ProposalCapExceeded { cap });
            }
            let Some(rank_c) = emp_ranks[e][c] else {
                // e does not list c
                continue;
            };
            match matching.partner_of_employer(e) {
                None => {
                    matching.engage(c, e);
                    proposer = None;
                }
                Some(held) => {
                    let rank_held = emp_ranks[e][held].expect("held candidates are always listed");
                    if rank_c < rank_held {
                        matching.release_candidate(held);
                        matching.engage(c, e);
                        proposer = Some(held);
                    }
                }
            }
        }
    }
    Ok(matching)
}

/// Pairs `(c, e)` that list each other and would both rather have each other
/// than their partners in `matching` (an unmatched agent prefers any listed
/// counterpart to being alone).
pub fn find_blocking_pairs(
    matching: &Matching,
    cand_prefs: &PreferenceTable,
    emp_prefs: &PreferenceTable,
) -> Vec<(usize, usize)> {
    let n = cand_prefs.agent_count();
    let emp_ranks = emp_prefs.rank_index(n);
    let mut out = Vec::new();
    for c in 0..n {
        let row = cand_prefs.row(c);
        // only employers strictly above c's current partner can block
        let limit = match matching.partner_of_candidate(c) {
            Some(e) => row.iter().position(|&x| x == e).unwrap_or(row.len()),
            None => row.len(),
        };
        for &e in &row[..limit] {
            let Some(rank_c) = emp_ranks[e][c] else { continue };
            let employer_prefers_c = match matching.partner_of_employer(e) {
                None => true,
                Some(held) => emp_ranks[e][held].is_none_or(|rank_held| rank_c < rank_held),
            };
            if employer_prefers_c {
                out.push((c, e));
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cand(rows: Vec<Vec<usize>>) -> PreferenceTable {
        PreferenceTable::new(Side::Candidate, rows)
    }

    fn emp(rows: Vec<Vec<usize>>) -> PreferenceTable {
        PreferenceTable::new(Side::Employer, rows)
    }

    /// Every one-to-one matching over mutually acceptable pairs.
    fn all_matchings(c: &PreferenceTable, e: &PreferenceTable) -> Vec<Vec<Option<usize>>> {
        let n = c.agent_count();
        let m = e.agent_count();
        let acceptable: Vec<Vec<usize>> =
            (0..n).map(|ci| c.row(ci).iter().copied().filter(|&ej| e.row(ej).contains(&ci)).collect()).collect();
        let mut out = Vec::new();
        let mut cur = vec![None; n];
        let mut used = vec![false; m];
        fn rec(
            ci: usize,
            acc: &[Vec<usize>],
            cur: &mut Vec<Option<usize>>,
            used: &mut Vec<bool>,
            out: &mut Vec<Vec<Option<usize>>>,
        ) {
            if ci == acc.len() {
                out.push(cur.clone());
                return;
            }
            cur[ci] = None;
            rec(ci + 1, acc, cur, used, out);
            for &e in &acc[ci] {
                if !used[e] {
                    used[e] = true;
                    cur[ci] = Some(e);
                    rec(ci + 1, acc, cur, used, out);
                    cur[ci] = None;
                    used[e] = false;
                }
            }
        }
        rec(0, &acceptable, &mut cur, &mut used, &mut out);
        out
    }

    /// Blocking pairs by definition, checking every (c, e) pair.
    #[allow(clippy::needless_range_loop)]
    fn brute_blocking(assign: &[Option<usize>], c: &PreferenceTable, e: &PreferenceTable) -> Vec<(usize, usize)> {
        let m = e.agent_count();
        let mut emp_partner = vec![None; m];
        for (ci, a) in assign.iter().enumerate() {
            if let Some(ej) = a {
                emp_partner[*ej] = Some(ci);
            }
        }
        let mut out = Vec::new();
        for ci in 0..c.agent_count() {
            for ej in 0..m {
                let (Some(pc), Some(pe)) = (c.position(ci, ej), e.position(ej, ci)) else { continue };
                if assign[ci] == Some(ej) {
                    continue;
                }
                let c_wants = match assign[ci] {
                    None => true,
                    Some(cur) => pc < c.position(ci, cur).unwrap(),
                };
                let e_wants = match emp_partner[ej] {
                    None => true,
                    Some(cur) => pe < e.position(ej, cur).unwrap(),
                };
                if c_wants && e_wants {
                    out.push((ci, ej));
                }
            }
        }
        out
    }

    fn assignment(m: &Matching) -> Vec<Option<usize>> {
        (0..m.candidate_count()).map(|c| m.partner_of_candidate(c)).collect()
    }

    #[test]
    fn single_mutual_pair() {
        let m = deferred_acceptance(&cand(vec![vec![0]]), &emp(vec![vec![0]]), DaaConfig::default()).unwrap();
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn two_by_two_matches_brute_force() {
        let c = cand(vec![vec![0, 1], vec![0, 1]]);
        let e = emp(vec![vec![1, 0], vec![0, 1]]);
        let stable: Vec<_> =
            all_matchings(&c, &e).into_iter().filter(|a| brute_blocking(a, &c, &e).is_empty()).collect();
        // oracle: the unique stable matching is {(c2,e1),(c1,e2)}
        assert_eq!(stable, vec![vec![Some(1), Some(0)]]);
        let m = deferred_acceptance(&c, &e, DaaConfig::default()).unwrap();
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn unlisted_proposers_are_rejected() {
        let c = cand(vec![vec![0], vec![0], vec![0]]);
        let e = emp(vec![vec![1]]);
        let stable: Vec<_> =
            all_matchings(&c, &e).into_iter().filter(|a| brute_blocking(a, &c, &e).is_empty()).collect();
        assert_eq!(stable, vec![vec![None, Some(0), None]]);
        let m = deferred_acceptance(&c, &e, DaaConfig::default()).unwrap();
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(1, 0)]);
    }

    #[test]
    fn blocking_pairs_of_the_anti_diagonal() {
        let c = cand(vec![vec![0, 1], vec![1, 0]]);
        let e = emp(vec![vec![0, 1], vec![1, 0]]);
        let m = Matching::from_pairs(2, 2, [(0, 1), (1, 0)]).unwrap();
        let mut got = find_blocking_pairs(&m, &c, &e);
        got.sort();
        assert_eq!(got, vec![(0, 0), (1, 1)]);
        assert_eq!(got, brute_blocking(&assignment(&m), &c, &e));
    }

    #[test]
    fn empty_matching_is_blocked_by_mutual_first_choices() {
        let c = cand(vec![vec![0]]);
        let e = emp(vec![vec![0]]);
        assert_eq!(find_blocking_pairs(&Matching::empty(1, 1), &c, &e), vec![(0, 0)]);
    }

    #[test]
    fn proposal_cap_aborts() {
        let c = cand(vec![vec![0, 1], vec![0, 1]]);
        let e = emp(vec![vec![1, 0], vec![0, 1]]);
        let err = deferred_acceptance(&c, &e, DaaConfig { proposal_cap: Some(1) }).unwrap_err();
        assert!(matches!(err, Error::ProposalCapExceeded { cap: 1 }));
    }

    #[test]
    fn rejects_swapped_sides_and_bad_tables() {
        let c = cand(vec![vec![0]]);
        let e = emp(vec![vec![0]]);
        assert!(matches!(deferred_acceptance(&e, &c, DaaConfig::default()), Err(Error::WrongSide { .. })));
        assert!(deferred_acceptance(&cand(vec![vec![3]]), &e, DaaConfig::default()).is_err());
    }

    pub(crate) fn instance() -> impl Strategy<Value = (PreferenceTable, PreferenceTable)> {
        (1usize..=8, 1usize..=8).prop_flat_map(|(n, m)| {
            let cand_rows = proptest::collection::vec(
                Just((0..m).collect::<Vec<_>>())
                    .prop_shuffle()
                    .prop_flat_map(move |p| (0..=m).prop_map(move |len| p[..len].to_vec())),
                n,
            );
            let emp_rows = proptest::collection::vec(
                Just((0..n).collect::<Vec<_>>())
                    .prop_shuffle()
                    .prop_flat_map(move |p| (0..=n).prop_map(move |len| p[..len].to_vec())),
                m,
            );
            (cand_rows, emp_rows).prop_map(|(c, e)| (cand(c), emp(e)))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn output_is_stable_and_candidate_optimal((c, e) in instance()) {
            let m = deferred_acceptance(&c, &e, DaaConfig::default()).unwrap();
            prop_assert!(find_blocking_pairs(&m, &c, &e).is_empty());
            let got = assignment(&m);
            prop_assert!(brute_blocking(&got, &c, &e).is_empty());
            for other in all_matchings(&c, &e) {
                if !brute_blocking(&other, &c, &e).is_empty() {
                    continue;
                }
                for ci in 0..c.agent_count() {
                    if let (Some(mine), Some(theirs)) = (got[ci], other[ci]) {
                        prop_assert!(c.position(ci, mine) <= c.position(ci, theirs));
                    }
                    // matched sets agree across stable matchings
                    prop_assert_eq!(got[ci].is_some(), other[ci].is_some());
                }
            }
        }

        #[test]
        fn checker_agrees_with_definition((c, e) in instance(), seed in any::<u64>()) {
            // arbitrary one-to-one matching over acceptable pairs
            let all = all_matchings(&c, &e);
            let pick = &all[(seed % all.len() as u64) as usize];
            let m = Matching::from_pairs(
                c.agent_count(),
                e.agent_count(),
                pick.iter().enumerate().filter_map(|(ci, x)| x.map(|ej| (ci, ej))),
            ).unwrap();
            let mut got = find_blocking_pairs(&m, &c, &e);
            got.sort();
            prop_assert_eq!(got, brute_blocking(pick, &c, &e));
        }

        #[test]
        fn deterministic_and_bounded((c, e) in instance()) {
            let a = deferred_acceptance(&c, &e, DaaConfig::default()).unwrap();
            let b = deferred_acceptance(&c, &e, DaaConfig::default()).unwrap();
            prop_assert_eq!(&a, &b);
            // the automatic cap is exact, so a tight explicit cap also succeeds
            let tight = DaaConfig { proposal_cap: Some(c.entry_count()) };
            prop_assert_eq!(deferred_acceptance(&c, &e, tight).unwrap(), a);
        }
    }
}
