//! CSV encodings for preference tables, multi-round matchings and factors.
//!
//! Agents, ranks, rounds and counterparts are 1-based on disk. An agent with
//! an empty row is written as a single line with blank rank and counterpart
//! so that trailing empty agents survive a round trip. Withheld cells carry
//! counterpart `-1` and a blank provenance; departed cells are omitted.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmf::FactorPair;
use crate::types::{Cell, MultiMatching, PreferenceTable, Provenance, Side, SideMatches};

#[derive(Debug, Serialize, Deserialize)]
struct PrefRecord {
    side: String,
    agent: usize,
    rank: Option<usize>,
    counterpart: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MatchRecord {
    side: String,
    agent: usize,
    round: usize,
    counterpart: i64,
    provenance: String,
}

#[derive(Debug, Serialize)]
struct FactorRecord {
    side: String,
    row: usize,
    factor_index: usize,
    value: f64,
}

fn parse_side(code: &str, line: usize) -> Result<Side> {
    Side::from_code(code).ok_or_else(|| Error::Parse { line, detail: format!("unknown side {code:?}") })
}

fn one_based(value: usize, what: &str, line: usize) -> Result<usize> {
    value.checked_sub(1).ok_or_else(|| Error::Parse { line, detail: format!("{what} must be at least 1") })
}

pub fn write_preferences<W: Write>(out: W, tables: &[&PreferenceTable]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for table in tables {
        let side = table.side().code().to_string();
        for (agent, row) in table.rows().iter().enumerate() {
            if row.is_empty() {
                w.serialize(PrefRecord { side: side.clone(), agent: agent + 1, rank: None, counterpart: None })?;
            }
            for (rank, &c) in row.iter().enumerate() {
                w.serialize(PrefRecord {
                    side: side.clone(),
                    agent: agent + 1,
                    rank: Some(rank + 1),
                    counterpart: Some(c + 1),
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads candidate and employer tables. Ranks of each agent must run
/// 1, 2, 3, ... in file order; agents that never appear get empty rows.
pub fn read_preferences<R: Read>(input: R) -> Result<(PreferenceTable, PreferenceTable)> {
    let mut rows: [Vec<Vec<usize>>; 2] = [Vec::new(), Vec::new()];
    let mut rdr = csv::Reader::from_reader(input);
    for (i, rec) in rdr.deserialize::<PrefRecord>().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let side = parse_side(&rec.side, line)?;
        let agent = one_based(rec.agent, "agent", line)?;
        let table = &mut rows[side as usize];
        if table.len() <= agent {
            table.resize(agent + 1, Vec::new());
        }
        match (rec.rank, rec.counterpart) {
            (None, None) => {
                if !table[agent].is_empty() {
                    return Err(Error::Parse {
                        line,
                        detail: format!("empty marker for non-empty row of agent {}", agent + 1),
                    });
                }
            }
            (Some(rank), Some(c)) => {
                if rank != table[agent].len() + 1 {
                    return Err(Error::Parse {
                        line,
                        detail: format!(
                            "expected rank {} for agent {}, found {rank}",
                            table[agent].len() + 1,
                            agent + 1
                        ),
                    });
                }
                table[agent].push(one_based(c, "counterpart", line)?);
            }
            _ => {
                return Err(Error::Parse {
                    line,
                    detail: "rank and counterpart must both be present or both blank".into(),
                })
            }
        }
    }
    let [cand, emp] = rows;
    let (n, m) = (cand.len(), emp.len());
    let cand = PreferenceTable::new(Side::Candidate, cand);
    let emp = PreferenceTable::new(Side::Employer, emp);
    cand.ensure_valid(m)?;
    emp.ensure_valid(n)?;
    Ok((cand, emp))
}

pub fn write_matching<W: Write>(out: W, matching: &MultiMatching) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for side in [&matching.candidates, &matching.employers] {
        let code = side.side().code();
        for (agent, row) in side.rows().iter().enumerate() {
            for (round, cell) in row.iter().enumerate() {
                let (counterpart, provenance) = match *cell {
                    Cell::Matched { counterpart, provenance } => (counterpart as i64 + 1, provenance.as_str()),
                    Cell::Withheld => (-1, ""),
                    Cell::Departed => continue,
                };
                w.serialize(MatchRecord {
                    side: code.to_string(),
                    agent: agent + 1,
                    round: round + 1,
                    counterpart,
                    provenance: provenance.to_string(),
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_matching`]. Agent and round counts are the largest
/// seen per side; absent cells are departures.
pub fn read_matching<R: Read>(input: R) -> Result<MultiMatching> {
    let mut cells: [Vec<Vec<Cell>>; 2] = [Vec::new(), Vec::new()];
    let mut rounds = 0;
    let mut rdr = csv::Reader::from_reader(input);
    for (i, rec) in rdr.deserialize::<MatchRecord>().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let side = parse_side(&rec.side, line)?;
        let agent = one_based(rec.agent, "agent", line)?;
        let round = one_based(rec.round, "round", line)?;
        let cell = match (rec.counterpart, rec.provenance.as_str()) {
            (-1, "") => Cell::Withheld,
            (c, p) if c >= 1 => {
                let provenance = match p {
                    "stated" => Provenance::Stated,
                    "inferred" => Provenance::Inferred,
                    other => return Err(Error::Parse { line, detail: format!("unknown provenance {other:?}") }),
                };
                Cell::Matched { counterpart: c as usize - 1, provenance }
            }
            (c, p) => return Err(Error::Parse { line, detail: format!("bad cell {c},{p:?}") }),
        };
        let table = &mut cells[side as usize];
        if table.len() <= agent {
            table.resize(agent + 1, Vec::new());
        }
        let row = &mut table[agent];
        if row.len() <= round {
            row.resize(round + 1, Cell::Departed);
        }
        row[round] = cell;
        rounds = rounds.max(round + 1);
    }
    let [cand, emp] = cells.map(|mut t| {
        for row in &mut t {
            row.resize(rounds, Cell::Departed);
        }
        t
    });
    Ok(MultiMatching {
        candidates: SideMatches::new(Side::Candidate, cand)?,
        employers: SideMatches::new(Side::Employer, emp)?,
    })
}

/// Long-format dump of each side's agent factors (the left matrix of its fit).
pub fn write_factors<W: Write>(out: W, fits: &[(Side, &FactorPair)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for &(side, pair) in fits {
        for ((row, k), &value) in pair.left.indexed_iter() {
            w.serialize(FactorRecord { side: side.code().to_string(), row: row + 1, factor_index: k + 1, value })?;
        }
    }
    w.flush()?;
    Ok(())
}
