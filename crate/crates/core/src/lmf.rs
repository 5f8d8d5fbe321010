//! Preference densification through masked non-negative matrix factorization.
//!
//! A sparse ranking table becomes a [`ScoreMatrix`] (linear scores, observed
//! cells masked in), is factorized by alternating projected gradient with
//! Armijo backtracking, and the reconstruction is turned back into one total
//! order per agent by [`densify`]. [`lmf_mmdaa`] runs the multi-round matcher
//! on the densified tables.

use ndarray::{Array1, Array2, Zip};
use rand::distr::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::daa;
use crate::error::{Error, Result};
use crate::mmdaa::{normal_mmdaa, MmdaaConfig};
use crate::types::{Cell, MultiMatching, PreferenceTable, Provenance, SideMatches};

/// Non-negative scores with an observation mask. Unobserved cells hold 0 and
/// never enter the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    values: Array2<f64>,
    mask: Array2<bool>,
}

impl ScoreMatrix {
    pub fn new(values: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::DimensionMismatch(format!("values {:?} vs mask {:?}", values.dim(), mask.dim())));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig("scores must be finite and non-negative".into()));
        }
        let mut values = values;
        Zip::from(&mut values).and(&mask).for_each(|v, &seen| {
            if !seen {
                *v = 0.0;
            }
        });
        Ok(ScoreMatrix { values, mask })
    }

    /// Fully observed matrix.
    pub fn dense(values: Array2<f64>) -> Result<Self> {
        let mask = Array2::from_elem(values.dim(), true);
        ScoreMatrix::new(values, mask)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn observed(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Observed cell `(i, j)` at 0-based position `r` of row `i` scores
/// `R - r`, where `R` is the longest row in the table.
pub fn ranks_to_scores(table: &PreferenceTable, counterpart_count: usize) -> Result<ScoreMatrix> {
    if table.is_empty() {
        return Err(Error::NothingToFactorize);
    }
    table.ensure_valid(counterpart_count)?;
    let r_max = table.max_row_len();
    let n = table.agent_count();
    let mut values = Array2::zeros((n, counterpart_count));
    let mut mask = Array2::from_elem((n, counterpart_count), false);
    for (i, row) in table.rows().iter().enumerate() {
        for (pos, &j) in row.iter().enumerate() {
            values[[i, j]] = (r_max - pos) as f64;
            mask[[i, j]] = true;
        }
    }
    Ok(ScoreMatrix { values, mask })
}

/// `left` (n x f) times `right` (f x m) approximates the score matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPair {
    pub left: Array2<f64>,
    pub right: Array2<f64>,
}

impl FactorPair {
    pub fn rank(&self) -> usize {
        self.left.ncols()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        self.left.dot(&self.right)
    }

    pub fn row_scores(&self, row: usize) -> Array1<f64> {
        self.left.row(row).dot(&self.right)
    }
}

/// How stated rankings are reconciled with reconstructed scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reconcile {
    /// Pure reconstructed-score order.
    AsIs,
    /// Stated items keep their relative order; inferred items interleave.
    #[default]
    RelativeOrder,
    /// Stated items first in stated order, inferred items after by score.
    KeepStated,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LmfConfig {
    /// Requested latent rank; [`lmf_mmdaa`] clamps it to the market size.
    pub rank: usize,
    pub max_iterations: usize,
    /// Stop once the relative loss decrease of an iteration falls below this.
    pub tolerance: f64,
    pub seed: u64,
    /// L2 weight on both factors.
    pub regularization: f64,
    pub reconcile: Reconcile,
}

impl Default for LmfConfig {
    fn default() -> Self {
        LmfConfig {
            rank: 10,
            max_iterations: 500,
            tolerance: 1e-4,
            seed: 0,
            regularization: 0.01,
            reconcile: Reconcile::RelativeOrder,
        }
    }
}

impl LmfConfig {
    // Negated comparisons so NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn check(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidRank { rank: 0, max: usize::MAX });
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.regularization >= 0.0) {
            return Err(Error::InvalidConfig("regularization must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NnmfFit {
    pub factors: FactorPair,
    /// Loss at initialization followed by the loss after each iteration.
    pub losses: Vec<f64>,
    pub converged: bool,
}

impl NnmfFit {
    pub fn iterations(&self) -> usize {
        self.losses.len() - 1
    }
}

// Armijo parameters from the projected-gradient NMF literature.
const SIGMA: f64 = 0.01;
const BETA: f64 = 0.1;
const MAX_STEP_TRIALS: usize = 20;

struct Problem<'a> {
    values: &'a Array2<f64>,
    weights: Array2<f64>,
    lambda: f64,
}

impl Problem<'_> {
    fn loss(&self, left: &Array2<f64>, right: &Array2<f64>) -> f64 {
        let recon = left.dot(right);
        let mut fit = 0.0;
        Zip::from(&recon).and(self.values).and(&self.weights).for_each(|&r, &v, &w| {
            let d = r - v;
            fit += w * d * d;
        });
        fit + self.lambda * (sq_norm(left) + sq_norm(right))
    }

    /// Masked residual `M o (left * right - V)`.
    fn residual(&self, left: &Array2<f64>, right: &Array2<f64>) -> Array2<f64> {
        let mut recon = left.dot(right);
        Zip::from(&mut recon).and(self.values).and(&self.weights).for_each(|r, &v, &w| {
            *r = w * (*r - v);
        });
        recon
    }
}

fn sq_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

enum Block {
    Left,
    Right,
}

/// One projected-gradient step on one factor with an adaptive Armijo step.
/// Returns the new loss; the factor is left unchanged when no trial step
/// gives sufficient decrease.
fn pg_step(
    problem: &Problem<'_>,
    left: &mut Array2<f64>,
    right: &mut Array2<f64>,
    block: Block,
    step: &mut f64,
    loss: f64,
) -> f64 {
    let resid = problem.residual(left, right);
    let (x, grad) = match block {
        Block::Left => {
            let g = 2.0 * (resid.dot(&right.t()) + problem.lambda * &*left);
            (left.clone(), g)
        }
        Block::Right => {
            let g = 2.0 * (left.t().dot(&resid) + problem.lambda * &*right);
            (right.clone(), g)
        }
    };

    let project = |alpha: f64| -> Array2<f64> {
        let mut next = &x - &(alpha * &grad);
        next.mapv_inplace(|v| v.max(0.0));
        next
    };
    let eval = |candidate: &Array2<f64>| -> f64 {
        match block {
            Block::Left => problem.loss(candidate, right),
            Block::Right => problem.loss(left, candidate),
        }
    };
    let sufficient = |candidate: &Array2<f64>, new_loss: f64| -> bool {
        let directional: f64 = Zip::from(&grad).and(candidate).and(&x).fold(0.0, |acc, &g, &c, &o| acc + g * (c - o));
        new_loss <= loss && new_loss - loss <= SIGMA * directional
    };

    let mut alpha = *step;
    let mut best: Option<(Array2<f64>, f64)> = None;
    let first = project(alpha);
    let first_loss = eval(&first);
    if sufficient(&first, first_loss) {
        // grow the step while it keeps giving sufficient decrease
        best = Some((first, first_loss));
        for _ in 0..MAX_STEP_TRIALS {
            let bigger = alpha / BETA;
            let cand = project(bigger);
            let cand_loss = eval(&cand);
            if !sufficient(&cand, cand_loss) || cand == best.as_ref().unwrap().0 {
                break;
            }
            alpha = bigger;
            best = Some((cand, cand_loss));
        }
    } else {
        for _ in 0..MAX_STEP_TRIALS {
            alpha *= BETA;
            let cand = project(alpha);
            let cand_loss = eval(&cand);
            if sufficient(&cand, cand_loss) {
                best = Some((cand, cand_loss));
                break;
            }
        }
    }
    *step = alpha;

    match best {
        Some((next, new_loss)) => {
            match block {
                Block::Left => *left = next,
                Block::Right => *right = next,
            }
            new_loss
        }
        None => loss,
    }
}

/// Factorizes `scores` into non-negative factors of rank `cfg.rank`,
/// minimizing the masked squared error plus `cfg.regularization` times the
/// squared Frobenius norms of both factors.
pub fn nnmf(scores: &ScoreMatrix, cfg: &LmfConfig) -> Result<NnmfFit> {
    cfg.check()?;
    let (n, m) = scores.dim();
    if scores.observed() == 0 {
        return Err(Error::NothingToFactorize);
    }
    let max_rank = n.min(m);
    if cfg.rank > max_rank {
        return Err(Error::InvalidRank { rank: cfg.rank, max: max_rank });
    }
    let f = cfg.rank;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut left = Array2::from_shape_simple_fn((n, f), || Open01.sample(&mut rng));
    let mut right = Array2::from_shape_simple_fn((f, m), || Open01.sample(&mut rng));

    let problem = Problem {
        values: scores.values(),
        weights: scores.mask().mapv(|b| if b { 1.0 } else { 0.0 }),
        lambda: cfg.regularization,
    };

    let mut loss = problem.loss(&left, &right);
    let mut losses = vec![loss];
    let (mut step_left, mut step_right) = (1.0, 1.0);
    let mut converged = false;

    for iteration in 1..=cfg.max_iterations {
        let prev = loss;
        loss = pg_step(&problem, &mut left, &mut right, Block::Left, &mut step_left, loss);
        loss = pg_step(&problem, &mut left, &mut right, Block::Right, &mut step_right, loss);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration, loss, step: step_left.min(step_right) });
        }
        losses.push(loss);
        if prev <= 0.0 || (prev - loss) / prev < cfg.tolerance {
            converged = true;
            break;
        }
    }

    Ok(NnmfFit { factors: FactorPair { left, right }, losses, converged })
}

/// Counterparts of one row sorted by descending score, ties by index.
fn score_order(scores: &Array1<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn reconcile_row(stated: &[usize], order: Vec<usize>, mode: Reconcile) -> Vec<usize> {
    match mode {
        Reconcile::AsIs => order,
        Reconcile::RelativeOrder => {
            let mut is_stated = vec![false; order.len()];
            for &s in stated {
                is_stated[s] = true;
            }
            let mut out = order;
            let mut next_stated = stated.iter();
            for slot in out.iter_mut() {
                if is_stated[*slot] {
                    *slot = *next_stated.next().expect("stated count matches stated slots");
                }
            }
            out
        }
        Reconcile::KeepStated => {
            let mut is_stated = vec![false; order.len()];
            for &s in stated {
                is_stated[s] = true;
            }
            let mut out = stated.to_vec();
            out.extend(order.into_iter().filter(|&c| !is_stated[c]));
            out
        }
    }
}

/// Total orders over all counterparts with stated items kept in their
/// original relative order.
pub fn densify(original: &PreferenceTable, factors: &FactorPair) -> Result<PreferenceTable> {
    densify_with(original, factors, Reconcile::RelativeOrder)
}

pub fn densify_with(original: &PreferenceTable, factors: &FactorPair, mode: Reconcile) -> Result<PreferenceTable> {
    let n = original.agent_count();
    let m = factors.right.ncols();
    if factors.left.nrows() != n || factors.left.ncols() != factors.right.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "factors {:?} x {:?} for a table with {n} rows",
            factors.left.dim(),
            factors.right.dim()
        )));
    }
    original.ensure_valid(m)?;
    let rows = (0..n).map(|i| reconcile_row(original.row(i), score_order(&factors.row_scores(i)), mode)).collect();
    Ok(PreferenceTable::new(original.side(), rows))
}

/// Everything an LMF-MMDAA run produces.
#[derive(Clone, Debug)]
pub struct LmfRun {
    pub matches: MultiMatching,
    pub dense_cand: PreferenceTable,
    pub dense_emp: PreferenceTable,
    pub cand_fit: NnmfFit,
    pub emp_fit: NnmfFit,
}

/// Densifies both sides independently and runs the multi-round matcher on the
/// dense tables. Matches stated in the agent's original row are tagged
/// [`Provenance::Stated`], the rest [`Provenance::Inferred`].
pub fn lmf_mmdaa(
    cand_prefs: &PreferenceTable,
    emp_prefs: &PreferenceTable,
    mcfg: MmdaaConfig,
    lcfg: &LmfConfig,
) -> Result<LmfRun> {
    lcfg.check()?;
    daa::check_tables(cand_prefs, emp_prefs)?;
    let n = cand_prefs.agent_count();
    let m = emp_prefs.agent_count();
    let rank = lcfg.rank.min(n.min(m)).max(1);

    let cand_cfg = LmfConfig { rank, ..*lcfg };
    let emp_cfg = LmfConfig { rank, seed: lcfg.seed.wrapping_add(1), ..*lcfg };

    let cand_fit = nnmf(&ranks_to_scores(cand_prefs, m)?, &cand_cfg)?;
    let emp_fit = nnmf(&ranks_to_scores(emp_prefs, n)?, &emp_cfg)?;
    let dense_cand = densify_with(cand_prefs, &cand_fit.factors, lcfg.reconcile)?;
    let dense_emp = densify_with(emp_prefs, &emp_fit.factors, lcfg.reconcile)?;

    let raw = normal_mmdaa(&dense_cand, &dense_emp, mcfg)?;
    let matches = MultiMatching {
        candidates: tag_provenance(&raw.candidates, cand_prefs, m)?,
        employers: tag_provenance(&raw.employers, emp_prefs, n)?,
    };
    Ok(LmfRun { matches, dense_cand, dense_emp, cand_fit, emp_fit })
}

fn tag_provenance(side: &SideMatches, original: &PreferenceTable, counterpart_count: usize) -> Result<SideMatches> {
    let ranks = original.rank_index(counterpart_count);
    let rows = side
        .rows()
        .iter()
        .enumerate()
        .map(|(agent, row)| {
            row.iter()
                .map(|&cell| match cell {
                    Cell::Matched { counterpart, .. } => Cell::Matched {
                        counterpart,
                        provenance: if ranks[agent][counterpart].is_some() {
                            Provenance::Stated
                        } else {
                            Provenance::Inferred
                        },
                    },
                    other => other,
                })
                .collect()
        })
        .collect();
    SideMatches::new(side.side(), rows)
}
