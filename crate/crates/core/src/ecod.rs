//! Phase 1: ECOD scoring of the training table and removal of its most
//! outlying rows before the phase-2 detectors are fitted.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::ecdf::{floor_fraction, upper_threshold, FittedDimension};
use crate::error::{Error, Result};

/// The three aggregate tail scores of one row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailScores {
    pub left: f64,
    pub right: f64,
    pub auto: f64,
}

/// Which aggregate produced the final score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregate {
    Left,
    Right,
    Auto,
}

/// Score of one row: the winning aggregate and its per-dimension terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub total: f64,
    pub per_dim: Vec<f64>,
    pub components: TailScores,
    pub winner: Aggregate,
}

impl ScoredSample {
    /// Picks the largest aggregate. Ties resolve auto, then left, then right.
    pub(crate) fn from_terms(left: &[f64], right: &[f64], auto: &[f64]) -> Self {
        let components = TailScores {
            left: left.iter().sum(),
            right: right.iter().sum(),
            auto: auto.iter().sum(),
        };
        let total = components.left.max(components.right).max(components.auto);
        let (winner, terms) = if total == components.auto {
            (Aggregate::Auto, auto)
        } else if total == components.left {
            (Aggregate::Left, left)
        } else {
            (Aggregate::Right, right)
        };
        ScoredSample {
            total,
            per_dim: terms.to_vec(),
            components,
            winner,
        }
    }
}

/// Fitted phase-1 model: one [`FittedDimension`] per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcodModel {
    dims: Vec<FittedDimension>,
}

impl EcodModel {
    pub fn fit(x: &DataMatrix) -> Result<Self> {
        if x.n_rows() < 2 {
            return Err(Error::input(format!(
                "need at least 2 training rows, got {}",
                x.n_rows()
            )));
        }
        if x.n_cols() == 0 {
            return Err(Error::input("training table has no columns"));
        }
        let dims = x
            .columns()
            .par_iter()
            .enumerate()
            .map(|(j, col)| {
                FittedDimension::fit(col)
                    .map_err(|e| Error::input(format!("column '{}': {e}", x.names()[j])))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EcodModel { dims })
    }

    /// Fits on `x` and scores its rows.
    pub fn fit_scored(x: &DataMatrix) -> Result<(Self, Vec<ScoredSample>)> {
        let model = Self::fit(x)?;
        let scores = score_training(&model.dims, x);
        Ok((model, scores))
    }

    pub fn dims(&self) -> &[FittedDimension] {
        &self.dims
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    /// Scores every row of `x`.
    pub fn score(&self, x: &DataMatrix) -> Result<Vec<ScoredSample>> {
        if x.n_cols() != self.d() {
            return Err(Error::schema(format!(
                "model has {} dimensions, input has {} columns",
                self.d(),
                x.n_cols()
            )));
        }
        Ok(score_rows(&self.dims, x))
    }
}

/// Rows per block when scoring. One block of tail counts stays in cache
/// while each sorted column is searched many times in a row.
const BLOCK: usize = 2048;

/// `-ln(max(c, 1) / n)` for every count `c` in `0..=n`, with `-0.0`
/// normalised to `0.0`.
fn neg_log_table(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|c| -(c.max(1) as f64 / n as f64).ln() + 0.0)
        .collect()
}

/// Scores every row of `x` against fitted dimensions of equal training size.
/// The caller has checked the width.
pub(crate) fn score_rows(dims: &[FittedDimension], x: &DataMatrix) -> Vec<ScoredSample> {
    let d = dims.len();
    let neg_log = neg_log_table(dims.first().map_or(1, FittedDimension::n));
    score_blocks(dims, &neg_log, x.n_rows(), |start, m, le, ge| {
        for (j, dim) in dims.iter().enumerate() {
            for (k, &z) in x.column(j)[start..start + m].iter().enumerate() {
                le[k * d + j] = dim.count_le(z);
                ge[k * d + j] = dim.count_ge(z);
            }
        }
    })
}

/// Same result as [`score_rows`] when `x` is the matrix `dims` were fitted
/// on, computed from one sort per column instead of a search per cell.
pub(crate) fn score_training(dims: &[FittedDimension], x: &DataMatrix) -> Vec<ScoredSample> {
    let d = dims.len();
    let n = x.n_rows();
    let counts: Vec<(Vec<u32>, Vec<u32>)> = x
        .columns()
        .par_iter()
        .map(|col| {
            let mut order: Vec<(f64, u32)> = col.iter().zip(0u32..).map(|(&v, i)| (v, i)).collect();
            order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut le = vec![0u32; n];
            let mut ge = vec![0u32; n];
            let mut lo = 0;
            while lo < n {
                let mut hi = lo + 1;
                while hi < n && order[hi].0 == order[lo].0 {
                    hi += 1;
                }
                for &(_, i) in &order[lo..hi] {
                    le[i as usize] = hi as u32;
                    ge[i as usize] = (n - lo) as u32;
                }
                lo = hi;
            }
            (le, ge)
        })
        .collect();
    let neg_log = neg_log_table(n);
    score_blocks(dims, &neg_log, n, |start, m, le, ge| {
        for (j, (cle, cge)) in counts.iter().enumerate() {
            for k in 0..m {
                le[k * d + j] = cle[start + k] as usize;
                ge[k * d + j] = cge[start + k] as usize;
            }
        }
    })
}

/// Runs `fill(start, len, le, ge)` for each block of rows to get row-major
/// tail counts, then turns the counts into scores.
fn score_blocks<F>(
    dims: &[FittedDimension],
    neg_log: &[f64],
    n_rows: usize,
    fill: F,
) -> Vec<ScoredSample>
where
    F: Fn(usize, usize, &mut [usize], &mut [usize]) + Sync,
{
    let d = dims.len();
    let starts: Vec<usize> = (0..n_rows).step_by(BLOCK).collect();
    starts
        .par_iter()
        .flat_map_iter(|&start| {
            let m = BLOCK.min(n_rows - start);
            let mut le = vec![0usize; m * d];
            let mut ge = vec![0usize; m * d];
            fill(start, m, &mut le, &mut ge);
            let mut left = vec![0.0; d];
            let mut right = vec![0.0; d];
            let mut auto = vec![0.0; d];
            (0..m)
                .map(|k| {
                    for (j, dim) in dims.iter().enumerate() {
                        left[j] = neg_log[le[k * d + j]];
                        right[j] = neg_log[ge[k * d + j]];
                        auto[j] = if dim.prefers_left() {
                            left[j]
                        } else {
                            right[j]
                        };
                    }
                    ScoredSample::from_terms(&left, &right, &auto)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn fit_ecod(x: &DataMatrix) -> Result<EcodModel> {
    EcodModel::fit(x)
}

pub fn score_ecod(model: &EcodModel, x: &DataMatrix) -> Result<Vec<ScoredSample>> {
    model.score(x)
}

/// Result of phase-1 noise filtering.
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    /// Kept rows, in their original order.
    pub clean: DataMatrix,
    /// Removed row indices, ascending.
    pub removed: Vec<usize>,
    /// Scores of every input row.
    pub scores: Vec<ScoredSample>,
    pub model: EcodModel,
    /// Score value at the removal cut: no kept row scores above it.
    pub threshold: f64,
}

pub fn check_contamination(contamination: f64) -> Result<()> {
    if (0.0..=0.5).contains(&contamination) {
        Ok(())
    } else {
        Err(Error::config(format!(
            "contamination {contamination} outside [0, 0.5]"
        )))
    }
}

/// Removes the `floor(contamination * n)` highest-scoring rows of `x`.
/// Among equal scores the lower row index goes first.
pub fn filter_noise(x: &DataMatrix, contamination: f64) -> Result<FilterOutcome> {
    check_contamination(contamination)?;
    let (model, scores) = EcodModel::fit_scored(x)?;
    let n = scores.len();
    let k = floor_fraction(contamination, n);

    let mut order: Vec<usize> = (0..n).collect();
    order
        .par_sort_unstable_by(|&a, &b| scores[b].total.total_cmp(&scores[a].total).then(a.cmp(&b)));
    let mut removed = order[..k].to_vec();
    removed.sort_unstable();

    let mut keep_mask = vec![true; n];
    for &i in &removed {
        keep_mask[i] = false;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| keep_mask[i]).collect();

    let totals: Vec<f64> = scores.iter().map(|s| s.total).collect();
    let threshold = upper_threshold(&totals, contamination)?;

    Ok(FilterOutcome {
        clean: x.select_rows(&kept),
        removed,
        scores,
        model,
        threshold,
    })
}
