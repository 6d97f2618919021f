//! Per-dimension empirical CDFs, sample skewness and nearest-rank quantiles.
//!
//! Everything else in the crate is built on [`FittedDimension`]: a sorted copy
//! of one training column that answers left-tail (`P(X <= z)`) and right-tail
//! (`P(X >= z)`) queries with two binary searches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One training column, sorted, plus its sample skewness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedDimension {
    #[serde(with = "crate::model_file::f64_vec")]
    sorted_values: Vec<f64>,
    skewness: f64,
}

impl FittedDimension {
    /// Sorts a copy of `column` and computes its skewness.
    pub fn fit(column: &[f64]) -> Result<Self> {
        if column.is_empty() {
            return Err(Error::input("cannot fit an empty column"));
        }
        if let Some(row) = column.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite value at row {row}")));
        }
        let mut sorted_values = column.to_vec();
        sorted_values.sort_unstable_by(f64::total_cmp);
        let skewness = skewness(column);
        Ok(FittedDimension {
            sorted_values,
            skewness,
        })
    }

    pub fn n(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn skewness(&self) -> f64 {
        self.skewness
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    /// Left-tail ECDF `#{x <= z} / n`, clamped below at `1/n`.
    pub fn eval_left(&self, z: f64) -> Result<f64> {
        check_finite(z)?;
        Ok(self.left(z))
    }

    /// Right-tail ECDF `#{x >= z} / n`, clamped below at `1/n`.
    pub fn eval_right(&self, z: f64) -> Result<f64> {
        check_finite(z)?;
        Ok(self.right(z))
    }

    /// Unchecked left tail; `z` must be finite.
    #[inline]
    pub(crate) fn left(&self, z: f64) -> f64 {
        self.clamped(self.count_le(z))
    }

    /// Unchecked right tail; `z` must be finite.
    #[inline]
    pub(crate) fn right(&self, z: f64) -> f64 {
        self.clamped(self.count_ge(z))
    }

    /// Training values at or below `z`.
    #[inline]
    pub(crate) fn count_le(&self, z: f64) -> usize {
        self.sorted_values.partition_point(|&v| v <= z)
    }

    /// Training values at or above `z`.
    #[inline]
    pub(crate) fn count_ge(&self, z: f64) -> usize {
        self.n() - self.sorted_values.partition_point(|&v| v < z)
    }

    /// True when the skewness-corrected tail for this dimension is the left one.
    #[inline]
    pub fn prefers_left(&self) -> bool {
        self.skewness < 0.0
    }

    #[inline]
    fn clamped(&self, count: usize) -> f64 {
        count.max(1) as f64 / self.n() as f64
    }

    /// Checks the invariants a deserialized value may have lost.
    pub(crate) fn validate(&self) -> Result<()> {
        if self.sorted_values.is_empty() {
            return Err(Error::input("fitted dimension has no training values"));
        }
        if !self.skewness.is_finite() || self.sorted_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("fitted dimension holds non-finite values"));
        }
        if self.sorted_values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::input("fitted dimension values are not sorted"));
        }
        Ok(())
    }
}

/// Convenience wrapper over [`FittedDimension::fit`].
pub fn fit_dimension(column: &[f64]) -> Result<FittedDimension> {
    FittedDimension::fit(column)
}

fn check_finite(z: f64) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!("query value {z} is not finite")))
    }
}

/// Sample skewness `Σ(x - mean)^3 / ((n - 1) σ^3)` with `σ` the (n − 1)
/// standard deviation. Zero for constant columns and for `n < 2`.
pub fn skewness(column: &[f64]) -> f64 {
    let n = column.len();
    if n < 2 {
        return 0.0;
    }
    let (lo, hi) = column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        return 0.0;
    }
    let mean = column.iter().sum::<f64>() / n as f64;
    let (m2, m3) = column.iter().fold((0.0, 0.0), |(m2, m3), &v| {
        let d = v - mean;
        let d2 = d * d;
        (m2 + d2, m3 + d2 * d)
    });
    let dof = (n - 1) as f64;
    let sigma = (m2 / dof).sqrt();
    if sigma == 0.0 {
        return 0.0;
    }
    let s = m3 / (dof * sigma * sigma * sigma);
    if s.is_finite() {
        s
    } else {
        0.0
    }
}

/// Number of items a fraction `q` of `n` covers, rounded down.
///
/// A relative tolerance absorbs decimal fractions such as `0.29` whose binary
/// product with `n` lands a hair below an integer.
pub(crate) fn floor_fraction(q: f64, n: usize) -> usize {
    let x = q * n as f64;
    let k = (x + x.abs() * 1e-12).floor();
    (k.max(0.0) as usize).min(n)
}

/// Nearest-rank quantile of an ascending slice: the smallest value whose rank
/// `r` satisfies `r >= q * n`. `q = 0` returns the minimum.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::input("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::input(format!("quantile level {q} outside [0, 1]")));
    }
    let n = sorted.len();
    let x = q * n as f64;
    let rank = (x - x.abs() * 1e-12).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

/// The value above which at most `floor(contamination * n)` of `scores` lie.
pub(crate) fn upper_threshold(scores: &[f64], contamination: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::input("threshold of an empty score set"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let k = floor_fraction(contamination, sorted.len());
    Ok(sorted[sorted.len() - 1 - k.min(sorted.len() - 1)])
}
