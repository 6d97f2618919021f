//! Phase-2 detector: empirical-copula outlier scores with skewness-corrected
//! tail selection and a score threshold learned from the training scores.
//!
//! For a row `x`, the left copula observation of dimension `j` is the
//! left-tail ECDF `U_left = F_j(x_j)`, the right one is the ECDF of `-X`
//! evaluated at `-x_j` (the right tail), and the corrected observation `W`
//! picks the left one when the dimension is negatively skewed. The joint
//! empirical copula is used only through its marginals: the score is the
//! largest of the three sums of negative log observations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Label};
use crate::ecdf::{upper_threshold, FittedDimension};
use crate::ecod::{check_contamination, score_rows, score_training, ScoredSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopodModel {
    dims: Vec<FittedDimension>,
    threshold: f64,
    contamination: f64,
}

/// Copula observations of one row.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaObservations {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub corrected: Vec<f64>,
}

impl CopodModel {
    pub fn fit(x: &DataMatrix, contamination: f64) -> Result<Self> {
        Ok(Self::fit_scored(x, contamination)?.0)
    }

    /// Fits on `x` and also returns the scores of its rows.
    pub fn fit_scored(x: &DataMatrix, contamination: f64) -> Result<(Self, Vec<ScoredSample>)> {
        check_contamination(contamination)?;
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
        let mut model = CopodModel {
            dims,
            threshold: 0.0,
            contamination,
        };
        let scores = score_training(&model.dims, x);
        let totals: Vec<f64> = scores.iter().map(|s| s.total).collect();
        model.threshold = upper_threshold(&totals, contamination)?;
        Ok((model, scores))
    }

    pub fn dims(&self) -> &[FittedDimension] {
        &self.dims
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn contamination(&self) -> f64 {
        self.contamination
    }

    fn check_width(&self, x: &DataMatrix) -> Result<()> {
        if x.n_cols() == self.d() {
            Ok(())
        } else {
            Err(Error::schema(format!(
                "model has {} dimensions, input has {} columns",
                self.d(),
                x.n_cols()
            )))
        }
    }

    /// Left, right and skewness-corrected copula observations of row `i`.
    pub fn observations(&self, x: &DataMatrix, i: usize) -> Result<CopulaObservations> {
        self.check_width(x)?;
        let d = self.d();
        let mut obs = CopulaObservations {
            left: vec![0.0; d],
            right: vec![0.0; d],
            corrected: vec![0.0; d],
        };
        self.fill_observations(x, i, &mut obs);
        Ok(obs)
    }

    fn fill_observations(&self, x: &DataMatrix, i: usize, obs: &mut CopulaObservations) {
        for (j, dim) in self.dims.iter().enumerate() {
            let z = x.value(i, j);
            let u_left = dim.left(z);
            let u_right = dim.right(z);
            obs.left[j] = u_left;
            obs.right[j] = u_right;
            obs.corrected[j] = if dim.prefers_left() { u_left } else { u_right };
        }
    }

    pub fn score(&self, x: &DataMatrix) -> Result<Vec<ScoredSample>> {
        self.check_width(x)?;
        Ok(score_rows(&self.dims, x))
    }

    /// `-1` for rows scoring strictly above the threshold, `+1` otherwise.
    pub fn predict(&self, x: &DataMatrix) -> Result<Vec<Label>> {
        Ok(self
            .score(x)?
            .iter()
            .map(|s| self.label_for(s.total))
            .collect())
    }

    pub fn label_for(&self, score: f64) -> Label {
        if score > self.threshold {
            Label::Anomaly
        } else {
            Label::Normal
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::input("model has no dimensions"));
        }
        let n = self.dims[0].n();
        for dim in &self.dims {
            dim.validate()?;
            if dim.n() != n {
                return Err(Error::input("dimensions disagree on training size"));
            }
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::input("threshold must be finite and non-negative"));
        }
        check_contamination(self.contamination)
    }
}

pub fn fit_copod(x: &DataMatrix, contamination: f64) -> Result<CopodModel> {
    CopodModel::fit(x, contamination)
}

pub fn score_copod(model: &CopodModel, x: &DataMatrix) -> Result<Vec<ScoredSample>> {
    model.score(x)
}

pub fn predict_labels(model: &CopodModel, x: &DataMatrix) -> Result<Vec<Label>> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecod::fit_ecod;
    use proptest::prelude::*;

    fn one_to_five() -> DataMatrix {
        DataMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]]).unwrap()
    }

    fn single(v: f64) -> DataMatrix {
        DataMatrix::from_rows(&[vec![v]]).unwrap()
    }

    #[test]
    fn threshold_examples() {
        // training scores: ln5, -ln0.4, -ln0.6, -ln0.4, ln5
        let m = fit_copod(&one_to_five(), 0.2).unwrap();
        assert!((m.threshold() - (5.0f64).ln()).abs() < 1e-12);

        let c = DataMatrix::from_rows(&[vec![2.0], vec![2.0], vec![2.0]]).unwrap();
        assert_eq!(fit_copod(&c, 0.1).unwrap().threshold(), 0.0);

        // median of the sorted training scores [-ln.6, -ln.4, -ln.4, ln5, ln5]
        let m = fit_copod(&one_to_five(), 0.5).unwrap();
        assert!((m.threshold() + (0.4f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_contamination() {
        assert!(matches!(
            fit_copod(&one_to_five(), 0.75),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn score_examples() {
        let m = fit_copod(&one_to_five(), 0.1).unwrap();
        let s = m.score(&single(3.0)).unwrap();
        assert!((s[0].total - 0.5108).abs() < 1e-4);

        let s = m.score(&single(-7.0)).unwrap();
        assert_eq!(s[0].components.right, 0.0);
        assert!((s[0].components.left - (5.0f64).ln()).abs() < 1e-12);
        assert!((s[0].total - 1.6094).abs() < 1e-4);

        let c = DataMatrix::from_rows(&[vec![2.0], vec![2.0], vec![2.0]]).unwrap();
        let m = fit_copod(&c, 0.1).unwrap();
        assert_eq!(m.score(&single(2.0)).unwrap()[0].total, 0.0);
    }

    #[test]
    fn observations_follow_skewness() {
        // negatively skewed column: corrected observation is the left tail
        let x = DataMatrix::from_rows(&[vec![0.0], vec![9.0], vec![10.0], vec![10.0]]).unwrap();
        let m = fit_copod(&x, 0.1).unwrap();
        assert!(m.dims()[0].skewness() < 0.0);
        let obs = m.observations(&x, 0).unwrap();
        assert_eq!(obs.left, vec![0.25]);
        assert_eq!(obs.right, vec![1.0]);
        assert_eq!(obs.corrected, obs.left);
    }

    #[test]
    fn label_examples() {
        let m = fit_copod(&one_to_five(), 0.2).unwrap();
        assert_eq!(m.label_for(m.threshold()), Label::Normal);
        assert_eq!(m.label_for(m.threshold() + 1e-9), Label::Anomaly);

        let m = fit_copod(&one_to_five(), 0.5).unwrap();
        assert_eq!(m.predict(&single(1e6)).unwrap(), vec![Label::Anomaly]);

        let m = fit_copod(&one_to_five(), 0.0).unwrap();
        assert!(m
            .predict(&one_to_five())
            .unwrap()
            .iter()
            .all(|&l| l == Label::Normal));
    }

    #[test]
    fn schema_mismatch() {
        let m = fit_copod(&one_to_five(), 0.1).unwrap();
        let wide = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(m.score(&wide), Err(Error::SchemaMismatch(_))));
        assert!(matches!(m.predict(&wide), Err(Error::SchemaMismatch(_))));
    }

    fn matrix(d: usize) -> impl Strategy<Value = DataMatrix> {
        prop::collection::vec(prop::collection::vec(-100f64..100.0, d), 2..60)
            .prop_map(|rows| DataMatrix::from_rows(&rows).unwrap())
    }

    proptest! {
        #[test]
        fn left_right_aggregates_match_ecod(x in (1usize..5).prop_flat_map(matrix)) {
            let e = fit_ecod(&x).unwrap().score(&x).unwrap();
            let c = fit_copod(&x, 0.1).unwrap().score(&x).unwrap();
            for (a, b) in e.iter().zip(&c) {
                prop_assert!((a.components.left - b.components.left).abs() <= 1e-12);
                prop_assert!((a.components.right - b.components.right).abs() <= 1e-12);
            }
        }

        #[test]
        fn flagged_fraction_bounded(x in (1usize..4).prop_flat_map(matrix), c in 0.0f64..0.5) {
            let m = fit_copod(&x, c).unwrap();
            let flagged = m.predict(&x).unwrap().iter().filter(|l| l.is_anomaly()).count();
            let n = x.n_rows() as f64;
            prop_assert!(flagged as f64 / n <= c + 1.0 / n);
        }

        #[test]
        fn pushing_past_max_never_lowers_score(x in (1usize..4).prop_flat_map(matrix), extra in 0.0f64..1e3) {
            let m = fit_copod(&x, 0.1).unwrap();
            let maxes: Vec<f64> = (0..x.n_cols()).map(|j| x.column(j).iter().cloned().fold(f64::MIN, f64::max)).collect();
            let mut row: Vec<f64> = maxes.iter().map(|v| v + 1.0).collect();
            let before = m.score(&DataMatrix::from_rows(&[row.clone()]).unwrap()).unwrap()[0].total;
            row[0] += extra;
            let after = m.score(&DataMatrix::from_rows(&[row]).unwrap()).unwrap()[0].total;
            prop_assert!(after >= before);
        }
    }
}
