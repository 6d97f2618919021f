//! Feature-level explanations: each dimensional score is placed against the
//! 90th and 99th percentile of that dimension's training scores.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::ecdf::nearest_rank;
use crate::ecod::ScoredSample;
use crate::error::{Error, Result};

impl AsRef<[f64]> for ScoredSample {
    fn as_ref(&self) -> &[f64] {
        &self.per_dim
    }
}

/// Per-dimension score bands learned from training scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileBands {
    /// Percentile levels of the two bands, e.g. `[90, 99]`.
    pub levels: [f64; 2],
    pub band90: Vec<f64>,
    pub band99: Vec<f64>,
}

impl PercentileBands {
    pub fn d(&self) -> usize {
        self.band90.len()
    }
}

/// Nearest-rank percentile bands over an n×d matrix of dimensional scores.
pub fn fit_bands<R: AsRef<[f64]>>(rows: &[R], percentiles: &[f64]) -> Result<PercentileBands> {
    let [lo, hi] = match percentiles {
        [lo, hi] if lo <= hi => [*lo, *hi],
        _ => return Err(Error::config("bands need two ascending percentile levels")),
    };
    let Some(first) = rows.first() else {
        return Err(Error::input("no training scores to fit bands on"));
    };
    let d = first.as_ref().len();
    if rows.iter().any(|r| r.as_ref().len() != d) {
        return Err(Error::input("score rows have differing widths"));
    }
    let mut band90 = Vec::with_capacity(d);
    let mut band99 = Vec::with_capacity(d);
    let mut col = vec![0.0; rows.len()];
    for j in 0..d {
        for (c, r) in col.iter_mut().zip(rows) {
            *c = r.as_ref()[j];
        }
        col.sort_unstable_by(f64::total_cmp);
        band90.push(nearest_rank(&col, lo / 100.0)?);
        band99.push(nearest_rank(&col, hi / 100.0)?);
    }
    Ok(PercentileBands {
        levels: [lo, hi],
        band90,
        band99,
    })
}

/// Where a dimensional score falls relative to its bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandFlag {
    Below90,
    Between90And99,
    Above99,
}

impl BandFlag {
    pub fn classify(score: f64, band90: f64, band99: f64) -> Self {
        if score >= band99 {
            BandFlag::Above99
        } else if score >= band90 {
            BandFlag::Between90And99
        } else {
            BandFlag::Below90
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BandFlag::Below90 => "below90",
            BandFlag::Between90And99 => "90to99",
            BandFlag::Above99 => "above99",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub sample: usize,
    pub total: f64,
    pub verdict: Label,
    pub scores: Vec<f64>,
    pub flags: Vec<BandFlag>,
    /// Dimensions at or above their upper band, highest score first.
    pub above99: Vec<usize>,
}

impl Explanation {
    pub fn narrative(&self, names: &[String]) -> String {
        if self.above99.is_empty() {
            let elevated = self
                .flags
                .iter()
                .filter(|f| **f == BandFlag::Between90And99)
                .count();
            return if elevated == 0 {
                "normal".to_string()
            } else {
                format!("{elevated} dimension(s) above the lower band, none above the upper band")
            };
        }
        let dims: Vec<&str> = self
            .above99
            .iter()
            .map(|&j| names.get(j).map_or("?", String::as_str))
            .collect();
        format!("upper band exceeded by {}", dims.join(", "))
    }
}

/// Flags each dimension of one scored sample. `threshold` is the owning
/// model's score cutoff and decides the verdict.
pub fn explain_sample(
    sample: usize,
    scored: &ScoredSample,
    bands: &PercentileBands,
    threshold: f64,
) -> Result<Explanation> {
    if scored.per_dim.len() != bands.d() {
        return Err(Error::schema(format!(
            "sample has {} dimensions, bands have {}",
            scored.per_dim.len(),
            bands.d()
        )));
    }
    let flags: Vec<BandFlag> = scored
        .per_dim
        .iter()
        .zip(bands.band90.iter().zip(&bands.band99))
        .map(|(&s, (&b90, &b99))| BandFlag::classify(s, b90, b99))
        .collect();
    let mut above99: Vec<usize> = (0..flags.len())
        .filter(|&j| flags[j] == BandFlag::Above99)
        .collect();
    above99.sort_by(|&a, &b| {
        scored.per_dim[b]
            .total_cmp(&scored.per_dim[a])
            .then(a.cmp(&b))
    });
    Ok(Explanation {
        sample,
        total: scored.total,
        verdict: if scored.total > threshold {
            Label::Anomaly
        } else {
            Label::Normal
        },
        scores: scored.per_dim.clone(),
        flags,
        above99,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecod::{Aggregate, TailScores};
    use proptest::prelude::*;

    fn sample(per_dim: Vec<f64>) -> ScoredSample {
        let total = per_dim.iter().sum();
        ScoredSample {
            total,
            per_dim,
            components: TailScores {
                left: total,
                right: 0.0,
                auto: 0.0,
            },
            winner: Aggregate::Left,
        }
    }

    #[test]
    fn band_examples() {
        let constant = vec![vec![2.5, 0.0]; 17];
        let b = fit_bands(&constant, &[90.0, 99.0]).unwrap();
        assert_eq!(b.band90, vec![2.5, 0.0]);
        assert_eq!(b.band99, vec![2.5, 0.0]);

        let ramp: Vec<Vec<f64>> = (1..=100).rev().map(|v| vec![v as f64]).collect();
        let b = fit_bands(&ramp, &[90.0, 99.0]).unwrap();
        assert_eq!(b.band90, vec![90.0]);
        assert_eq!(b.band99, vec![99.0]);

        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(
            fit_bands(&empty, &[90.0, 99.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    fn bands() -> PercentileBands {
        PercentileBands {
            levels: [90.0, 99.0],
            band90: vec![1.0, 1.0, 1.0],
            band99: vec![2.0, 2.0, 2.0],
        }
    }

    #[test]
    fn all_low_is_normal() {
        let e = explain_sample(0, &sample(vec![0.1, 0.2, 0.3]), &bands(), 10.0).unwrap();
        assert!(e.above99.is_empty());
        assert_eq!(e.narrative(&[]), "normal");
        assert_eq!(e.verdict, Label::Normal);
    }

    #[test]
    fn upper_dims_sorted_by_score() {
        let e = explain_sample(4, &sample(vec![2.5, 0.5, 7.0]), &bands(), 5.0).unwrap();
        assert_eq!(e.above99, vec![2, 0]);
        assert_eq!(e.flags[1], BandFlag::Below90);
        assert_eq!(e.verdict, Label::Anomaly);
        let names = vec!["a".to_string(), "b".into(), "c".into()];
        assert_eq!(e.narrative(&names), "upper band exceeded by c, a");
    }

    #[test]
    fn boundary_counts_as_above() {
        let e = explain_sample(0, &sample(vec![2.0, 1.0, 0.0]), &bands(), 5.0).unwrap();
        assert_eq!(
            e.flags,
            vec![
                BandFlag::Above99,
                BandFlag::Between90And99,
                BandFlag::Below90
            ]
        );
        assert_eq!(e.above99, vec![0]);
    }

    #[test]
    fn width_mismatch() {
        assert!(matches!(
            explain_sample(0, &sample(vec![1.0]), &bands(), 1.0),
            Err(Error::SchemaMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn bands_are_ordered(rows in prop::collection::vec(prop::collection::vec(0f64..20.0, 3), 1..80)) {
            let b = fit_bands(&rows, &[90.0, 99.0]).unwrap();
            for j in 0..3 {
                prop_assert!(b.band99[j] >= b.band90[j]);
                prop_assert!(b.band90[j] >= 0.0);
            }
        }

        #[test]
        fn raising_a_score_never_demotes(s in prop::collection::vec(0f64..4.0, 3), j in 0usize..3, bump in 0f64..3.0) {
            let before = explain_sample(0, &sample(s.clone()), &bands(), 1.0).unwrap();
            let mut raised = s.clone();
            raised[j] += bump;
            let after = explain_sample(0, &sample(raised), &bands(), 1.0).unwrap();
            let rank = |f: BandFlag| f as u8;
            prop_assert!(rank(after.flags[j]) >= rank(before.flags[j]));
        }

        #[test]
        fn all_below_lower_band_bounds_total(s in prop::collection::vec(0f64..0.999, 3)) {
            let e = explain_sample(0, &sample(s), &bands(), 1.0).unwrap();
            prop_assert!(e.flags.iter().all(|f| *f == BandFlag::Below90));
            prop_assert!(e.total <= bands().band90.iter().sum::<f64>());
        }
    }
}
