//! Synthetic ICS-like streams with planted attack runs.
//!
//! Sensors (continuous columns) are drawn i.i.d. from per-column stationary
//! distributions, some of them skewed in either direction. Actuators
//! (discrete columns) take a handful of states with fixed probabilities.
//! An attack run shifts a few sensors by a multiple of their standard
//! deviation and drives a few actuators into a state never seen in normal
//! operation.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    /// Fraction of rows inside attack runs.
    pub rate: f64,
    pub min_run: usize,
    pub max_run: usize,
    /// Sensor shift in units of that sensor's standard deviation.
    pub shift_sigma: f64,
    /// Sensors shifted per run.
    pub shifted_continuous: usize,
    /// Actuators forced to an unseen state per run.
    pub shifted_discrete: usize,
}

impl Default for AnomalySpec {
    fn default() -> Self {
        AnomalySpec {
            rate: 0.05,
            min_run: 60,
            max_run: 600,
            shift_sigma: 8.0,
            shifted_continuous: 3,
            shifted_discrete: 1,
        }
    }
}

impl AnomalySpec {
    pub fn none() -> Self {
        AnomalySpec {
            rate: 0.0,
            ..AnomalySpec::default()
        }
    }
}

enum Sensor {
    Gaussian(Normal<f64>),
    /// `offset + sign * Gamma(shape, scale)`
    Skewed {
        gamma: Gamma<f64>,
        offset: f64,
        sign: f64,
    },
}

impl Sensor {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sensor::Gaussian(n) => n.sample(rng),
            Sensor::Skewed {
                gamma,
                offset,
                sign,
            } => offset + sign * gamma.sample(rng),
        }
    }
}

/// The stationary distributions of one simulated plant.
pub struct SyntheticProcess {
    sensors: Vec<Sensor>,
    sigmas: Vec<f64>,
    /// Cumulative state probabilities per actuator.
    actuators: Vec<Vec<f64>>,
}

impl SyntheticProcess {
    /// Draws `d_continuous` sensor and `d_discrete` actuator distributions.
    pub fn new(d_discrete: usize, d_continuous: usize, seed: u64) -> Result<Self> {
        if d_discrete + d_continuous == 0 {
            return Err(Error::config("need at least one column"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sensors = Vec::with_capacity(d_continuous);
        let mut sigmas = Vec::with_capacity(d_continuous);
        for j in 0..d_continuous {
            let center = rng.random_range(0.0..1000.0);
            let spread = rng.random_range(0.5..20.0);
            if j % 2 == 0 {
                sensors.push(Sensor::Gaussian(
                    Normal::new(center, spread).expect("valid normal"),
                ));
            } else {
                let shape: f64 = 4.0;
                let scale = spread / shape.sqrt();
                sensors.push(Sensor::Skewed {
                    gamma: Gamma::new(shape, scale).expect("valid gamma"),
                    offset: center,
                    sign: if j % 4 == 3 { -1.0 } else { 1.0 },
                });
            }
            sigmas.push(spread);
        }

        let mut actuators: Vec<Vec<f64>> = Vec::with_capacity(d_discrete);
        for _ in 0..d_discrete {
            let states = rng.random_range(2..=4usize);
            let weights: Vec<f64> = (0..states).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut acc = 0.0;
            actuators.push(
                weights
                    .iter()
                    .map(|w| {
                        acc += w / total;
                        acc
                    })
                    .collect(),
            );
        }
        Ok(SyntheticProcess {
            sensors,
            sigmas,
            actuators,
        })
    }

    pub fn d_continuous(&self) -> usize {
        self.sensors.len()
    }

    pub fn d_discrete(&self) -> usize {
        self.actuators.len()
    }

    /// Samples an `n`-row stream (sensors `S*` first, then actuators `A*`)
    /// with attack runs planted per `spec`, and its ground truth.
    pub fn sample(
        &self,
        n: usize,
        spec: &AnomalySpec,
        seed: u64,
    ) -> Result<(DataMatrix, Vec<Label>)> {
        if n == 0 {
            return Err(Error::config("need at least one row"));
        }
        if !(0.0..1.0).contains(&spec.rate) {
            return Err(Error::config(format!(
                "anomaly rate {} outside [0, 1)",
                spec.rate
            )));
        }
        if spec.min_run == 0 || spec.max_run < spec.min_run {
            return Err(Error::config(
                "run lengths must satisfy 1 <= min_run <= max_run",
            ));
        }
        if !(spec.shift_sigma.is_finite() && spec.shift_sigma >= 0.0) {
            return Err(Error::config("shift_sigma must be finite and non-negative"));
        }
        let d_continuous = self.d_continuous();
        let d_discrete = self.d_discrete();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); d_continuous + d_discrete];
        for _ in 0..n {
            for (j, s) in self.sensors.iter().enumerate() {
                columns[j].push(s.sample(&mut rng));
            }
            for (k, cdf) in self.actuators.iter().enumerate() {
                let u: f64 = rng.random();
                let state = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
                columns[d_continuous + k].push(state as f64);
            }
        }

        let mut labels = vec![Label::Normal; n];
        for (start, len) in plan_runs(n, spec, &mut rng) {
            let cont = sample(
                &mut rng,
                d_continuous,
                spec.shifted_continuous.min(d_continuous),
            );
            let disc = sample(&mut rng, d_discrete, spec.shifted_discrete.min(d_discrete));
            for i in start..start + len {
                labels[i] = Label::Anomaly;
                for j in cont.iter() {
                    columns[j][i] += spec.shift_sigma * self.sigmas[j];
                }
                for k in disc.iter() {
                    columns[d_continuous + k][i] = self.actuators[k].len() as f64;
                }
            }
        }

        let names = (0..d_continuous)
            .map(|j| format!("S{j}"))
            .chain((0..d_discrete).map(|k| format!("A{k}")))
            .collect();
        let m = DataMatrix::from_columns(names, columns)?.with_labels(labels.clone())?;
        Ok((m, labels))
    }
}

/// One-shot generator: a fresh process and one stream, both from `seed`.
pub fn generate_synthetic(
    n: usize,
    d_discrete: usize,
    d_continuous: usize,
    spec: &AnomalySpec,
    seed: u64,
) -> Result<(DataMatrix, Vec<Label>)> {
    SyntheticProcess::new(d_discrete, d_continuous, seed)?.sample(n, spec, seed)
}

/// Non-overlapping `(start, len)` runs covering about `rate * n` rows,
/// separated by at least one normal row.
fn plan_runs(n: usize, spec: &AnomalySpec, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let target = (spec.rate * n as f64).round() as usize;
    let mut lens = Vec::new();
    let mut planned = 0;
    while planned < target {
        let len = rng
            .random_range(spec.min_run..=spec.max_run)
            .min(target - planned);
        lens.push(len);
        planned += len;
    }
    // a short tail run joins its predecessor
    if lens.len() > 1 && *lens.last().unwrap() < spec.min_run {
        let tail = lens.pop().unwrap();
        *lens.last_mut().unwrap() += tail;
    }
    let normal = n - planned;
    if lens.is_empty() || normal < lens.len() + 1 {
        return if lens.is_empty() {
            vec![]
        } else {
            vec![(0, planned.min(n))]
        };
    }
    // gaps before, between and after runs; interior gaps get at least one row
    let free = normal - (lens.len() - 1);
    let mut cuts: Vec<usize> = (0..lens.len())
        .map(|_| rng.random_range(0..=free))
        .collect();
    cuts.sort_unstable();
    let mut runs = Vec::with_capacity(lens.len());
    let mut pos = 0;
    let mut prev_cut = 0;
    for (r, (&cut, &len)) in cuts.iter().zip(&lens).enumerate() {
        pos += cut - prev_cut + usize::from(r > 0);
        prev_cut = cut;
        runs.push((pos, len));
        pos += len;
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_deterministic() {
        let spec = AnomalySpec::default();
        let a = generate_synthetic(2000, 3, 4, &spec, 7).unwrap();
        let b = generate_synthetic(2000, 3, 4, &spec, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(2000, 3, 4, &spec, 8).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn zero_rate_is_all_normal() {
        let (m, labels) = generate_synthetic(500, 2, 2, &AnomalySpec::none(), 1).unwrap();
        assert!(labels.iter().all(|&l| l == Label::Normal));
        assert_eq!(m.labels().unwrap(), labels.as_slice());
        assert_eq!(m.names(), &["S0", "S1", "A0", "A1"]);
    }

    #[test]
    fn planted_run_is_labelled_and_shifted() {
        let spec = AnomalySpec {
            rate: 60.0 / 1000.0,
            min_run: 60,
            max_run: 60,
            shift_sigma: 8.0,
            shifted_continuous: 1,
            shifted_discrete: 0,
        };
        let (m, labels) = generate_synthetic(1000, 0, 1, &spec, 3).unwrap();
        let flagged: Vec<usize> = (0..1000).filter(|&i| labels[i].is_anomaly()).collect();
        assert_eq!(flagged.len(), 60);
        assert!(flagged.windows(2).all(|w| w[1] == w[0] + 1));

        let col = m.column(0);
        let normal: Vec<f64> = (0..1000)
            .filter(|i| !flagged.contains(i))
            .map(|i| col[i])
            .collect();
        let mean = normal.iter().sum::<f64>() / normal.len() as f64;
        let sd =
            (normal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / normal.len() as f64).sqrt();
        let run_mean = flagged.iter().map(|&i| col[i]).sum::<f64>() / 60.0;
        assert!((run_mean - mean) / sd > 6.0);
    }

    #[test]
    fn runs_respect_rate_and_spacing() {
        let spec = AnomalySpec {
            rate: 0.05,
            min_run: 60,
            max_run: 200,
            ..AnomalySpec::default()
        };
        let (_, labels) = generate_synthetic(20_000, 2, 3, &spec, 11).unwrap();
        let count = labels.iter().filter(|l| l.is_anomaly()).count();
        assert_eq!(count, 1000);
        let mut run = 0;
        let mut runs = vec![];
        for l in &labels {
            if l.is_anomaly() {
                run += 1;
            } else if run > 0 {
                runs.push(run);
                run = 0;
            }
        }
        if run > 0 {
            runs.push(run);
        }
        assert!(runs.iter().all(|&r| r >= 60), "{runs:?}");
    }

    #[test]
    fn streams_of_one_process_share_distributions() {
        let p = SyntheticProcess::new(1, 1, 5).unwrap();
        let (a, _) = p.sample(5000, &AnomalySpec::none(), 1).unwrap();
        let (b, _) = p.sample(5000, &AnomalySpec::none(), 2).unwrap();
        assert_ne!(a, b);
        let mean = |m: &DataMatrix| m.column(0).iter().sum::<f64>() / 5000.0;
        assert!((mean(&a) - mean(&b)).abs() < 1.0);
    }

    #[test]
    fn range_checks() {
        assert!(generate_synthetic(0, 1, 1, &AnomalySpec::none(), 0).is_err());
        assert!(generate_synthetic(10, 0, 0, &AnomalySpec::none(), 0).is_err());
        let bad = AnomalySpec {
            rate: 1.5,
            ..AnomalySpec::default()
        };
        assert!(generate_synthetic(10, 1, 1, &bad, 0).is_err());
    }
}
