//! Run configuration shared by training, scoring and the CLI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the two phase-2 detectors' labels merge into one per-row decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    /// Anomalous when either detector flags the row.
    #[default]
    Or,
    /// Anomalous only when both detectors flag the row.
    And,
}

impl std::str::FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(Combiner::Or),
            "and" => Ok(Combiner::And),
            other => Err(Error::config(format!("unknown combiner '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Fraction of training rows removed in phase 1, and the fraction of
    /// clean training rows each phase-2 detector may flag.
    pub contamination: f64,
    /// Columns with at most this many distinct values are discrete.
    pub discrete_cardinality_limit: usize,
    /// Columns forced to the discrete branch.
    pub discrete_columns: Vec<String>,
    /// Columns forced to the continuous branch.
    pub continuous_columns: Vec<String>,
    pub combiner: Combiner,
    /// Decision window length in samples.
    pub window: usize,
    /// Minimum anomalous fraction of the window that triggers an alarm.
    pub ratio: f64,
    /// Percentile levels for explanation bands.
    pub percentiles: Vec<f64>,
    /// Sampling rate of the input stream. Informational only.
    pub sample_rate_hz: f64,
    pub label_column: Option<String>,
    pub index_column: Option<String>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            contamination: 0.10,
            discrete_cardinality_limit: 10,
            discrete_columns: Vec::new(),
            continuous_columns: Vec::new(),
            combiner: Combiner::Or,
            window: 30,
            ratio: 0.8,
            percentiles: vec![90.0, 99.0],
            sample_rate_hz: 1.0,
            label_column: None,
            index_column: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.contamination) {
            return Err(Error::config(format!(
                "contamination {} outside [0, 0.5]",
                self.contamination
            )));
        }
        if self.discrete_cardinality_limit < 2 {
            return Err(Error::config(
                "discrete_cardinality_limit must be at least 2",
            ));
        }
        if self.window == 0 {
            return Err(Error::config("window must be at least 1 sample"));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::config(format!(
                "ratio {} outside (0, 1]",
                self.ratio
            )));
        }
        if self.percentiles.len() != 2
            || !self
                .percentiles
                .iter()
                .all(|p| p.is_finite() && *p > 0.0 && *p <= 100.0)
            || self.percentiles[0] > self.percentiles[1]
        {
            return Err(Error::config(
                "percentiles must be two ascending levels in (0, 100]",
            ));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::config("sample_rate_hz must be positive"));
        }
        if let Some(name) = self
            .discrete_columns
            .iter()
            .find(|c| self.continuous_columns.contains(c))
        {
            return Err(Error::config(format!(
                "column '{name}' forced both discrete and continuous"
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}
