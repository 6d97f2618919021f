//! The two-phase dual detector: phase-1 noise filtering, the discrete /
//! continuous split, min-max normalization of the continuous slice, one
//! COPOD model per slice, label combination and the decision window.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::config::{Combiner, RunConfig};
use crate::copod::CopodModel;
use crate::data::{DataMatrix, Label};
use crate::ecod::{filter_noise, ScoredSample};
use crate::error::{Error, Result};
use crate::explain::{fit_bands, PercentileBands};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
    pub discrete_cardinality_limit: usize,
    pub overrides: BTreeMap<String, FeatureKind>,
}

impl FeatureSchema {
    pub fn names_of(&self, kind: FeatureKind) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.name.clone())
            .collect()
    }
}

/// Splits columns by distinct-value count: at most `limit` distinct values
/// makes a column discrete. Overrides win.
pub fn infer_schema(
    x: &DataMatrix,
    limit: usize,
    overrides: &BTreeMap<String, FeatureKind>,
) -> Result<FeatureSchema> {
    if limit < 2 {
        return Err(Error::config(
            "discrete cardinality limit must be at least 2",
        ));
    }
    if x.n_rows() == 0 {
        return Err(Error::input("cannot infer a schema from an empty table"));
    }
    if let Some(name) = overrides.keys().find(|k| x.column_position(k).is_none()) {
        return Err(Error::config(format!(
            "override names unknown column '{name}'"
        )));
    }
    let columns = x
        .names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let kind = overrides.get(name).copied().unwrap_or_else(|| {
                if distinct_at_most(x.column(j), limit) {
                    FeatureKind::Discrete
                } else {
                    FeatureKind::Continuous
                }
            });
            ColumnSpec {
                name: name.clone(),
                kind,
            }
        })
        .collect();
    Ok(FeatureSchema {
        columns,
        discrete_cardinality_limit: limit,
        overrides: overrides.clone(),
    })
}

fn distinct_at_most(col: &[f64], limit: usize) -> bool {
    let mut seen: Vec<f64> = Vec::with_capacity(limit + 1);
    for &v in col {
        if !seen.contains(&v) {
            seen.push(v);
            if seen.len() > limit {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn apply(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (v - self.min) / span
        } else {
            0.0
        }
    }
}

/// Min-max scaling fitted on the clean continuous training slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub columns: Vec<MinMax>,
}

impl NormalizationParams {
    pub fn fit(x: &DataMatrix) -> Self {
        let columns = x
            .columns()
            .iter()
            .map(|c| {
                let (min, max) = c
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                MinMax { min, max }
            })
            .collect();
        NormalizationParams { columns }
    }

    pub fn transform(&self, x: &DataMatrix) -> Result<DataMatrix> {
        if x.n_cols() != self.columns.len() {
            return Err(Error::schema(format!(
                "normalizer fitted on {} columns, input has {}",
                self.columns.len(),
                x.n_cols()
            )));
        }
        let mut out = x.clone();
        for (j, mm) in self.columns.iter().enumerate() {
            out.map_column(j, |v| mm.apply(v));
        }
        Ok(out)
    }
}

/// Which phase-2 detectors a model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchMode {
    Dual,
    DiscreteOnly,
    ContinuousOnly,
}

/// One phase-2 detector and the columns it owns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub columns: Vec<String>,
    pub model: CopodModel,
    pub bands: PercentileBands,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpdModel {
    pub schema: FeatureSchema,
    pub norm: NormalizationParams,
    /// COPOD 1, fed raw discrete columns.
    pub discrete: Option<Branch>,
    /// COPOD 2, fed normalized continuous columns.
    pub continuous: Option<Branch>,
    pub config: RunConfig,
    /// Rows removed by phase 1.
    pub removed_rows: usize,
    /// Rows the phase-2 detectors were fitted on.
    pub training_rows: usize,
}

impl TpdModel {
    pub fn mode(&self) -> BranchMode {
        match (&self.discrete, &self.continuous) {
            (Some(_), Some(_)) => BranchMode::Dual,
            (Some(_), None) => BranchMode::DiscreteOnly,
            _ => BranchMode::ContinuousOnly,
        }
    }

    pub fn combiner(&self) -> Combiner {
        self.config.combiner
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.discrete.is_none() && self.continuous.is_none() {
            return Err(Error::input("model carries no detector"));
        }
        let n_cont = self.schema.names_of(FeatureKind::Continuous).len();
        if self.norm.columns.len() != n_cont {
            return Err(Error::input("normalizer does not match continuous columns"));
        }
        for (branch, kind) in [
            (&self.discrete, FeatureKind::Discrete),
            (&self.continuous, FeatureKind::Continuous),
        ] {
            let expected = self.schema.names_of(kind);
            match branch {
                Some(b) => {
                    b.model.validate()?;
                    if b.columns != expected || b.model.d() != expected.len() {
                        return Err(Error::input("detector columns disagree with schema"));
                    }
                    if b.bands.band90.len() != b.model.d() {
                        return Err(Error::input("bands disagree with detector width"));
                    }
                }
                None if !expected.is_empty() => {
                    return Err(Error::input("schema column without a detector"));
                }
                None => {}
            }
        }
        Ok(())
    }
}

fn branch_slice(x: &DataMatrix, columns: &[String]) -> Result<DataMatrix> {
    let idx = columns
        .iter()
        .map(|name| {
            x.column_position(name)
                .ok_or_else(|| Error::schema(format!("input is missing column '{name}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(x.select_columns(&idx))
}

fn overrides_from(config: &RunConfig) -> BTreeMap<String, FeatureKind> {
    let mut map = BTreeMap::new();
    for c in &config.discrete_columns {
        map.insert(c.clone(), FeatureKind::Discrete);
    }
    for c in &config.continuous_columns {
        map.insert(c.clone(), FeatureKind::Continuous);
    }
    map
}

fn fit_branch(x: &DataMatrix, columns: Vec<String>, config: &RunConfig) -> Result<Branch> {
    let (model, scores) = CopodModel::fit_scored(x, config.contamination)?;
    let bands = fit_bands(&scores, &config.percentiles)?;
    Ok(Branch {
        columns,
        model,
        bands,
    })
}

/// Trains the full two-phase model on raw training data.
pub fn train_tpd(x_raw: &DataMatrix, config: &RunConfig) -> Result<TpdModel> {
    config.validate()?;
    let schema = infer_schema(
        x_raw,
        config.discrete_cardinality_limit,
        &overrides_from(config),
    )?;
    let phase1 = filter_noise(x_raw, config.contamination)?;
    log::info!(
        "phase 1 removed {} of {} training rows",
        phase1.removed.len(),
        x_raw.n_rows()
    );
    let mut model = fit_detectors(&phase1.clean, schema, config)?;
    model.removed_rows = phase1.removed.len();
    Ok(model)
}

/// Fits the phase-2 detectors on rows that have already been cleaned.
pub fn fit_detectors(
    clean: &DataMatrix,
    schema: FeatureSchema,
    config: &RunConfig,
) -> Result<TpdModel> {
    config.validate()?;
    let discrete_cols = schema.names_of(FeatureKind::Discrete);
    let continuous_cols = schema.names_of(FeatureKind::Continuous);
    if discrete_cols.is_empty() || continuous_cols.is_empty() {
        log::warn!(
            "all {} columns are {}; training a single detector",
            schema.columns.len(),
            if discrete_cols.is_empty() {
                "continuous"
            } else {
                "discrete"
            }
        );
    }

    let discrete = if discrete_cols.is_empty() {
        None
    } else {
        let slice = branch_slice(clean, &discrete_cols)?;
        Some(fit_branch(&slice, discrete_cols, config)?)
    };

    let (norm, continuous) = if continuous_cols.is_empty() {
        (NormalizationParams { columns: vec![] }, None)
    } else {
        let slice = branch_slice(clean, &continuous_cols)?;
        let norm = NormalizationParams::fit(&slice);
        let scaled = norm.transform(&slice)?;
        (norm, Some(fit_branch(&scaled, continuous_cols, config)?))
    };

    Ok(TpdModel {
        schema,
        norm,
        discrete,
        continuous,
        config: config.clone(),
        removed_rows: 0,
        training_rows: clean.n_rows(),
    })
}

/// Merges the two detectors' labels into `1` (anomalous) or `0`.
pub fn combine_decisions(l1: Label, l2: Label, mode: Combiner) -> u8 {
    let hit = match mode {
        Combiner::Or => l1.is_anomaly() || l2.is_anomaly(),
        Combiner::And => l1.is_anomaly() && l2.is_anomaly(),
    };
    hit as u8
}

/// Trailing-window alarm state for one stream.
///
/// The window expands until `t_w` samples have been seen; after that it
/// slides. A sample is an alarm when the window's mean decision reaches
/// `ratio`.
#[derive(Debug, Clone)]
pub struct DecisionWindow {
    t_w: usize,
    ratio: f64,
    recent: VecDeque<u8>,
    ones: usize,
}

impl DecisionWindow {
    pub fn new(t_w: usize, ratio: f64) -> Result<Self> {
        if t_w == 0 {
            return Err(Error::config("window must be at least 1 sample"));
        }
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::config(format!("ratio {ratio} outside (0, 1]")));
        }
        Ok(DecisionWindow {
            t_w,
            ratio,
            recent: VecDeque::with_capacity(t_w),
            ones: 0,
        })
    }

    pub fn push(&mut self, o: u8) -> Label {
        if self.recent.len() == self.t_w {
            self.ones -= self.recent.pop_front().unwrap_or(0) as usize;
        }
        let o = o.min(1);
        self.recent.push_back(o);
        self.ones += o as usize;
        let mean = self.ones as f64 / self.recent.len() as f64;
        if mean >= self.ratio {
            Label::Anomaly
        } else {
            Label::Normal
        }
    }
}

pub fn window_decision(stream: &[u8], t_w: usize, ratio: f64) -> Result<Vec<Label>> {
    let mut w = DecisionWindow::new(t_w, ratio)?;
    Ok(stream.iter().map(|&o| w.push(o)).collect())
}

/// Scores and labels of one detector over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchScores {
    pub columns: Vec<String>,
    pub scores: Vec<ScoredSample>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub discrete: Option<BranchScores>,
    pub continuous: Option<BranchScores>,
    /// Per-row combined decision, `1` anomalous.
    pub combined: Vec<u8>,
    /// Windowed final labels.
    pub final_labels: Vec<Label>,
}

impl ScoreReport {
    pub fn len(&self) -> usize {
        self.combined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combined.is_empty()
    }

    /// The `k` features with the largest dimensional scores in row `i`,
    /// across both detectors.
    pub fn top_dimensions(&self, i: usize, k: usize) -> Vec<(&str, f64)> {
        let mut all: Vec<(&str, f64)> = [&self.discrete, &self.continuous]
            .into_iter()
            .flatten()
            .flat_map(|b| {
                b.columns
                    .iter()
                    .zip(&b.scores[i].per_dim)
                    .map(|(name, &s)| (name.as_str(), s))
            })
            .collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1));
        all.truncate(k);
        all
    }
}

fn score_branch(branch: &Branch, x: &DataMatrix) -> Result<BranchScores> {
    let scores = branch.model.score(x)?;
    let labels = scores
        .iter()
        .map(|s| branch.model.label_for(s.total))
        .collect();
    Ok(BranchScores {
        columns: branch.columns.clone(),
        scores,
        labels,
    })
}

/// Runs phase-2 inference over a stream of rows in order.
pub fn predict_tpd(model: &TpdModel, x: &DataMatrix) -> Result<ScoreReport> {
    let discrete = model
        .discrete
        .as_ref()
        .map(|b| score_branch(b, &branch_slice(x, &b.columns)?))
        .transpose()?;
    let continuous = model
        .continuous
        .as_ref()
        .map(|b| {
            let scaled = model.norm.transform(&branch_slice(x, &b.columns)?)?;
            score_branch(b, &scaled)
        })
        .transpose()?;

    let combined: Vec<u8> = (0..x.n_rows())
        .map(|i| match (&discrete, &continuous) {
            (Some(d), Some(c)) => combine_decisions(d.labels[i], c.labels[i], model.combiner()),
            (Some(only), None) | (None, Some(only)) => only.labels[i].is_anomaly() as u8,
            (None, None) => 0,
        })
        .collect();
    let final_labels = window_decision(&combined, model.config.window, model.config.ratio)?;
    Ok(ScoreReport {
        discrete,
        continuous,
        combined,
        final_labels,
    })
}

/// Detection quality with anomalies (−1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

pub fn evaluate(pred: &[Label], truth: &[Label]) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(Error::input(format!(
            "{} predictions for {} ground-truth labels",
            pred.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, t) in pred.iter().zip(truth) {
        match (p.is_anomaly(), t.is_anomaly()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate = true;
        0.0
    };
    Ok(Metrics {
        tp,
        fp,
        tn,
        fn_,
        precision,
        recall,
        f1,
        degenerate,
    })
}
