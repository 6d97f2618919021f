//! Two-phase dual COPOD anomaly detection for multivariate process data.
//!
//! Phase 1 scores the training table with ECOD and drops its most outlying
//! rows. Phase 2 splits the cleaned table into discrete (actuator) and
//! continuous (sensor) columns, fits one COPOD detector on each, and turns
//! their per-row labels into alarms with a trailing decision window.
//!
//! ```no_run
//! use tpdcopod::{load_csv, predict_tpd, train_tpd, RunConfig};
//!
//! let cfg = RunConfig::default();
//! let train = load_csv("train.csv".as_ref(), &cfg)?;
//! let model = train_tpd(&train, &cfg)?;
//! let test = load_csv("test.csv".as_ref(), &cfg)?;
//! let report = predict_tpd(&model, &test)?;
//! println!("{} alarms", report.final_labels.iter().filter(|l| l.is_anomaly()).count());
//! # Ok::<(), tpdcopod::Error>(())
//! ```

pub mod config;
pub mod copod;
pub mod csv_io;
pub mod data;
pub mod ecdf;
pub mod ecod;
pub mod error;
pub mod explain;
pub mod model_file;
pub mod pipeline;
pub mod synth;

pub use config::{Combiner, RunConfig};
pub use copod::{fit_copod, predict_labels, score_copod, CopodModel};
pub use csv_io::{load_csv, read_csv};
pub use data::{DataMatrix, Label};
pub use ecdf::{fit_dimension, FittedDimension};
pub use ecod::{filter_noise, fit_ecod, score_ecod, EcodModel, FilterOutcome, ScoredSample};
pub use error::{Corruption, Error, Result};
pub use explain::{explain_sample, fit_bands, BandFlag, Explanation, PercentileBands};
pub use model_file::{load_model, save_model};
pub use pipeline::{
    combine_decisions, evaluate, fit_detectors, infer_schema, predict_tpd, train_tpd,
    window_decision, FeatureKind, FeatureSchema, Metrics, ScoreReport, TpdModel,
};
pub use synth::{generate_synthetic, AnomalySpec, SyntheticProcess};
