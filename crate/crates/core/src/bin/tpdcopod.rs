use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tpdcopod::csv_io::{write_explanations, write_matrix, write_scores};
use tpdcopod::{
    evaluate, explain_sample, filter_noise, load_csv, load_model, predict_tpd, save_model,
    train_tpd, AnomalySpec, Combiner, Error, Label, Result, RunConfig, SyntheticProcess,
};

#[derive(Parser)]
#[command(
    name = "tpdcopod",
    version,
    about = "Two-phase dual COPOD anomaly detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model (phase-1 filter + dual COPOD) on a CSV.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run phase 1 only and write the cleaned rows.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write removed row indices with their scores.
        #[arg(long)]
        removed: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score a CSV stream with a trained model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Per-feature explanations against the training percentile bands.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Columnar export: sample, detector, dimension, score, bands, flag.
        #[arg(long)]
        out: PathBuf,
        /// One JSON record per explained sample.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Only explain these row indices (default: rows with a final alarm).
        #[arg(long, value_delimiter = ',')]
        rows: Vec<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Precision, recall and F1 against the CSV's label column.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Evaluate the per-row combined decisions instead of windowed labels.
        #[arg(long)]
        raw: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write a synthetic ICS-like stream with planted attack runs.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        discrete: usize,
        #[arg(long, default_value_t = 15)]
        continuous: usize,
        #[arg(long, default_value_t = 0.05)]
        anomaly_rate: f64,
        #[arg(long, default_value_t = 60)]
        min_run: usize,
        #[arg(long, default_value_t = 600)]
        max_run: usize,
        #[arg(long, default_value_t = 8.0)]
        shift_sigma: f64,
        #[arg(long, default_value_t = 3)]
        shifted_continuous: usize,
        #[arg(long, default_value_t = 1)]
        shifted_discrete: usize,
        /// Seed of the row stream.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seed of the plant's distributions (defaults to --seed). Streams
        /// sharing it come from the same simulated plant.
        #[arg(long)]
        process_seed: Option<u64>,
    },
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML file with run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    contamination: Option<f64>,
    #[arg(long)]
    discrete_cardinality_limit: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    discrete_columns: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    continuous_columns: Option<Vec<String>>,
    /// `or` or `and`.
    #[arg(long)]
    combiner: Option<String>,
    /// Decision window length in samples.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    percentiles: Option<Vec<f64>>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    index_column: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self, base: Option<RunConfig>) -> Result<RunConfig> {
        let mut cfg = match (&self.config, base) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(base)) => base,
            (None, None) => RunConfig::default(),
        };
        if let Some(v) = self.contamination {
            cfg.contamination = v;
        }
        if let Some(v) = self.discrete_cardinality_limit {
            cfg.discrete_cardinality_limit = v;
        }
        if let Some(v) = &self.discrete_columns {
            cfg.discrete_columns = v.clone();
        }
        if let Some(v) = &self.continuous_columns {
            cfg.continuous_columns = v.clone();
        }
        if let Some(v) = &self.combiner {
            cfg.combiner = v.parse::<Combiner>()?;
        }
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = self.ratio {
            cfg.ratio = v;
        }
        if let Some(v) = &self.percentiles {
            cfg.percentiles = v.clone();
        }
        if let Some(v) = &self.label_column {
            cfg.label_column = Some(v.clone());
        }
        if let Some(v) = &self.index_column {
            cfg.index_column = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { input, model, cfg } => {
            let cfg = cfg.resolve(None)?;
            let x = load_csv(&input, &cfg)?;
            let m = train_tpd(&x, &cfg)?;
            save_model(&m, &model)?;
            println!(
                "trained {:?} model: {} rows removed in phase 1, {} rows in phase 2",
                m.mode(),
                m.removed_rows,
                m.training_rows
            );
        }
        Command::Filter {
            input,
            out,
            removed,
            cfg,
        } => {
            let cfg = cfg.resolve(None)?;
            let x = load_csv(&input, &cfg)?;
            let f = filter_noise(&x, cfg.contamination)?;
            write_matrix(create(&out)?, &f.clean)?;
            if let Some(path) = removed {
                let mut w = create(&path)?;
                writeln!(w, "index,score")?;
                for &i in &f.removed {
                    writeln!(w, "{i},{}", f.scores[i].total)?;
                }
                w.flush()?;
            }
            println!(
                "removed {} of {} rows; {} kept",
                f.removed.len(),
                x.n_rows(),
                f.clean.n_rows()
            );
        }
        Command::Score {
            model,
            input,
            out,
            cfg,
        } => {
            let m = load_model(&model)?;
            let cfg = cfg.resolve(Some(m.config.clone()))?;
            let x = load_csv(&input, &cfg)?;
            let report = predict_tpd(&with_runtime(m, &cfg), &x)?;
            write_scores(create(&out)?, &report)?;
            let alarms = report
                .final_labels
                .iter()
                .filter(|l| l.is_anomaly())
                .count();
            println!("scored {} rows, {alarms} alarms", report.len());
        }
        Command::Explain {
            model,
            input,
            out,
            records,
            rows,
            cfg,
        } => {
            let m = load_model(&model)?;
            let cfg = cfg.resolve(Some(m.config.clone()))?;
            let m = with_runtime(m, &cfg);
            let x = load_csv(&input, &cfg)?;
            let report = predict_tpd(&m, &x)?;
            let rows: Vec<usize> = if rows.is_empty() {
                (0..report.len())
                    .filter(|&i| report.final_labels[i].is_anomaly())
                    .collect()
            } else {
                if let Some(&bad) = rows.iter().find(|&&i| i >= report.len()) {
                    return Err(Error::InvalidInput(format!(
                        "row {bad} out of range for {} rows",
                        report.len()
                    )));
                }
                rows
            };
            let mut out_w = create(&out)?;
            let mut rec_w = records.as_deref().map(create).transpose()?;
            let branches = [
                ("discrete", m.discrete.as_ref(), report.discrete.as_ref()),
                (
                    "continuous",
                    m.continuous.as_ref(),
                    report.continuous.as_ref(),
                ),
            ];
            let mut first = true;
            for (name, branch, scores) in branches {
                let (Some(branch), Some(scores)) = (branch, scores) else {
                    continue;
                };
                let ex = rows
                    .iter()
                    .map(|&i| {
                        explain_sample(
                            i,
                            &scores.scores[i],
                            &branch.bands,
                            branch.model.threshold(),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                // one header for the whole export
                let mut buf = Vec::new();
                write_explanations(&mut buf, name, &branch.columns, &branch.bands, &ex)?;
                let body = if first {
                    &buf[..]
                } else {
                    let skip = buf.iter().position(|&b| b == b'\n').map_or(0, |p| p + 1);
                    &buf[skip..]
                };
                out_w.write_all(body)?;
                first = false;
                if let Some(w) = rec_w.as_mut() {
                    for e in &ex {
                        let rec = serde_json::json!({
                            "sample": e.sample,
                            "detector": name,
                            "total": e.total,
                            "verdict": e.verdict.as_i8(),
                            "above99": e.above99.iter().map(|&j| &branch.columns[j]).collect::<Vec<_>>(),
                            "narrative": e.narrative(&branch.columns),
                        });
                        writeln!(w, "{rec}")?;
                    }
                }
            }
            out_w.flush()?;
            if let Some(mut w) = rec_w {
                w.flush()?;
            }
            println!("explained {} rows", rows.len());
        }
        Command::Eval {
            model,
            input,
            raw,
            cfg,
        } => {
            let m = load_model(&model)?;
            let cfg = cfg.resolve(Some(m.config.clone()))?;
            let x = load_csv(&input, &cfg)?;
            let truth = x
                .labels()
                .ok_or_else(|| Error::InvalidInput("input CSV has no label column".into()))?
                .to_vec();
            let report = predict_tpd(&with_runtime(m, &cfg), &x)?;
            let pred: Vec<Label> = if raw {
                report
                    .combined
                    .iter()
                    .map(|&o| {
                        if o == 1 {
                            Label::Anomaly
                        } else {
                            Label::Normal
                        }
                    })
                    .collect()
            } else {
                report.final_labels.clone()
            };
            let metrics = evaluate(&pred, &truth)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&metrics).expect("metrics serialize")
            );
        }
        Command::Gen {
            out,
            rows,
            discrete,
            continuous,
            anomaly_rate,
            min_run,
            max_run,
            shift_sigma,
            shifted_continuous,
            shifted_discrete,
            seed,
            process_seed,
        } => {
            let spec = AnomalySpec {
                rate: anomaly_rate,
                min_run,
                max_run,
                shift_sigma,
                shifted_continuous,
                shifted_discrete,
            };
            let process =
                SyntheticProcess::new(discrete, continuous, process_seed.unwrap_or(seed))?;
            let (m, labels) = process.sample(rows, &spec, seed)?;
            write_matrix(create(&out)?, &m)?;
            let anomalies = labels.iter().filter(|l| l.is_anomaly()).count();
            println!(
                "wrote {rows} rows ({anomalies} anomalous) to {}",
                out.display()
            );
        }
    }
    Ok(())
}

/// Window and combiner settings may be changed at inference time; the
/// fitted detectors may not.
fn with_runtime(mut m: tpdcopod::TpdModel, cfg: &RunConfig) -> tpdcopod::TpdModel {
    m.config.combiner = cfg.combiner;
    m.config.window = cfg.window;
    m.config.ratio = cfg.ratio;
    m
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config() {
        let args = ConfigArgs {
            window: Some(10),
            combiner: Some("and".into()),
            ..ConfigArgs::default()
        };
        let cfg = args.resolve(None).unwrap();
        assert_eq!(cfg.window, 10);
        assert_eq!(cfg.combiner, Combiner::And);
        assert_eq!(cfg.ratio, 0.8);
    }

    #[test]
    fn invalid_flag_values_are_config_errors() {
        let args = ConfigArgs {
            ratio: Some(1.5),
            ..ConfigArgs::default()
        };
        assert_eq!(args.resolve(None).unwrap_err().exit_code(), 2);
    }
}
