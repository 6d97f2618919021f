//! CSV ingestion and the CSV outputs of the command-line tool.

use std::io::{Read, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::data::{DataMatrix, Label};
use crate::error::{Error, Result};
use crate::explain::Explanation;
use crate::pipeline::ScoreReport;

const LABEL_HEADERS: &[&str] = &["label", "normal/attack", "attack"];
const INDEX_HEADERS: &[&str] = &["timestamp", "time", "datetime", "date"];

/// Reads a headed CSV. The label and index columns are taken from `config`
/// or recognised by name; every other column must be numeric.
pub fn load_csv(path: &Path, config: &RunConfig) -> Result<DataMatrix> {
    let file = std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    read_csv(file, config)
}

pub fn read_csv<R: Read>(reader: R, config: &RunConfig) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => return Err(Error::input("CSV is empty; a header row is required")),
    };
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    if names.iter().all(|n| n.is_empty()) {
        return Err(Error::input("CSV header row is blank"));
    }

    let label_col = pick_column(
        &names,
        config.label_column.as_deref(),
        LABEL_HEADERS,
        "label",
    )?;
    let index_col = pick_column(
        &names,
        config.index_column.as_deref(),
        INDEX_HEADERS,
        "index",
    )?;

    let feature_cols: Vec<usize> = (0..names.len())
        .filter(|&j| Some(j) != label_col && Some(j) != index_col)
        .collect();
    let mut columns = vec![Vec::new(); feature_cols.len()];
    let mut labels = Vec::new();
    let mut index = Vec::new();

    for (r, record) in records.enumerate() {
        let record = record.map_err(csv_err)?;
        // data rows are numbered from 1; the header is row 0
        let row = r + 1;
        if record.len() != names.len() {
            return Err(Error::input(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                names.len()
            )));
        }
        for (out, &j) in columns.iter_mut().zip(&feature_cols) {
            let cell = &record[j];
            let v: f64 = cell.parse().map_err(|_| {
                Error::input(format!(
                    "row {row}, column '{}': '{cell}' is not a number",
                    names[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::input(format!(
                    "row {row}, column '{}': non-finite value",
                    names[j]
                )));
            }
            out.push(v);
        }
        if let Some(j) = label_col {
            labels.push(
                parse_label(&record[j])
                    .map_err(|e| Error::input(format!("row {row}, column '{}': {e}", names[j])))?,
            );
        }
        if let Some(j) = index_col {
            index.push(record[j].to_string());
        }
    }

    let feature_names = feature_cols.iter().map(|&j| names[j].clone()).collect();
    let mut m = DataMatrix::from_columns(feature_names, columns)?;
    if label_col.is_some() {
        m = m.with_labels(labels)?;
    }
    if index_col.is_some() {
        m = m.with_index(index)?;
    }
    Ok(m)
}

fn csv_err(e: csv::Error) -> Error {
    Error::input(format!("malformed CSV: {e}"))
}

fn pick_column(
    names: &[String],
    configured: Option<&str>,
    known: &[&str],
    what: &str,
) -> Result<Option<usize>> {
    match configured {
        Some(name) => names
            .iter()
            .position(|n| n == name)
            .map(Some)
            .ok_or_else(|| Error::config(format!("{what} column '{name}' not in CSV header"))),
        None => Ok(names
            .iter()
            .position(|n| known.contains(&n.to_ascii_lowercase().as_str()))),
    }
}

/// Accepts `1` / `-1` and `Normal` / `Attack` (case and inner spaces ignored).
pub fn parse_label(cell: &str) -> Result<Label> {
    let squashed: String = cell
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase();
    match squashed.as_str() {
        "1" | "1.0" | "normal" => Ok(Label::Normal),
        "-1" | "-1.0" | "attack" => Ok(Label::Anomaly),
        _ => Err(Error::input(format!("unrecognised label '{cell}'"))),
    }
}

/// Writes a matrix back out: optional `timestamp`, features, optional `label`.
pub fn write_matrix<W: Write>(out: W, m: &DataMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = Vec::new();
    if m.index().is_some() {
        header.push("timestamp");
    }
    header.extend(m.names().iter().map(String::as_str));
    if m.labels().is_some() {
        header.push("label");
    }
    w.write_record(&header).map_err(io_err)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..m.n_rows() {
        rec.clear();
        if let Some(idx) = m.index() {
            rec.push(idx[i].clone());
        }
        rec.extend((0..m.n_cols()).map(|j| m.value(i, j).to_string()));
        if let Some(l) = m.labels() {
            rec.push(l[i].as_i8().to_string());
        }
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

fn io_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::input(format!("CSV write failed: {other:?}")),
    }
}

/// One line per row: scores of both detectors, the combined decision, the
/// windowed label and the three largest dimensional contributors.
pub fn write_scores<W: Write>(out: W, report: &ScoreReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "score_discrete",
        "score_continuous",
        "combined",
        "final_label",
        "top_dimensions",
    ])
    .map_err(io_err)?;
    let score = |b: &Option<crate::pipeline::BranchScores>, i: usize| {
        b.as_ref()
            .map_or(String::new(), |b| b.scores[i].total.to_string())
    };
    for i in 0..report.len() {
        let top: Vec<&str> = report.top_dimensions(i, 3).iter().map(|t| t.0).collect();
        w.write_record([
            i.to_string(),
            score(&report.discrete, i),
            score(&report.continuous, i),
            report.combined[i].to_string(),
            report.final_labels[i].as_i8().to_string(),
            top.join(";"),
        ])
        .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columnar explanation export, one line per (sample, dimension).
pub fn write_explanations<W: Write>(
    out: W,
    detector: &str,
    names: &[String],
    bands: &crate::explain::PercentileBands,
    explanations: &[Explanation],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sample",
        "detector",
        "dimension",
        "name",
        "score",
        "band90",
        "band99",
        "flag",
    ])
    .map_err(io_err)?;
    for e in explanations {
        for j in 0..e.scores.len() {
            w.write_record([
                e.sample.to_string(),
                detector.to_string(),
                j.to_string(),
                names[j].clone(),
                e.scores[j].to_string(),
                bands.band90[j].to_string(),
                bands.band99[j].to_string(),
                e.flags[j].as_str().to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<DataMatrix> {
        read_csv(text.as_bytes(), &RunConfig::default())
    }

    #[test]
    fn basic_table() {
        let m = read("a,b\n1,2\n3,4\n5,6.5\n").unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (3, 2));
        assert_eq!(m.column(1), &[2.0, 4.0, 6.5]);
        assert!(m.labels().is_none());
    }

    #[test]
    fn swat_style_labels_and_timestamp() {
        let text = " Timestamp,LIT101,P101,Normal/Attack\n\
                    22/12/2015 4:00:00 PM,124.3135,2,Normal\n\
                    22/12/2015 4:00:01 PM,124.3920,2,Attack\n\
                    22/12/2015 4:00:02 PM,124.4705,1,A ttack\n";
        let m = read(text).unwrap();
        assert_eq!(m.names(), &["LIT101", "P101"]);
        assert_eq!(
            m.labels().unwrap(),
            &[Label::Normal, Label::Anomaly, Label::Anomaly]
        );
        assert_eq!(m.index().unwrap()[1], "22/12/2015 4:00:01 PM");
    }

    #[test]
    fn numeric_labels_via_config() {
        let cfg = RunConfig {
            label_column: Some("y".into()),
            ..RunConfig::default()
        };
        let m = read_csv("x,y\n0.5,1\n0.7,-1\n".as_bytes(), &cfg).unwrap();
        assert_eq!(m.labels().unwrap(), &[Label::Normal, Label::Anomaly]);
        let cfg = RunConfig {
            label_column: Some("z".into()),
            ..RunConfig::default()
        };
        assert!(matches!(
            read_csv("x,y\n0.5,1\n".as_bytes(), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn errors_name_the_cell() {
        let err = read("a,b\n1,2\n3,oops\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("'b'"), "{msg}");
        assert!(matches!(read(""), Err(Error::InvalidInput(_))));
        assert!(matches!(read("a,b\n1\n"), Err(Error::InvalidInput(_))));
        assert!(matches!(
            read("a,label\n1,maybe\n"),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn write_then_read_is_exact() {
        let m = DataMatrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-2.5e-300, 7.0]])
            .unwrap()
            .with_labels(vec![Label::Anomaly, Label::Normal])
            .unwrap()
            .with_index(vec!["t0".into(), "t1".into()])
            .unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(read(std::str::from_utf8(&buf).unwrap()).unwrap(), m);
    }
}
