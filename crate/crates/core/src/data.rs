//! Column-major numeric tables and the ±1 label convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary decision label. Anomalies are the positive class and encode as −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Normal => 1,
            Label::Anomaly => -1,
        }
    }

    pub fn is_anomaly(self) -> bool {
        self == Label::Anomaly
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.as_i8()
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Label::Normal),
            -1 => Ok(Label::Anomaly),
            other => Err(Error::input(format!("label must be 1 or -1, got {other}"))),
        }
    }
}

/// An n×d table of finite reals stored by column, with optional ground truth
/// and an opaque per-row index (timestamps) that is carried but never scored.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    labels: Option<Vec<Label>>,
    index: Option<Vec<String>>,
}

impl DataMatrix {
    /// Builds a matrix from named columns. Every column must have the same
    /// length and every cell must be finite.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::input(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::input(format!(
                    "column '{name}' has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::input(format!(
                    "non-finite value in column '{name}' at row {row}"
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::input(format!("duplicate column name '{name}'")));
            }
        }
        Ok(DataMatrix {
            names,
            columns,
            labels: None,
            index: None,
        })
    }

    /// Builds a matrix from rows, naming columns `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::input(format!(
                    "row {i} has {} values, expected {d}",
                    row.len()
                )));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Self::from_columns(default_names(d), columns)
    }

    pub fn with_labels(mut self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.n_rows() {
            return Err(Error::input(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n_rows()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_index(mut self, index: Vec<String>) -> Result<Self> {
        if index.len() != self.n_rows() {
            return Err(Error::input(format!(
                "{} index entries for {} rows",
                index.len(),
                self.n_rows()
            )));
        }
        self.index = Some(index);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn index(&self) -> Option<&[String]> {
        self.index.as_deref()
    }

    pub fn column_position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keeps the listed rows, in the order given. Labels and index follow.
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        let pick = |v: &Vec<f64>| rows.iter().map(|&i| v[i]).collect();
        DataMatrix {
            names: self.names.clone(),
            columns: self.columns.iter().map(pick).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&i| l[i]).collect()),
            index: self
                .index
                .as_ref()
                .map(|x| rows.iter().map(|&i| x[i].clone()).collect()),
        }
    }

    /// Keeps the listed columns, in the order given. Labels and index follow.
    pub fn select_columns(&self, cols: &[usize]) -> DataMatrix {
        DataMatrix {
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            labels: self.labels.clone(),
            index: self.index.clone(),
        }
    }

    /// Applies `f` to every cell of column `j`.
    pub(crate) fn map_column(&mut self, j: usize, f: impl Fn(f64) -> f64) {
        for v in &mut self.columns[j] {
            *v = f(*v);
        }
    }
}

pub(crate) fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_columns_agree() {
        let m = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.n_cols(), 2);
        assert_eq!(m.column(1), &[2.0, 4.0, 6.0]);
        assert_eq!(m.row(2), vec![5.0, 6.0]);
        assert_eq!(m.names(), &["x0", "x1"]);
    }

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        let err = DataMatrix::from_rows(&[vec![1.0], vec![f64::NAN]]).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        assert!(
            DataMatrix::from_columns(vec!["a".into(), "a".into()], vec![vec![1.0], vec![2.0]])
                .is_err()
        );
    }

    #[test]
    fn selection_carries_labels() {
        let m = DataMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]])
            .unwrap()
            .with_labels(vec![Label::Normal, Label::Anomaly, Label::Normal])
            .unwrap();
        let s = m.select_rows(&[2, 1]);
        assert_eq!(s.column(0), &[3.0, 2.0]);
        assert_eq!(s.labels().unwrap(), &[Label::Normal, Label::Anomaly]);
    }

    #[test]
    fn label_encoding() {
        assert_eq!(Label::Anomaly.as_i8(), -1);
        assert_eq!(Label::try_from(1i8).unwrap(), Label::Normal);
        assert!(Label::try_from(0i8).is_err());
    }
}
