//! Continuous datasets and their tab-separated text form.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("dataset needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("dataset has no variables")]
    NoVariables,
    #[error("column {column} has {got} values, expected {expected}")]
    RaggedColumn { column: usize, got: usize, expected: usize },
    #[error("non-finite value in column `{0}`")]
    NonFinite(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// `n` samples of `p` continuous variables, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    n: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, DataError> {
        if names.is_empty() {
            return Err(DataError::NoVariables);
        }
        let n = columns.first().map_or(0, Vec::len);
        if n < 2 {
            return Err(DataError::TooFewSamples(n));
        }
        assert_eq!(names.len(), columns.len(), "one name per column");
        let mut values = Vec::with_capacity(n * names.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(DataError::RaggedColumn { column: j, got: col.len(), expected: n });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(DataError::NonFinite(names[j].clone()));
            }
            values.extend_from_slice(col);
        }
        Ok(Self { names, n, values })
    }

    pub fn num_samples(&self) -> usize {
        self.n
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    /// Parses a header of variable names followed by one sample per line.
    pub fn from_tsv(text: &str) -> Result<Self, DataError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(DataError::NoVariables)?;
        let names: Vec<String> = header.split('\t').map(|s| s.trim().to_string()).collect();
        if names.iter().any(String::is_empty) {
            return Err(DataError::Parse { line: 1, message: "empty variable name".into() });
        }
        let p = names.len();
        let mut columns = vec![Vec::new(); p];
        for (idx, line) in lines {
            let line_no = idx + 1;
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != p {
                return Err(DataError::Parse {
                    line: line_no,
                    message: format!("expected {p} cells, found {}", cells.len()),
                });
            }
            for (j, cell) in cells.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| DataError::Parse {
                    line: line_no,
                    message: format!("non-numeric cell `{}` in column `{}`", cell.trim(), names[j]),
                })?;
                if !v.is_finite() {
                    return Err(DataError::Parse {
                        line: line_no,
                        message: format!("non-finite cell `{}` in column `{}`", cell.trim(), names[j]),
                    });
                }
                columns[j].push(v);
            }
        }
        Self::from_columns(names, columns)
    }

    /// Shortest round-trip decimal form, so parsing the output reproduces the
    /// data bit for bit.
    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 20);
        out.push_str(&self.names.join("\t"));
        out.push('\n');
        for t in 0..self.n {
            for j in 0..self.num_vars() {
                if j > 0 {
                    out.push('\t');
                }
                write!(out, "{}", self.values[j * self.n + t]).expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }
}
