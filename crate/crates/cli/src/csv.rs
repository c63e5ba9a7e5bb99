//! Minimal CSV ingestion: header row, comma delimiter, unquoted numeric cells.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use scadboot::Dataset;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot read {}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: file is empty, expected a header row", path.display())]
    NoHeader { path: PathBuf },

    #[error("{}: no data rows", path.display())]
    NoRows { path: PathBuf },

    #[error("{}, line {line}: empty column name", path.display())]
    EmptyName { path: PathBuf, line: usize },

    #[error("{}: duplicate column name '{name}'", path.display())]
    DuplicateColumn { path: PathBuf, name: String },

    #[error("{}: response column '{name}' not found in header", path.display())]
    MissingResponse { path: PathBuf, name: String },

    #[error("{}: no covariate columns besides the response", path.display())]
    NoCovariates { path: PathBuf },

    #[error("{}, line {line}: expected {expected} fields, found {found}", path.display())]
    Ragged {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{}, line {line}, column '{column}': '{value}' is not a finite number", path.display())]
    NonNumeric {
        path: PathBuf,
        line: usize,
        column: String,
        value: String,
    },
}

/// Read `path` and split off `response` as the outcome; every other column is a covariate.
pub fn load_csv(path: &Path, response: &str) -> Result<Dataset, CsvError> {
    let text = fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, path, response)
}

pub fn parse_csv(text: &str, path: &Path, response: &str) -> Result<Dataset, CsvError> {
    let path = path.to_path_buf();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_line, header) = lines.next().ok_or_else(|| CsvError::NoHeader { path: path.clone() })?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(|s| s.is_empty()) {
        return Err(CsvError::EmptyName {
            path,
            line: header_line,
        });
    }
    for (i, name) in names.iter().enumerate() {
        if names[..i].contains(name) {
            return Err(CsvError::DuplicateColumn {
                path,
                name: name.clone(),
            });
        }
    }
    let y_col = names
        .iter()
        .position(|s| s == response)
        .ok_or_else(|| CsvError::MissingResponse {
            path: path.clone(),
            name: response.to_string(),
        })?;
    if names.len() < 2 {
        return Err(CsvError::NoCovariates { path });
    }

    let width = names.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != width {
            return Err(CsvError::Ragged {
                path,
                line,
                expected: width,
                found: fields.len(),
            });
        }
        for (field, name) in fields.iter().zip(&names) {
            let v = field.trim();
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => values.push(x),
                _ => {
                    return Err(CsvError::NonNumeric {
                        path,
                        line,
                        column: name.clone(),
                        value: v.to_string(),
                    })
                }
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CsvError::NoRows { path });
    }

    let all = Array2::from_shape_vec((rows, width), values).expect("row lengths checked");
    let covariates: Vec<usize> = (0..width).filter(|&j| j != y_col).collect();
    let x = all.select(ndarray::Axis(1), &covariates);
    let y: Array1<f64> = all.column(y_col).to_owned();
    let names = covariates.iter().map(|&j| names[j].clone()).collect();
    let data = Dataset::new(x, Some(y)).expect("cells checked finite");
    Ok(data.with_column_names(names).expect("one name per covariate"))
}

/// Response first, then covariates, every value in shortest round-trip form.
pub fn dataset_to_csv(data: &Dataset, response: &str) -> String {
    let mut out = String::from(response);
    for j in 0..data.p() {
        out.push(',');
        out.push_str(&data.column_name(j));
    }
    out.push('\n');
    let y = data.y();
    for (i, row) in data.x().rows().into_iter().enumerate() {
        if let Some(y) = y {
            let _ = write!(out, "{}", y[i]);
        }
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
