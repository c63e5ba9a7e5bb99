use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// An i.i.d. sample: an `n x p` covariate matrix and an optional response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Option<Array1<f64>>,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Option<Array1<f64>>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        if let Some((idx, _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "covariate at row {}, column {} is not finite",
                idx.0, idx.1
            )));
        }
        if let Some(y) = &y {
            if y.len() != x.nrows() {
                return Err(Error::InvalidInput(format!(
                    "response has {} entries but covariates have {} rows",
                    y.len(),
                    x.nrows()
                )));
            }
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("response at row {i} is not finite")));
            }
        }
        Ok(Self {
            x,
            y,
            column_names: None,
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::InvalidInput(format!(
                "{} column names for {} columns",
                names.len(),
                self.p()
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> Option<ArrayView1<'_, f64>> {
        self.y.as_ref().map(|y| y.view())
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Name of column `j`, falling back to `x{j+1}`.
    pub fn column_name(&self, j: usize) -> String {
        self.column_names
            .as_ref()
            .map(|names| names[j].clone())
            .unwrap_or_else(|| format!("x{}", j + 1))
    }

    pub fn require_response(&self) -> Result<ArrayView1<'_, f64>> {
        self.y()
            .ok_or_else(|| Error::InvalidInput("objective needs a response but the dataset has none".into()))
    }

    pub fn require_binary_response(&self) -> Result<ArrayView1<'_, f64>> {
        let y = self.require_response()?;
        if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidInput(format!(
                "binary response expected, row {i} has value {}",
                y[i]
            )));
        }
        Ok(y)
    }

    /// Rows in the given order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            y: self.y.as_ref().map(|y| y.select(Axis(0), rows)),
            column_names: self.column_names.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(1), cols),
            y: self.y.clone(),
            column_names: self
                .column_names
                .as_ref()
                .map(|names| cols.iter().map(|&j| names[j].clone()).collect()),
        }
    }
}

/// Sorted, duplicate-free set of coordinate indices into a `p`-vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Support {
    indices: Vec<usize>,
    p: usize,
}

impl Support {
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&j| j >= p) {
            return Err(Error::InvalidInput(format!("support index {bad} out of range for dimension {p}")));
        }
        Ok(Self { indices, p })
    }

    pub fn full(p: usize) -> Self {
        Self {
            indices: (0..p).collect(),
            p,
        }
    }

    pub fn empty(p: usize) -> Self {
        Self { indices: Vec::new(), p }
    }

    /// Indices of the nonzero entries of `theta`.
    pub fn of_nonzero(theta: ArrayView1<f64>) -> Self {
        Self {
            indices: theta
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, _)| j)
                .collect(),
            p: theta.len(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.p
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    /// Position of coordinate `j` within the support.
    pub fn position(&self, j: usize) -> Option<usize> {
        self.indices.binary_search(&j).ok()
    }

    pub fn complement(&self) -> Support {
        Support {
            indices: (0..self.p).filter(|j| !self.contains(*j)).collect(),
            p: self.p,
        }
    }

    /// Full-length vector with `values` on the support and zeros elsewhere.
    pub fn expand(&self, values: ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(values.len(), self.len());
        let mut out = Array1::zeros(self.p);
        for (k, &j) in self.indices.iter().enumerate() {
            out[j] = values[k];
        }
        out
    }

    pub fn extract(&self, full: ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(full.len(), self.p);
        self.indices.iter().map(|&j| full[j]).collect()
    }

    /// Maps a support defined over this support's coordinates back to the
    /// original coordinates.
    pub fn compose(&self, inner: &Support) -> Result<Support> {
        if inner.p != self.len() {
            return Err(Error::InvalidInput(format!(
                "inner support has dimension {} but outer support has {} entries",
                inner.p,
                self.len()
            )));
        }
        Ok(Support {
            indices: inner.indices.iter().map(|&k| self.indices[k]).collect(),
            p: self.p,
        })
    }
}

impl std::fmt::Display for Support {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}
