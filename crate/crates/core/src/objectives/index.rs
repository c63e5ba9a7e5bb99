//! Objectives that depend on `theta` only through the linear index `x_i' theta`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::data::Dataset;
use crate::error::Result;
use crate::linalg::weighted_gram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IndexLoss {
    /// Negative Bernoulli log-likelihood with the logistic link.
    Logistic,
    /// Squared residual.
    Squared,
}

/// Numerically stable `log(1 + exp(t))`.
pub fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct IndexModel {
    pub(crate) loss: IndexLoss,
    /// Covariates stored transposed (`p x n`) so each covariate is contiguous.
    pub(crate) xt: Array2<f64>,
    pub(crate) y: Array1<f64>,
}

impl IndexModel {
    pub(crate) fn logit(data: &Dataset) -> Result<Self> {
        let y = data.require_binary_response()?.to_owned();
        Ok(Self {
            loss: IndexLoss::Logistic,
            xt: data.x().t().as_standard_layout().into_owned(),
            y,
        })
    }

    pub(crate) fn linear(data: &Dataset) -> Result<Self> {
        let y = data.require_response()?.to_owned();
        Ok(Self {
            loss: IndexLoss::Squared,
            xt: data.x().t().as_standard_layout().into_owned(),
            y,
        })
    }

    pub(crate) fn n(&self) -> usize {
        self.y.len()
    }

    pub(crate) fn p(&self) -> usize {
        self.xt.nrows()
    }

    pub(crate) fn xt(&self) -> ArrayView2<'_, f64> {
        self.xt.view()
    }

    pub(crate) fn eta(&self, theta: ArrayView1<f64>) -> Array1<f64> {
        let mut eta = Array1::<f64>::zeros(self.n());
        for (j, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                eta.scaled_add(t, &self.xt.row(j));
            }
        }
        eta
    }

    pub(crate) fn value_at_eta(&self, eta: ArrayView1<f64>) -> f64 {
        let n = self.n() as f64;
        match self.loss {
            IndexLoss::Logistic => {
                eta.iter()
                    .zip(self.y.iter())
                    .map(|(&e, &y)| log1p_exp(e) - y * e)
                    .sum::<f64>()
                    / n
            }
            IndexLoss::Squared => {
                eta.iter()
                    .zip(self.y.iter())
                    .map(|(&e, &y)| (y - e) * (y - e))
                    .sum::<f64>()
                    / n
            }
        }
    }

    /// Derivative of the per-observation loss with respect to the index.
    pub(crate) fn index_derivative(&self, eta: ArrayView1<f64>) -> Array1<f64> {
        match self.loss {
            IndexLoss::Logistic => eta
                .iter()
                .zip(self.y.iter())
                .map(|(&e, &y)| logistic(e) - y)
                .collect(),
            IndexLoss::Squared => eta
                .iter()
                .zip(self.y.iter())
                .map(|(&e, &y)| -2.0 * (y - e))
                .collect(),
        }
    }

    /// Second derivative of the per-observation loss with respect to the index.
    pub(crate) fn index_curvature(&self, eta: ArrayView1<f64>) -> Array1<f64> {
        match self.loss {
            IndexLoss::Logistic => eta
                .iter()
                .map(|&e| {
                    let p = logistic(e);
                    p * (1.0 - p)
                })
                .collect(),
            IndexLoss::Squared => Array1::from_elem(eta.len(), 2.0),
        }
    }

    pub(crate) fn value(&self, theta: ArrayView1<f64>) -> f64 {
        self.value_at_eta(self.eta(theta).view())
    }

    pub(crate) fn gradient(&self, theta: ArrayView1<f64>) -> Array1<f64> {
        let d = self.index_derivative(self.eta(theta).view());
        self.xt.dot(&d) / self.n() as f64
    }

    pub(crate) fn hessian(&self, theta: ArrayView1<f64>) -> Array2<f64> {
        let w = self.index_curvature(self.eta(theta).view());
        weighted_gram(self.xt.view(), w.view())
    }

    pub(crate) fn score_contributions(&self, theta: ArrayView1<f64>) -> Array2<f64> {
        let d = self.index_derivative(self.eta(theta).view());
        let mut s = self.xt.t().to_owned();
        for (mut row, &di) in s.axis_iter_mut(Axis(0)).zip(d.iter()) {
            row *= di;
        }
        s
    }

    /// Any fitted probability within `1e-12` of 0 or 1.
    pub(crate) fn saturated(&self, theta: ArrayView1<f64>) -> bool {
        match self.loss {
            IndexLoss::Logistic => self.eta(theta).iter().any(|&e| {
                let p = logistic(e);
                !(1e-12..=1.0 - 1e-12).contains(&p)
            }),
            IndexLoss::Squared => false,
        }
    }

    pub(crate) fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            loss: self.loss,
            xt: self.xt.select(Axis(0), cols),
            y: self.y.clone(),
        }
    }

    pub(crate) fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            loss: self.loss,
            xt: self.xt.select(Axis(1), rows),
            y: self.y.select(Axis(0), rows),
        }
    }
}
