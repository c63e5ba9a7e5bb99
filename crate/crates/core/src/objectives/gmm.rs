//! Generalized method of moments objectives, with a fixed weight matrix or the
//! continuously updated inverse moment covariance.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Cholesky};

/// Observation-level moment function `g(X_i, theta)`.
pub trait MomentFunction: Send + Sync + fmt::Debug {
    fn n_moments(&self) -> usize;

    fn dim(&self) -> usize;

    fn moment(&self, data: &Dataset, i: usize, theta: ArrayView1<f64>) -> Array1<f64>;

    /// `q x dim` derivative of `g(X_i, theta)`; `None` falls back to finite differences.
    fn jacobian(&self, _data: &Dataset, _i: usize, _theta: ArrayView1<f64>) -> Option<Array2<f64>> {
        None
    }
}

/// Linear instrumental-variable moments `g_i = x_i (y_i - x_i' theta)` using the
/// regressors as their own instruments.
#[derive(Debug, Clone, Copy)]
pub struct LinearMoments {
    pub p: usize,
}

impl MomentFunction for LinearMoments {
    fn n_moments(&self) -> usize {
        self.p
    }

    fn dim(&self) -> usize {
        self.p
    }

    fn moment(&self, data: &Dataset, i: usize, theta: ArrayView1<f64>) -> Array1<f64> {
        let x = data.x().row(i).to_owned();
        let y = data.y().expect("linear moments need a response")[i];
        let resid = y - x.dot(&theta);
        x * resid
    }

    fn jacobian(&self, data: &Dataset, i: usize, _theta: ArrayView1<f64>) -> Option<Array2<f64>> {
        let x = data.x().row(i).to_owned();
        let col = x.view().insert_axis(Axis(1));
        let row = x.view().insert_axis(Axis(0));
        Some(-col.dot(&row))
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Weighting {
    Fixed(Array2<f64>),
    ContinuouslyUpdated,
}

#[derive(Debug, Clone)]
pub struct Gmm {
    data: Arc<Dataset>,
    moments: Arc<dyn MomentFunction>,
    weighting: Weighting,
}

/// Relative ridge tolerated when factoring the CUE moment covariance.
const CUE_RIDGE: f64 = 1e-12;

impl Gmm {
    pub(crate) fn fixed(data: Arc<Dataset>, moments: Arc<dyn MomentFunction>, omega: Array2<f64>) -> Result<Self> {
        let q = moments.n_moments();
        if omega.nrows() != q || omega.ncols() != q {
            return Err(Error::InvalidInput(format!(
                "weight matrix is {}x{} but there are {q} moments",
                omega.nrows(),
                omega.ncols()
            )));
        }
        let asym = omega
            .indexed_iter()
            .map(|((i, j), v)| (v - omega[[j, i]]).abs())
            .fold(0.0, f64::max);
        if asym > 1e-10 * omega.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
            return Err(Error::InvalidInput("weight matrix is not symmetric".into()));
        }
        Cholesky::factor(omega.view()).map_err(|_| Error::InvalidInput("weight matrix is not positive definite".into()))?;
        Ok(Self {
            data,
            moments,
            weighting: Weighting::Fixed(omega),
        })
    }

    pub(crate) fn cue(data: Arc<Dataset>, moments: Arc<dyn MomentFunction>) -> Self {
        Self {
            data,
            moments,
            weighting: Weighting::ContinuouslyUpdated,
        }
    }

    pub fn is_cue(&self) -> bool {
        matches!(self.weighting, Weighting::ContinuouslyUpdated)
    }

    pub fn dim(&self) -> usize {
        self.moments.dim()
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// `n x q` matrix of moment contributions.
    pub fn moment_matrix(&self, theta: ArrayView1<f64>) -> Array2<f64> {
        let (n, q) = (self.data.n(), self.moments.n_moments());
        let mut out = Array2::<f64>::zeros((n, q));
        for i in 0..n {
            out.row_mut(i).assign(&self.moments.moment(&self.data, i, theta));
        }
        out
    }

    pub fn mean_moment(&self, theta: ArrayView1<f64>) -> Array1<f64> {
        self.moment_matrix(theta).mean_axis(Axis(0)).expect("non-empty sample")
    }

    /// Centered moment covariance `(1/n) sum g g' - gbar gbar'`.
    pub fn moment_covariance(&self, theta: ArrayView1<f64>) -> Array2<f64> {
        let g = self.moment_matrix(theta);
        let n = g.nrows() as f64;
        let gbar = g.mean_axis(Axis(0)).expect("non-empty sample");
        let mut omega = g.t().dot(&g) / n;
        let outer = gbar
            .view()
            .insert_axis(Axis(1))
            .dot(&gbar.view().insert_axis(Axis(0)));
        omega -= &outer;
        symmetrize(&mut omega);
        omega
    }

    /// Weight matrix in effect at `theta`.
    pub fn weight_matrix(&self, theta: ArrayView1<f64>) -> Result<Array2<f64>> {
        match &self.weighting {
            Weighting::Fixed(w) => Ok(w.clone()),
            Weighting::ContinuouslyUpdated => {
                let mut omega = self.moment_covariance(theta);
                let q = omega.nrows();
                let scale = (0..q).map(|j| omega[[j, j]].abs()).fold(0.0, f64::max);
                for j in 0..q {
                    omega[[j, j]] += CUE_RIDGE * scale;
                }
                let chol = Cholesky::factor(omega.view()).map_err(|_| Error::Singular {
                    context: format!("moment covariance is singular at theta = {theta}"),
                    condition: f64::INFINITY,
                })?;
                Ok(chol.inverse())
            }
        }
    }

    pub fn try_value(&self, theta: ArrayView1<f64>) -> Result<f64> {
        let gbar = self.mean_moment(theta);
        let w = self.weight_matrix(theta)?;
        Ok(gbar.dot(&w.dot(&gbar)))
    }

    pub fn value(&self, theta: ArrayView1<f64>) -> f64 {
        self.try_value(theta).unwrap_or(f64::NAN)
    }

    /// `q x dim` Jacobian of the mean moment.
    pub fn mean_jacobian(&self, theta: ArrayView1<f64>) -> Array2<f64> {
        let (n, q, k) = (self.data.n(), self.moments.n_moments(), self.dim());
        let mut acc = Array2::<f64>::zeros((q, k));
        let mut analytic = true;
        for i in 0..n {
            match self.moments.jacobian(&self.data, i, theta) {
                Some(j) => acc += &j,
                None => {
                    analytic = false;
                    break;
                }
            }
        }
        if analytic {
            return acc / n as f64;
        }
        let mut work = theta.to_owned();
        for j in 0..k {
            let step = 1e-6 * theta[j].abs().max(1.0);
            work[j] = theta[j] + step;
            let gp = self.mean_moment(work.view());
            work[j] = theta[j] - step;
            let gm = self.mean_moment(work.view());
            work[j] = theta[j];
            acc.column_mut(j).assign(&((gp - gm) / (2.0 * step)));
        }
        acc
    }

    pub fn gradient(&self, theta: ArrayView1<f64>) -> Array1<f64> {
        match &self.weighting {
            Weighting::Fixed(w) => {
                let jac = self.mean_jacobian(theta);
                let gbar = self.mean_moment(theta);
                jac.t().dot(&w.dot(&gbar)) * 2.0
            }
            Weighting::ContinuouslyUpdated => {
                let k = self.dim();
                let mut grad = Array1::<f64>::zeros(k);
                let mut work = theta.to_owned();
                for j in 0..k {
                    let step = 1e-6 * theta[j].abs().max(1.0);
                    work[j] = theta[j] + step;
                    let fp = self.value(work.view());
                    work[j] = theta[j] - step;
                    let fm = self.value(work.view());
                    work[j] = theta[j];
                    grad[j] = (fp - fm) / (2.0 * step);
                }
                grad
            }
        }
    }

    /// Gauss-Newton Hessian `2 J' W J`.
    pub fn hessian(&self, theta: ArrayView1<f64>) -> Array2<f64> {
        let jac = self.mean_jacobian(theta);
        let w = match self.weight_matrix(theta) {
            Ok(w) => w,
            Err(_) => return Array2::from_elem((self.dim(), self.dim()), f64::NAN),
        };
        let mut h = jac.t().dot(&w.dot(&jac)) * 2.0;
        symmetrize(&mut h);
        h
    }

    /// Per-observation gradient contributions `2 J' W g_i`; fixed weighting only.
    pub fn score_contributions(&self, theta: ArrayView1<f64>) -> Result<Array2<f64>> {
        match &self.weighting {
            Weighting::Fixed(w) => {
                let jac = self.mean_jacobian(theta);
                let g = self.moment_matrix(theta);
                let proj = jac.t().dot(w) * 2.0;
                Ok(g.dot(&proj.t()))
            }
            Weighting::ContinuouslyUpdated => Err(Error::Unsupported(
                "per-observation score for the continuously updated GMM objective".into(),
            )),
        }
    }

    pub(crate) fn with_data(&self, data: Arc<Dataset>) -> Self {
        Self {
            data,
            moments: Arc::clone(&self.moments),
            weighting: self.weighting.clone(),
        }
    }
}
