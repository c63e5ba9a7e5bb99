//! Binary logit with normally distributed random coefficients, estimated by
//! simulated maximum likelihood.
//!
//! Parameters are packed as `(beta, C)` where `beta` has `d` entries and `C`
//! is the lower-triangular `d x d` Cholesky factor of the coefficient
//! covariance, stored row by row (`C_00, C_10, C_11, C_20, ...`). The choice
//! probability is averaged over fixed draws `eps_r ~ N(0, I_d)`:
//!
//! ```text
//! g_i = (1/R) sum_r logistic((beta + C eps_r)' x_i)
//! ```
//!
//! The draws never change with `theta`, so the simulated objective is smooth.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::index::logistic;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::symmetrize;

pub const PROBABILITY_CLIP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrawScheme {
    /// Randomly shifted Halton points mapped through the normal quantile.
    QuasiMC,
    PseudoMC,
}

#[derive(Debug, Clone)]
pub struct RcLogit {
    data: Arc<Dataset>,
    y: Array1<f64>,
    /// `R x d` standard normal draws shared by every evaluation.
    draws: Arc<Array2<f64>>,
}

const PRIMES: [u64; 20] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

pub(crate) fn simulation_draws(n_draws: usize, d: usize, scheme: DrawScheme, seed: u64) -> Result<Array2<f64>> {
    if n_draws < 1 {
        return Err(Error::InvalidConfig("random-coefficient logit needs at least one draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Array2::<f64>::zeros((n_draws, d));
    match scheme {
        DrawScheme::PseudoMC => {
            for v in draws.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
        DrawScheme::QuasiMC => {
            if d > PRIMES.len() {
                return Err(Error::InvalidConfig(format!(
                    "quasi Monte Carlo draws support at most {} dimensions",
                    PRIMES.len()
                )));
            }
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            let shifts: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            for r in 0..n_draws {
                for k in 0..d {
                    let u = (radical_inverse(r as u64 + 1, PRIMES[k]) + shifts[k]).fract();
                    let u = u.clamp(1e-12, 1.0 - 1e-12);
                    draws[[r, k]] = normal.inverse_cdf(u);
                }
            }
        }
    }
    Ok(draws)
}

/// Number of packed parameters for `d` covariates.
pub fn rc_logit_dim(d: usize) -> usize {
    d + d * (d + 1) / 2
}

/// Position of `C_jk` (`k <= j`) in the packed parameter vector.
pub fn cholesky_index(d: usize, j: usize, k: usize) -> usize {
    assert!(k <= j && j < d);
    d + j * (j + 1) / 2 + k
}

impl RcLogit {
    pub(crate) fn new(data: Arc<Dataset>, draws: Arc<Array2<f64>>) -> Result<Self> {
        let y = data.require_binary_response()?.to_owned();
        Ok(Self { data, y, draws })
    }

    pub fn d(&self) -> usize {
        self.data.p()
    }

    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    pub fn dim(&self) -> usize {
        rc_logit_dim(self.d())
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    fn unpack(&self, theta: ArrayView1<f64>) -> (Array1<f64>, Array2<f64>) {
        let d = self.d();
        let beta = theta.slice(ndarray::s![..d]).to_owned();
        let mut c = Array2::<f64>::zeros((d, d));
        for j in 0..d {
            for k in 0..=j {
                c[[j, k]] = theta[cholesky_index(d, j, k)];
            }
        }
        (beta, c)
    }

    /// Simulated probabilities `g_i`, plus `A_i = mean_r s_ir` and
    /// `B_ik = mean_r s_ir eps_rk` with `s = pi (1 - pi)`.
    fn simulate(&self, theta: ArrayView1<f64>, with_derivatives: bool) -> (Array1<f64>, Array1<f64>, Array2<f64>) {
        let x = self.data.x();
        let (n, d) = (x.nrows(), self.d());
        let (beta, c) = self.unpack(theta);
        let r_count = self.n_draws() as f64;
        let mut g = Array1::<f64>::zeros(n);
        let mut a = Array1::<f64>::zeros(if with_derivatives { n } else { 0 });
        let mut b = Array2::<f64>::zeros(if with_derivatives { (n, d) } else { (0, d) });
        for eps in self.draws.axis_iter(Axis(0)) {
            let coef = &beta + &c.dot(&eps);
            let eta = x.dot(&coef);
            for i in 0..n {
                let p = logistic(eta[i]);
                g[i] += p;
                if with_derivatives {
                    let s = p * (1.0 - p);
                    a[i] += s;
                    for k in 0..d {
                        b[[i, k]] += s * eps[k];
                    }
                }
            }
        }
        g /= r_count;
        if with_derivatives {
            a /= r_count;
            b /= r_count;
        }
        (g, a, b)
    }

    pub fn value(&self, theta: ArrayView1<f64>) -> f64 {
        let (g, _, _) = self.simulate(theta, false);
        let n = self.y.len() as f64;
        g.iter()
            .zip(self.y.iter())
            .map(|(&gi, &y)| {
                let gi = gi.clamp(PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP);
                -(y * gi.ln() + (1.0 - y) * (1.0 - gi).ln())
            })
            .sum::<f64>()
            / n
    }

    /// Per-observation gradients of the loss, `n x dim`.
    pub fn score_contributions(&self, theta: ArrayView1<f64>) -> Array2<f64> {
        let x = self.data.x();
        let (n, d) = (x.nrows(), self.d());
        let (g, a, b) = self.simulate(theta, true);
        let mut out = Array2::<f64>::zeros((n, self.dim()));
        for i in 0..n {
            let gi = g[i];
            // the clamp is flat outside [clip, 1 - clip]
            if !(PROBABILITY_CLIP..=1.0 - PROBABILITY_CLIP).contains(&gi) {
                continue;
            }
            let y = self.y[i];
            let dl = -(y / gi - (1.0 - y) / (1.0 - gi));
            for j in 0..d {
                out[[i, j]] = dl * a[i] * x[[i, j]];
                for k in 0..=j {
                    out[[i, cholesky_index(d, j, k)]] = dl * x[[i, j]] * b[[i, k]];
                }
            }
        }
        out
    }

    pub fn gradient(&self, theta: ArrayView1<f64>) -> Array1<f64> {
        let s = self.score_contributions(theta);
        s.mean_axis(Axis(0)).expect("non-empty sample")
    }

    /// Central differences of the analytic gradient, symmetrized.
    pub fn hessian(&self, theta: ArrayView1<f64>) -> Array2<f64> {
        let k = self.dim();
        let mut h = Array2::<f64>::zeros((k, k));
        let mut work = theta.to_owned();
        for j in 0..k {
            let step = 1e-5 * theta[j].abs().max(1.0);
            work[j] = theta[j] + step;
            let gp = self.gradient(work.view());
            work[j] = theta[j] - step;
            let gm = self.gradient(work.view());
            work[j] = theta[j];
            let col = (gp - gm) / (2.0 * step);
            h.column_mut(j).assign(&col);
        }
        symmetrize(&mut h);
        h
    }

    pub(crate) fn with_data(&self, data: Arc<Dataset>) -> Result<Self> {
        Self::new(data, Arc::clone(&self.draws))
    }
}
