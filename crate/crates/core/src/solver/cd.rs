//! Coordinate descent for weighted-L1 penalized quadratics.
//!
//! Each coordinate model exposes, for the current point, the one-dimensional
//! restriction `0.5 A_jj t^2 - c_j t + w_j |t|` whose minimizer is
//! `soft(c_j, w_j) / A_jj` with `c_j = A_jj theta_j - d_j` and `d_j` the partial
//! derivative of the smooth part.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::linalg::cholesky_with_ridge;

/// Curvatures below this are replaced by it (and the fit is flagged).
pub const CURVATURE_FLOOR: f64 = 1e-10;

/// `sign(z) * max(|z| - w, 0)`.
pub fn soft_threshold(z: f64, w: f64) -> f64 {
    if z > w {
        z - w
    } else if z < -w {
        z + w
    } else {
        0.0
    }
}

/// Smooth quadratic part of a coordinate descent problem.
pub trait CoordinateModel {
    fn dim(&self) -> usize;

    fn theta(&self) -> ArrayView1<'_, f64>;

    /// Diagonal curvature `A_jj` (already floored).
    fn curvature(&self, j: usize) -> f64;

    /// Partial derivative of the smooth part at the current point.
    fn partial(&self, j: usize) -> f64;

    /// Move coordinate `j` by `delta`, keeping caches in sync.
    fn shift(&mut self, j: usize, delta: f64);

    /// Curvature block over `coords`, with the floored diagonal.
    fn block(&self, coords: &[usize]) -> Array2<f64>;
}

fn floored_curvature(raw: f64, floored: &mut bool) -> f64 {
    if raw >= CURVATURE_FLOOR {
        raw
    } else {
        *floored = true;
        CURVATURE_FLOOR
    }
}

/// Quadratic in the linear index: `sum_i 0.5 d_i (z_i - x_i' theta)^2`.
///
/// Tracks `u_i = d_i (z_i - x_i' theta)` so the working response is never
/// formed explicitly (it blows up when a logit weight vanishes).
#[derive(Debug)]
pub struct IndexQuadratic<'a> {
    xt: ArrayView2<'a, f64>,
    d: Array1<f64>,
    u: Array1<f64>,
    theta: Array1<f64>,
    diag: Array1<f64>,
    pub floored: bool,
}

impl<'a> IndexQuadratic<'a> {
    /// `xt` is `p x n`, `d` the per-observation curvature and `u` the initial
    /// weighted working residual at `theta`.
    pub fn new(xt: ArrayView2<'a, f64>, d: Array1<f64>, u: Array1<f64>, theta: Array1<f64>) -> Self {
        let mut floored = false;
        let diag = xt
            .rows()
            .into_iter()
            .map(|x| {
                let raw: f64 = match (x.as_slice(), d.as_slice()) {
                    (Some(x), Some(d)) => x.iter().zip(d).map(|(xi, di)| di * xi * xi).sum(),
                    _ => x.iter().zip(d.iter()).map(|(xi, di)| di * xi * xi).sum(),
                };
                floored_curvature(raw, &mut floored)
            })
            .collect();
        Self {
            xt,
            d,
            u,
            theta,
            diag,
            floored,
        }
    }

    pub fn into_theta(self) -> Array1<f64> {
        self.theta
    }
}

impl CoordinateModel for IndexQuadratic<'_> {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn theta(&self) -> ArrayView1<'_, f64> {
        self.theta.view()
    }

    fn curvature(&self, j: usize) -> f64 {
        self.diag[j]
    }

    fn partial(&self, j: usize) -> f64 {
        -self.xt.row(j).dot(&self.u)
    }

    fn shift(&mut self, j: usize, delta: f64) {
        self.theta[j] += delta;
        let row = self.xt.row(j);
        match (self.u.as_slice_mut(), row.as_slice(), self.d.as_slice()) {
            (Some(u), Some(x), Some(d)) => {
                for ((u, x), d) in u.iter_mut().zip(x).zip(d) {
                    *u -= delta * d * x;
                }
            }
            _ => {
                let dx = &row * &self.d;
                self.u.scaled_add(-delta, &dx);
            }
        }
    }

    fn block(&self, coords: &[usize]) -> Array2<f64> {
        let n = self.d.len();
        let mut xa = Array2::<f64>::zeros((coords.len(), n));
        let mut scaled = Array2::<f64>::zeros((coords.len(), n));
        for (k, &j) in coords.iter().enumerate() {
            let x = self.xt.row(j);
            for ((a, s), (x, d)) in xa.row_mut(k).iter_mut().zip(scaled.row_mut(k).iter_mut()).zip(x.iter().zip(&self.d)) {
                *a = *x;
                *s = x * d;
            }
        }
        let mut h = scaled.dot(&xa.t());
        for (k, &j) in coords.iter().enumerate() {
            h[[k, k]] = self.diag[j];
        }
        h
    }
}

/// Quadratic `g'(theta - c) + 0.5 (theta - c)' H (theta - c)` with a dense `H`.
#[derive(Debug)]
pub struct DenseQuadratic {
    h: ndarray::Array2<f64>,
    grad: Array1<f64>,
    theta: Array1<f64>,
    diag: Array1<f64>,
    pub floored: bool,
}

impl DenseQuadratic {
    /// Expansion at `center` with gradient `g` and Hessian `h`; coordinate
    /// descent starts from `center`.
    pub fn new(h: ndarray::Array2<f64>, g: Array1<f64>, center: Array1<f64>) -> Self {
        let mut floored = false;
        let diag = h.diag().iter().map(|&v| floored_curvature(v, &mut floored)).collect();
        Self {
            h,
            grad: g,
            theta: center,
            diag,
            floored,
        }
    }

    pub fn into_theta(self) -> Array1<f64> {
        self.theta
    }
}

impl CoordinateModel for DenseQuadratic {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn theta(&self) -> ArrayView1<'_, f64> {
        self.theta.view()
    }

    fn curvature(&self, j: usize) -> f64 {
        self.diag[j]
    }

    fn partial(&self, j: usize) -> f64 {
        self.grad[j]
    }

    fn shift(&mut self, j: usize, delta: f64) {
        self.theta[j] += delta;
        self.grad.scaled_add(delta, &self.h.column(j));
    }

    fn block(&self, coords: &[usize]) -> Array2<f64> {
        let mut h = self.h.select(Axis(0), coords).select(Axis(1), coords);
        for (k, &j) in coords.iter().enumerate() {
            h[[k, k]] = self.diag[j];
        }
        h
    }
}

/// Active passes between sign-fixed Newton steps on the active block.
const NEWTON_AFTER: usize = 5;

/// Coordinate descent bookkeeping around a [`CoordinateModel`].
#[derive(Debug)]
pub struct CdState<'w, M> {
    pub model: M,
    weights: ArrayView1<'w, f64>,
    tolerance: f64,
    max_passes: usize,
    pub passes: usize,
    block_cache: Option<(Vec<usize>, Array2<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleOutcome {
    pub passes: usize,
    pub converged: bool,
}

impl<'w, M: CoordinateModel> CdState<'w, M> {
    pub fn new(model: M, weights: ArrayView1<'w, f64>, tolerance: f64, max_passes: usize) -> Self {
        assert_eq!(model.dim(), weights.len());
        Self {
            model,
            weights,
            tolerance,
            max_passes,
            passes: 0,
            block_cache: None,
        }
    }

    /// Exact minimization along coordinate `j`; returns the absolute change.
    pub fn update(&mut self, j: usize) -> f64 {
        let a = self.model.curvature(j);
        let old = self.model.theta()[j];
        let c = a * old - self.model.partial(j);
        let new = soft_threshold(c, self.weights[j]) / a;
        let delta = new - old;
        if delta != 0.0 {
            self.model.shift(j, delta);
        }
        delta.abs()
    }

    pub fn full_pass(&mut self) -> f64 {
        self.passes += 1;
        (0..self.model.dim()).fold(0.0, |m, j| m.max(self.update(j)))
    }

    fn pass_over(&mut self, coords: &[usize]) -> f64 {
        self.passes += 1;
        coords.iter().fold(0.0, |m, &j| m.max(self.update(j)))
    }

    fn active(&self) -> Vec<usize> {
        let theta = self.model.theta();
        (0..theta.len()).filter(|&j| theta[j] != 0.0).collect()
    }

    /// Sign-fixed Newton steps on the block over `coords`. A step that would
    /// flip a sign is cut where the first coordinate reaches zero; that
    /// coordinate leaves the block and the reduced block is solved again.
    /// Returns whether any step was taken.
    pub fn block_newton(&mut self, coords: &[usize]) -> bool {
        if coords.is_empty() || coords.iter().any(|&j| self.model.theta()[j] == 0.0) {
            return false;
        }
        let full = match self.block_cache.take() {
            Some((c, h)) if c == coords => h,
            _ => self.model.block(coords),
        };
        let mut keep: Vec<usize> = (0..coords.len()).collect();
        let mut moved = false;
        while !keep.is_empty() {
            let theta = self.model.theta();
            let idx: Vec<usize> = keep.iter().map(|&k| coords[k]).collect();
            let signs: Vec<f64> = idx.iter().map(|&j| theta[j].signum()).collect();
            let rhs: Array1<f64> = idx
                .iter()
                .zip(&signs)
                .map(|(&j, s)| self.model.partial(j) + self.weights[j] * s)
                .collect();
            let h = full.select(Axis(0), &keep).select(Axis(1), &keep);
            let Ok((chol, _)) = cholesky_with_ridge(h.view()) else {
                break;
            };
            let step = chol.solve(rhs.view());
            if step.iter().any(|d| !d.is_finite()) {
                break;
            }
            let mut t = 1.0f64;
            let mut blocking = None;
            for (k, (&j, d)) in idx.iter().zip(step.iter()).enumerate() {
                if (theta[j] - d) * signs[k] <= 0.0 {
                    let tj = theta[j] / d;
                    if tj < t {
                        t = tj;
                        blocking = Some(k);
                    }
                }
            }
            for (k, (&j, d)) in idx.iter().zip(step.iter()).enumerate() {
                let delta = if Some(k) == blocking { -self.model.theta()[j] } else { -t * d };
                if delta != 0.0 {
                    self.model.shift(j, delta);
                    moved = true;
                }
            }
            match blocking {
                Some(k) => {
                    keep.remove(k);
                }
                None => break,
            }
        }
        self.block_cache = Some((coords.to_vec(), full));
        moved
    }

    fn budget_left(&self) -> bool {
        self.passes < self.max_passes
    }

    /// Full passes only, until one changes nothing beyond tolerance.
    pub fn naive_cycle(&mut self) -> CycleOutcome {
        let start = self.passes;
        while self.budget_left() {
            if self.full_pass() < self.tolerance {
                return CycleOutcome {
                    passes: self.passes - start,
                    converged: true,
                };
            }
        }
        CycleOutcome {
            passes: self.passes - start,
            converged: false,
        }
    }
}

/// Alternate between sweeps over the nonzero coordinates and full sweeps.
///
/// A full pass comes first and after every `full_pass_interval` active
/// passes (or earlier, once the active set has settled). Coordinates that
/// violate their optimality condition move during a full pass and thereby
/// join the active set. After each full pass a sign-fixed Newton step on the
/// active block is taken, and again every few stalled active sweeps. Returns once a full pass changes nothing beyond the
/// tolerance.
pub fn active_set_cycle<M: CoordinateModel>(state: &mut CdState<'_, M>, full_pass_interval: usize) -> CycleOutcome {
    let start = state.passes;
    while state.budget_left() {
        if state.full_pass() < state.tolerance {
            return CycleOutcome {
                passes: state.passes - start,
                converged: true,
            };
        }
        let active = state.active();
        if state.block_newton(&active) {
            let active = state.active();
            if !state.budget_left() || state.pass_over(&active) < state.tolerance {
                continue;
            }
        }
        for k in 0..full_pass_interval {
            if !state.budget_left() || state.pass_over(&active) < state.tolerance {
                break;
            }
            if (k + 1) % NEWTON_AFTER == 0 && state.block_newton(&state.active()) {
                break;
            }
        }
    }
    CycleOutcome {
        passes: state.passes - start,
        converged: false,
    }
}
