use super::*;
use crate::data::Dataset;
use crate::linalg::Cholesky;
use crate::objectives::{linear_ls_objective, logit_objective, logistic, rc_logit_objective, DrawScheme};
use approx::assert_relative_eq;
use ndarray::{array, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn quadratic_1d(z: f64) -> ObjectiveModel {
    // (y - x t)^2 with x = 1/sqrt(2), y = z/sqrt(2) is 0.5 (t - z)^2
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let data = Dataset::new(array![[r]], Some(array![z * r])).unwrap();
    linear_ls_objective(&data).unwrap()
}

fn grid_argmin_1d(z: f64, cfg: &PenaltyConfig) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=200_000 {
        let t = -10.0 + 1e-4 * k as f64;
        let f = 0.5 * (t - z) * (t - z) + crate::penalty::scad_value(t.abs(), cfg);
        if f < best.0 {
            best = (f, t);
        }
    }
    best.1
}

fn random_ls(seed: u64, n: usize, p: usize, signal: &[f64]) -> (Dataset, ObjectiveModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
    let mut beta = Array1::<f64>::zeros(p);
    for (j, b) in signal.iter().enumerate() {
        beta[j] = *b;
    }
    let y = x.dot(&beta) + Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
    let data = Dataset::new(x, Some(y)).unwrap();
    let m = linear_ls_objective(&data).unwrap();
    (data, m)
}

fn random_logit(seed: u64, n: usize, p: usize) -> (Dataset, ObjectiveModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
    let mut beta = Array1::<f64>::zeros(p);
    beta[0] = 1.5;
    beta[1] = -1.0;
    let y = x.dot(&beta).mapv(|e| if rng.gen::<f64>() < logistic(e) { 1.0 } else { 0.0 });
    let data = Dataset::new(x, Some(y)).unwrap();
    let m = logit_objective(&data).unwrap();
    (data, m)
}

fn ols(data: &Dataset) -> Array1<f64> {
    let x = data.x();
    Cholesky::factor(x.t().dot(&x).view()).unwrap().solve(x.t().dot(&data.y().unwrap()).view())
}

fn newton(model: &ObjectiveModel) -> Array1<f64> {
    let mut theta = Array1::<f64>::zeros(model.dim());
    for _ in 0..50 {
        let step = Cholesky::factor(model.hessian(theta.view()).view())
            .unwrap()
            .solve(model.gradient(theta.view()).view());
        theta -= &step;
        if sup_norm(step.view()) < 1e-13 {
            break;
        }
    }
    theta
}

/// Columns with `X'X / n = I` via Gram-Schmidt.
fn orthonormal_design(seed: u64, n: usize, p: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
    for j in 0..p {
        for k in 0..j {
            let proj = x.column(j).dot(&x.column(k));
            let col_k = x.column(k).to_owned();
            x.column_mut(j).scaled_add(-proj / n as f64, &col_k);
        }
        let norm = x.column(j).dot(&x.column(j)).sqrt();
        x.column_mut(j).mapv_inplace(|v| v / norm * (n as f64).sqrt());
    }
    x
}

#[test]
fn scad_unbiased_for_large_signal() {
    let cfg = PenaltyConfig::new(3.7, 1.0).unwrap();
    let fit = lla_fit(&quadratic_1d(5.0), &cfg, &SolverOptions::default()).unwrap();
    assert!(fit.converged);
    assert_relative_eq!(fit.theta_tilde[0], 5.0, epsilon = 1e-9);
    assert_relative_eq!(fit.theta_tilde[0], grid_argmin_1d(5.0, &cfg), epsilon = 1e-4);
}

#[test]
fn scad_kills_small_signal() {
    let cfg = PenaltyConfig::new(3.7, 1.0).unwrap();
    let fit = lla_fit(&quadratic_1d(0.6), &cfg, &SolverOptions::default()).unwrap();
    assert_eq!(fit.theta_tilde[0], 0.0);
    assert_eq!(grid_argmin_1d(0.6, &cfg).abs(), 0.0);
}

#[test]
fn zero_penalty_gives_unpenalized_minimizer() {
    let cfg = PenaltyConfig::new(3.7, 0.0).unwrap();
    let (data, m) = random_ls(2, 80, 5, &[1.0, -2.0]);
    let fit = lla_fit(&m, &cfg, &SolverOptions::default()).unwrap();
    let exact = ols(&data);
    assert!(sup_norm((&fit.theta_tilde - &exact).view()) < 1e-6);

    let (_, lm) = random_logit(3, 200, 4);
    let fit = lla_fit(&lm, &cfg, &SolverOptions::default()).unwrap();
    let exact = newton(&lm);
    assert!(fit.converged);
    assert!(sup_norm((&fit.theta_tilde - &exact).view()) < 1e-6);
}

#[test]
fn orthonormal_design_soft_threshold() {
    let n = 40;
    let x = orthonormal_design(4, n, 3);
    let z = array![2.0, -0.3, 0.8];
    let y = x.dot(&z);
    let data = Dataset::new(x, Some(y)).unwrap();
    let m = linear_ls_objective(&data).unwrap();
    let w = array![1.0, 0.5, 0.4];
    let sub = weighted_l1_subproblem(&m, w.view(), Array1::zeros(3).view(), &SolverOptions::default()).unwrap();
    // the squared-error objective is not halved, so the effective threshold is w / 2
    let closed: Array1<f64> = z.iter().zip(w.iter()).map(|(&zj, &wj)| soft_threshold(zj, wj / 2.0)).collect();
    assert_relative_eq!(closed[0], 1.5);
    assert!(sup_norm((&sub.theta - &closed).view()) < 1e-10);
    assert!(check_kkt(&m, closed.view(), w.view()) <= 1e-10);
}

#[test]
fn extreme_weights() {
    let (data, m) = random_ls(5, 60, 4, &[2.0, 1.0]);
    let opts = SolverOptions {
        cd_tolerance: 1e-12,
        ..SolverOptions::default()
    };
    let free = weighted_l1_subproblem(&m, Array1::zeros(4).view(), Array1::zeros(4).view(), &opts).unwrap();
    assert!(sup_norm((&free.theta - &ols(&data)).view()) < 1e-9);
    let huge = Array1::from_elem(4, 1e10);
    let dead = weighted_l1_subproblem(&m, huge.view(), Array1::ones(4).view(), &opts).unwrap();
    assert!(dead.theta.iter().all(|&v| v == 0.0));
}

#[test]
fn kkt_examples() {
    let (data, m) = random_ls(6, 60, 3, &[3.0]);
    let zero_w = Array1::zeros(3);
    assert!(check_kkt(&m, ols(&data).view(), zero_w.view()) < 1e-8);
    let small = Array1::from_elem(3, 0.01);
    assert!(check_kkt(&m, Array1::zeros(3).view(), small.view()) > 0.0);
}

#[test]
fn active_set_matches_naive_cycling() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for inst in 0..50 {
        let (_, m) = random_ls(100 + inst, 100, 30, &[2.0, -1.5, 1.0, 0.5]);
        let index = m.as_index().unwrap();
        let w = Array1::from_shape_fn(30, |_| 0.05 + 0.3 * rng.gen::<f64>());
        let run = |active: bool| {
            let n = index.n() as f64;
            let u = index.y.clone() * (2.0 / n);
            let d = Array1::from_elem(index.n(), 2.0 / n);
            let quad = IndexQuadratic::new(index.xt(), d, u, Array1::zeros(30));
            let mut state = CdState::new(quad, w.view(), 1e-13, 100_000);
            let out = if active { active_set_cycle(&mut state, 50) } else { state.naive_cycle() };
            assert!(out.converged);
            state.model.into_theta()
        };
        let (a, b) = (run(true), run(false));
        assert!(sup_norm((&a - &b).view()) < 1e-8, "instance {inst}");
    }
}

#[test]
fn optimal_start_needs_one_pass() {
    let (_, m) = random_ls(8, 100, 10, &[2.0, -1.0]);
    let w = Array1::from_elem(10, 0.1);
    let opts = SolverOptions {
        cd_tolerance: 1e-12,
        ..SolverOptions::default()
    };
    let first = weighted_l1_subproblem(&m, w.view(), Array1::zeros(10).view(), &opts).unwrap();
    let again = weighted_l1_subproblem(&m, w.view(), first.theta.view(), &opts).unwrap();
    assert!(again.passes <= 1);
    assert!(sup_norm((&again.theta - &first.theta).view()) < 1e-12);
}

#[test]
fn excluded_coordinate_reenters() {
    let (_, m) = random_ls(9, 200, 6, &[0.0, 0.0, 0.0, 0.0, 0.0, 3.0]);
    let w = Array1::from_elem(6, 0.05);
    let mut start = Array1::<f64>::from_elem(6, 0.1);
    start[5] = 0.0;
    let index = m.as_index().unwrap();
    let n = index.n() as f64;
    let u = (&index.y - &index.eta(start.view())) * (2.0 / n);
    let quad = IndexQuadratic::new(index.xt(), Array1::from_elem(200, 2.0 / n), u, start);
    let mut state = CdState::new(quad, w.view(), 1e-10, 1000);
    assert!(active_set_cycle(&mut state, 50).converged);
    let theta = state.model.into_theta();
    assert!(theta[5] > 2.0);
    assert!(check_kkt(&m, theta.view(), w.view()) < 1e-8);
}

#[test]
fn coordinate_descent_decreases_objective() {
    let (_, m) = random_ls(10, 50, 8, &[1.0, 1.0, -1.0]);
    let w = Array1::from_elem(8, 0.2);
    let f = |t: ArrayView1<f64>| m.value(t) + weighted_l1(t, w.view());
    let index = m.as_index().unwrap();
    let u = index.y.clone() * (2.0 / 50.0);
    let quad = IndexQuadratic::new(index.xt(), Array1::from_elem(50, 2.0 / 50.0), u, Array1::zeros(8));
    let mut state = CdState::new(quad, w.view(), 1e-12, 1000);
    let mut last = f(state.model.theta());
    for _ in 0..30 {
        for j in 0..8 {
            state.update(j);
            let now = f(state.model.theta());
            assert!(now <= last + 1e-10);
            last = now;
        }
    }
}

#[test]
fn lla_objective_nonincreasing() {
    let cfg = PenaltyConfig::new(3.7, 0.15).unwrap();
    let (_, m) = random_ls(11, 120, 20, &[1.0, -0.6, 0.3, 0.2]);
    let fit = lla_fit(&m, &cfg, &SolverOptions::default()).unwrap();
    // coordinates inside the taper make the outer iteration contract only linearly
    assert!(fit.kkt_max_violation <= 1e-5);
    assert!(fit.lla_iters_used <= 10);
    for pair in fit.objective_trace.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-10);
    }
    let cfg = PenaltyConfig::new(3.7, 0.05).unwrap();
    let (_, lm) = random_logit(12, 300, 15);
    let fit = lla_fit(&lm, &cfg, &SolverOptions::default()).unwrap();
    assert!(fit.converged);
    assert!(fit.kkt_max_violation <= 1e-5);
    for pair in fit.objective_trace.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-10);
    }
    assert_eq!(fit.theta_tilde[0].signum(), 1.0);
}

#[test]
fn permutation_equivariance() {
    let cfg = PenaltyConfig::new(3.7, 0.1).unwrap();
    let (data, m) = random_logit(13, 250, 8);
    let perm = vec![3, 7, 0, 5, 1, 6, 2, 4];
    let permuted = Dataset::new(data.x().select(Axis(1), &perm), Some(data.y().unwrap().to_owned())).unwrap();
    let pm = logit_objective(&permuted).unwrap();
    let a = lla_fit(&m, &cfg, &SolverOptions::default()).unwrap().theta_tilde;
    let b = lla_fit(&pm, &cfg, &SolverOptions::default()).unwrap().theta_tilde;
    for (k, &j) in perm.iter().enumerate() {
        assert!((b[k] - a[j]).abs() < 1e-8);
    }
}

#[test]
fn generic_objectives_reach_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let x = Array2::from_shape_fn((300, 2), |_| rng.sample::<f64, _>(StandardNormal));
    let y = x.dot(&array![1.0, 0.0]).mapv(|e| if rng.gen::<f64>() < logistic(e) { 1.0 } else { 0.0 });
    let data = Dataset::new(x, Some(y)).unwrap();
    let m = rc_logit_objective(&data, 32, DrawScheme::QuasiMC, 3).unwrap();
    let w = Array1::from_elem(m.dim(), 0.02);
    let sub = weighted_l1_subproblem(&m, w.view(), Array1::zeros(m.dim()).view(), &SolverOptions::default()).unwrap();
    assert!(sub.kkt_max_violation < 1e-5, "{}", sub.kkt_max_violation);
    assert!(sub.theta[0] > 0.3);
}

#[test]
fn floors_flat_curvature() {
    let x = array![[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0]];
    let data = Dataset::new(x, Some(array![1.0, 2.0, 0.5])).unwrap();
    let m = linear_ls_objective(&data).unwrap();
    let sub =
        weighted_l1_subproblem(&m, array![0.0, 0.0].view(), Array1::zeros(2).view(), &SolverOptions::default()).unwrap();
    assert!(sub.curvature_floored);
    assert_eq!(sub.theta[1], 0.0);
}

#[test]
fn initializers() {
    let cfg = PenaltyConfig::new(3.7, 0.1).unwrap();
    let (_, m) = random_logit(15, 200, 5);
    let ridge = lla_fit(
        &m,
        &cfg,
        &SolverOptions {
            initializer: Initializer::Ridge,
            ..SolverOptions::default()
        },
    )
    .unwrap();
    assert!(ridge.converged);
    let bad = SolverOptions {
        initializer: Initializer::Warm(vec![0.0; 3]),
        ..SolverOptions::default()
    };
    assert!(lla_fit(&m, &cfg, &bad).is_err());
    let (_, lm) = random_ls(16, 10, 2, &[1.0]);
    let blowup = SolverOptions {
        initializer: Initializer::Warm(vec![1e300, 1e300]),
        ..SolverOptions::default()
    };
    assert!(matches!(lla_fit(&lm, &cfg, &blowup), Err(Error::NonFinite { .. })));
}

#[test]
fn two_dimensional_grid_oracle() {
    // convex instance: the least-squares curvature dominates the SCAD concavity
    let cfg = PenaltyConfig::new(3.7, 0.3).unwrap();
    let (data, m) = random_ls(17, 200, 2, &[0.7, 0.25]);
    let fit = lla_fit(&m, &cfg, &SolverOptions::default()).unwrap();
    let x = data.x();
    let y = data.y().unwrap();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let grid: Vec<f64> = (0..=1500).map(|k| -1.5 + 2e-3 * k as f64).collect();
    let (xtx, xty, yy) = (x.t().dot(&x) / 200.0, x.t().dot(&y) / 200.0, y.dot(&y) / 200.0);
    for &a in &grid {
        for &b in &grid {
            let q = yy - 2.0 * (a * xty[0] + b * xty[1])
                + a * a * xtx[[0, 0]]
                + 2.0 * a * b * xtx[[0, 1]]
                + b * b * xtx[[1, 1]];
            let f = q + crate::penalty::scad_value(a.abs(), &cfg) + crate::penalty::scad_value(b.abs(), &cfg);
            if f < best.0 {
                best = (f, a, b);
            }
        }
    }
    assert!((fit.theta_tilde[0] - best.1).abs() < 5e-3);
    assert!((fit.theta_tilde[1] - best.2).abs() < 5e-3);
}
