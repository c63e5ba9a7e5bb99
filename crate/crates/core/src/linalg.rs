//! Small dense helpers for symmetric positive definite systems.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Pivots below this fraction of the original diagonal count as zero.
const PIVOT_TOLERANCE: f64 = 1e-14;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn factor(a: ArrayView2<f64>) -> Result<Self> {
        let k = a.nrows();
        assert_eq!(k, a.ncols(), "Cholesky needs a square matrix");
        let mut l = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let (ri, rj) = (&l[i * k..i * k + j], &l[j * k..j * k + j]);
                let dot: f64 = ri.iter().zip(rj).map(|(u, v)| u * v).sum();
                let s = a[[i, j]] - dot;
                if i == j {
                    if !(s > PIVOT_TOLERANCE * a[[i, i]].abs()) || !s.is_finite() {
                        return Err(Error::Singular {
                            context: format!("Cholesky pivot {j} is {s:.3e}"),
                            condition: f64::INFINITY,
                        });
                    }
                    l[i * k + i] = s.sqrt();
                } else {
                    l[i * k + j] = s / l[j * k + j];
                }
            }
        }
        Ok(Self {
            l: Array2::from_shape_vec((k, k), l).expect("square buffer"),
        })
    }

    pub fn lower(&self) -> ArrayView2<'_, f64> {
        self.l.view()
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Squared ratio of the extreme pivots; a cheap lower bound on the
    /// 2-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        let diag = self.l.diag();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        (max / min).powi(2)
    }

    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let k = self.dim();
        let l = &self.l;
        let mut z = b.to_owned();
        for i in 0..k {
            let row = l.row(i);
            let mut s = z[i];
            for m in 0..i {
                s -= row[m] * z[m];
            }
            z[i] = s / row[i];
        }
        for i in (0..k).rev() {
            let mut s = z[i];
            for m in (i + 1)..k {
                s -= l[[m, i]] * z[m];
            }
            z[i] = s / l[[i, i]];
        }
        z
    }

    pub fn inverse(&self) -> Array2<f64> {
        let k = self.dim();
        // invert L, then A^{-1} = L^{-T} L^{-1}
        let mut linv = Array2::<f64>::zeros((k, k));
        for j in 0..k {
            linv[[j, j]] = 1.0 / self.l[[j, j]];
            for i in (j + 1)..k {
                let mut s = 0.0;
                for m in j..i {
                    s -= self.l[[i, m]] * linv[[m, j]];
                }
                linv[[i, j]] = s / self.l[[i, i]];
            }
        }
        linv.t().dot(&linv)
    }
}

/// Factor `a`, adding a growing multiple of the identity if needed.
/// Returns the factor and the ridge that was added.
pub fn cholesky_with_ridge(a: ArrayView2<f64>) -> Result<(Cholesky, f64)> {
    if let Ok(c) = Cholesky::factor(a) {
        return Ok((c, 0.0));
    }
    let k = a.nrows();
    let scale = (0..k).map(|j| a[[j, j]].abs()).fold(0.0, f64::max).max(1e-12);
    let mut ridge = 1e-10 * scale;
    for _ in 0..30 {
        let mut shifted = a.to_owned();
        for j in 0..k {
            shifted[[j, j]] += ridge;
        }
        if let Ok(c) = Cholesky::factor(shifted.view()) {
            return Ok((c, ridge));
        }
        ridge *= 10.0;
    }
    Err(Error::Singular {
        context: "matrix could not be regularized".into(),
        condition: f64::INFINITY,
    })
}

/// `X' diag(w) X / n` for `xt` holding `X'` (rows are covariates).
pub fn weighted_gram(xt: ArrayView2<f64>, w: ArrayView1<f64>) -> Array2<f64> {
    let n = xt.ncols() as f64;
    let mut scaled = xt.to_owned();
    for (mut col, &wi) in scaled.axis_iter_mut(Axis(1)).zip(w.iter()) {
        col *= wi.max(0.0).sqrt();
    }
    let mut g = scaled.dot(&scaled.t());
    g /= n;
    g
}

pub fn symmetrize(a: &mut Array2<f64>) {
    let k = a.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let m = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = m;
            a[[j, i]] = m;
        }
    }
}

pub fn sup_norm(v: ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn factor_solve_inverse() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let c = Cholesky::factor(a.view()).unwrap();
        let l = c.lower();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
        let b = array![1.0, -2.0, 0.5];
        let x = c.solve(b.view());
        let ax = a.dot(&x);
        for (u, v) in ax.iter().zip(b.iter()) {
            assert_relative_eq!(u, v, epsilon = 1e-12);
        }
        let inv = c.inverse();
        let eye = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(eye[[i, j]], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(Cholesky::factor(a.view()).is_err());
        let (_, ridge) = cholesky_with_ridge(a.view()).unwrap();
        assert!(ridge > 1.0);
    }

    #[test]
    fn gram_matches_direct() {
        let xt = array![[1.0, 2.0, 3.0], [0.5, -1.0, 2.0]];
        let w = array![1.0, 0.5, 2.0];
        let g = weighted_gram(xt.view(), w.view());
        let mut direct = Array2::<f64>::zeros((2, 2));
        for i in 0..3 {
            for a in 0..2 {
                for b in 0..2 {
                    direct[[a, b]] += w[i] * xt[[a, i]] * xt[[b, i]] / 3.0;
                }
            }
        }
        for (x, y) in g.iter().zip(direct.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }
}
