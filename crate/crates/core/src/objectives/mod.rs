//! Sample objectives `Q_n(theta)`.
//!
//! Every objective is the sample *average* of per-observation losses, so it is
//! on a scale comparable across sample sizes. Callers that need the summed
//! scale (BIC) multiply by `n`.

mod gmm;
mod index;
mod rc_logit;

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Support};
use crate::error::{Error, Result};

pub use gmm::{Gmm, LinearMoments, MomentFunction};
pub(crate) use index::{IndexLoss, IndexModel};
pub use index::{log1p_exp, logistic};
pub use rc_logit::{cholesky_index, rc_logit_dim, DrawScheme, RcLogit, PROBABILITY_CLIP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveKind {
    Logit,
    LinearLs,
    RandomCoefLogit,
    GmmFixedWeight,
    GmmCue,
}

impl ObjectiveKind {
    /// `-Q_n` is a log-likelihood, so the information equality holds.
    pub fn is_likelihood(self) -> bool {
        matches!(self, ObjectiveKind::Logit | ObjectiveKind::RandomCoefLogit)
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Index(Arc<IndexModel>),
    RcLogit(Arc<RcLogit>),
    Gmm(Arc<Gmm>),
    Restricted(Arc<Restricted>),
}

#[derive(Debug)]
struct Restricted {
    base: ObjectiveModel,
    support: Support,
}

/// An evaluatable sample objective. Cheap to clone and immutable; safe to
/// share across threads.
#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    kind: ObjectiveKind,
    repr: Repr,
}

/// Average negative log-likelihood of the binary logit model.
pub fn logit_objective(data: &Dataset) -> Result<ObjectiveModel> {
    Ok(ObjectiveModel {
        kind: ObjectiveKind::Logit,
        repr: Repr::Index(Arc::new(IndexModel::logit(data)?)),
    })
}

/// Mean squared residual `(1/n) sum (y_i - x_i' theta)^2`.
pub fn linear_ls_objective(data: &Dataset) -> Result<ObjectiveModel> {
    Ok(ObjectiveModel {
        kind: ObjectiveKind::LinearLs,
        repr: Repr::Index(Arc::new(IndexModel::linear(data)?)),
    })
}

/// Simulated negative log-likelihood of the random-coefficients logit.
pub fn rc_logit_objective(data: &Dataset, n_draws: usize, scheme: DrawScheme, seed: u64) -> Result<ObjectiveModel> {
    let draws = rc_logit::simulation_draws(n_draws, data.p(), scheme, seed)?;
    let model = RcLogit::new(Arc::new(data.clone()), Arc::new(draws))?;
    Ok(ObjectiveModel {
        kind: ObjectiveKind::RandomCoefLogit,
        repr: Repr::RcLogit(Arc::new(model)),
    })
}

pub fn gmm_fixed_objective(
    data: &Dataset,
    moments: Arc<dyn MomentFunction>,
    omega: Array2<f64>,
) -> Result<ObjectiveModel> {
    let gmm = Gmm::fixed(Arc::new(data.clone()), moments, omega)?;
    Ok(ObjectiveModel {
        kind: ObjectiveKind::GmmFixedWeight,
        repr: Repr::Gmm(Arc::new(gmm)),
    })
}

pub fn gmm_cue_objective(data: &Dataset, moments: Arc<dyn MomentFunction>) -> Result<ObjectiveModel> {
    Ok(ObjectiveModel {
        kind: ObjectiveKind::GmmCue,
        repr: Repr::Gmm(Arc::new(Gmm::cue(Arc::new(data.clone()), moments))),
    })
}

/// Restrict `model` to `support`, pinning the remaining coordinates at zero.
pub fn restrict(model: &ObjectiveModel, support: &Support) -> Result<ObjectiveModel> {
    model.restrict(support)
}

impl ObjectiveModel {
    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn n_obs(&self) -> usize {
        match &self.repr {
            Repr::Index(m) => m.n(),
            Repr::RcLogit(m) => m.data().n(),
            Repr::Gmm(m) => m.data().n(),
            Repr::Restricted(r) => r.base.n_obs(),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Index(m) => m.p(),
            Repr::RcLogit(m) => m.dim(),
            Repr::Gmm(m) => m.dim(),
            Repr::Restricted(r) => r.support.len(),
        }
    }

    fn check_dim(&self, theta: ArrayView1<f64>) {
        assert_eq!(
            theta.len(),
            self.dim(),
            "parameter vector has length {} but the objective has dimension {}",
            theta.len(),
            self.dim()
        );
    }

    pub fn value(&self, theta: ArrayView1<f64>) -> f64 {
        self.check_dim(theta);
        match &self.repr {
            Repr::Index(m) => m.value(theta),
            Repr::RcLogit(m) => m.value(theta),
            Repr::Gmm(m) => m.value(theta),
            Repr::Restricted(r) => r.base.value(r.support.expand(theta).view()),
        }
    }

    /// Like [`value`](Self::value) but reports why an evaluation failed.
    pub fn try_value(&self, theta: ArrayView1<f64>) -> Result<f64> {
        self.check_dim(theta);
        let v = match &self.repr {
            Repr::Gmm(m) => m.try_value(theta)?,
            Repr::Restricted(r) => r.base.try_value(r.support.expand(theta).view())?,
            _ => self.value(theta),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                context: format!("theta = {theta}"),
            })
        }
    }

    pub fn gradient(&self, theta: ArrayView1<f64>) -> Array1<f64> {
        self.check_dim(theta);
        match &self.repr {
            Repr::Index(m) => m.gradient(theta),
            Repr::RcLogit(m) => m.gradient(theta),
            Repr::Gmm(m) => m.gradient(theta),
            Repr::Restricted(r) => {
                let full = r.base.gradient(r.support.expand(theta).view());
                r.support.extract(full.view())
            }
        }
    }

    pub fn hessian(&self, theta: ArrayView1<f64>) -> Array2<f64> {
        self.check_dim(theta);
        match &self.repr {
            Repr::Index(m) => m.hessian(theta),
            Repr::RcLogit(m) => m.hessian(theta),
            Repr::Gmm(m) => m.hessian(theta),
            Repr::Restricted(r) => {
                let full = r.base.hessian(r.support.expand(theta).view());
                let idx = r.support.indices();
                full.select(Axis(0), idx).select(Axis(1), idx)
            }
        }
    }

    /// `n x dim` matrix whose row `i` is the gradient of observation `i`'s
    /// loss; the gradient of the objective is the column mean.
    pub fn score_contributions(&self, theta: ArrayView1<f64>) -> Result<Array2<f64>> {
        self.check_dim(theta);
        match &self.repr {
            Repr::Index(m) => Ok(m.score_contributions(theta)),
            Repr::RcLogit(m) => Ok(m.score_contributions(theta)),
            Repr::Gmm(m) => m.score_contributions(theta),
            Repr::Restricted(r) => {
                let full = r.base.score_contributions(r.support.expand(theta).view())?;
                Ok(full.select(Axis(1), r.support.indices()))
            }
        }
    }

    /// Logit fitted probabilities numerically at 0 or 1 (separation symptom).
    pub fn saturated(&self, theta: ArrayView1<f64>) -> bool {
        match &self.repr {
            Repr::Index(m) => m.saturated(theta),
            Repr::Restricted(r) => r.base.saturated(r.support.expand(theta).view()),
            _ => false,
        }
    }

    pub fn restrict(&self, support: &Support) -> Result<ObjectiveModel> {
        if support.dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "support over {} coordinates used with an objective of dimension {}",
                support.dim(),
                self.dim()
            )));
        }
        if support.is_empty() {
            return Err(Error::EmptySupport("cannot restrict an objective to no coordinates".into()));
        }
        let repr = match &self.repr {
            Repr::Index(m) => {
                if support.is_full() {
                    Repr::Index(Arc::clone(m))
                } else {
                    Repr::Index(Arc::new(m.select_columns(support.indices())))
                }
            }
            Repr::Restricted(r) => Repr::Restricted(Arc::new(Restricted {
                base: r.base.clone(),
                support: r.support.compose(support)?,
            })),
            _ => Repr::Restricted(Arc::new(Restricted {
                base: self.clone(),
                support: support.clone(),
            })),
        };
        Ok(ObjectiveModel { kind: self.kind, repr })
    }

    /// The same objective evaluated on the sample rows `rows` (repeats allowed).
    pub fn resampled(&self, rows: &[usize]) -> Result<ObjectiveModel> {
        let repr = match &self.repr {
            Repr::Index(m) => Repr::Index(Arc::new(m.select_rows(rows))),
            Repr::RcLogit(m) => Repr::RcLogit(Arc::new(m.with_data(Arc::new(m.data().select_rows(rows)))?)),
            Repr::Gmm(m) => Repr::Gmm(Arc::new(m.with_data(Arc::new(m.data().select_rows(rows))))),
            Repr::Restricted(r) => Repr::Restricted(Arc::new(Restricted {
                base: r.base.resampled(rows)?,
                support: r.support.clone(),
            })),
        };
        Ok(ObjectiveModel { kind: self.kind, repr })
    }

    pub(crate) fn as_index(&self) -> Option<&IndexModel> {
        match &self.repr {
            Repr::Index(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_gmm(&self) -> Option<&Gmm> {
        match &self.repr {
            Repr::Gmm(m) => Some(m),
            _ => None,
        }
    }
}
