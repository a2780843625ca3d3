//! Parametric baselines behind the same [`Oracle`] interface as the GP.

use nalgebra::{DMatrix, DVector};

use super::kernel::FeatureMap;
use super::{ErrorBoundParams, MeanExpansion, Oracle, Prediction, PriorMean, TrainingPoint};
use crate::error::OracleError;
use crate::rigid_body::{BodyState, Mat3x6, Vec6};

/// Predicts the prior mean everywhere with a fixed error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroOracle {
    pub prior: PriorMean,
    pub rho_bar: f64,
}

impl ZeroOracle {
    pub fn new(prior: PriorMean, rho_bar: f64) -> Self {
        ZeroOracle { prior, rho_bar }
    }
}

impl Oracle for ZeroOracle {
    fn predict(&self, _s: &BodyState) -> Prediction {
        Prediction {
            mean: self.prior.as_vec6(),
            var: Vec6::zeros(),
        }
    }

    fn expand(&self, _s: &BodyState) -> MeanExpansion {
        MeanExpansion::constant(self.prior.as_vec6())
    }

    fn error_bound(&self, _s: &BodyState, _ebp: &ErrorBoundParams) -> f64 {
        self.rho_bar
    }
}

/// Affine model `y_i = w_iᵀz + b_i` per output, fitted by normal equations.
/// Force outputs regress on `x` only, torque outputs on the full feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresOracle {
    feature_map: FeatureMap,
    /// Per output: weights over the output's input width, then the bias.
    coefficients: Vec<DVector<f64>>,
    residual_var: Vec6,
    regularized: bool,
}

impl LeastSquaresOracle {
    pub fn fit(points: &[TrainingPoint], feature_map: FeatureMap) -> Result<Self, OracleError> {
        let needed = feature_map.dim() + 1;
        if points.len() < needed {
            return Err(OracleError::TooFewPoints {
                needed,
                got: points.len(),
            });
        }
        let z: Vec<_> = points.iter().map(|p| feature_map.features(&p.state)).collect();
        let mut coefficients = Vec::with_capacity(6);
        let mut residual_var = Vec6::zeros();
        let mut regularized = false;
        for i in 0..6 {
            let d = feature_map.output_dim(i);
            let design = DMatrix::from_fn(points.len(), d + 1, |r, c| if c < d { z[r][c] } else { 1.0 });
            let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.y[i]));
            let normal = design.transpose() * &design;
            let rhs = design.transpose() * &y;
            let (w, reg) = solve_normal(normal, &rhs);
            regularized |= reg;
            let resid = &y - &design * &w;
            let dof = points.len().saturating_sub(d + 1);
            residual_var[i] = if dof > 0 { resid.norm_squared() / dof as f64 } else { 0.0 };
            coefficients.push(w);
        }
        if regularized {
            log::warn!("least-squares oracle: rank-deficient normal equations, solved with ridge regularization");
        }
        Ok(LeastSquaresOracle {
            feature_map,
            coefficients,
            residual_var,
            regularized,
        })
    }

    /// Whether a ridge term was needed for rank-deficient data.
    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub fn coefficients(&self, output: usize) -> &DVector<f64> {
        &self.coefficients[output]
    }
}

fn solve_normal(normal: DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, bool) {
    let scale = normal.trace() / normal.nrows() as f64;
    if let Some(ch) = normal.clone().cholesky() {
        let diag = ch.l_dirty().diagonal();
        let ratio = diag.min() / diag.max();
        if ratio * ratio > 1e-13 {
            return (ch.solve(rhs), false);
        }
    }
    let mut ridge = normal;
    for k in 0..ridge.nrows() {
        ridge[(k, k)] += 1e-8 * scale.max(1e-300);
    }
    let w = ridge
        .cholesky()
        .map(|ch| ch.solve(rhs))
        .unwrap_or_else(|| DVector::zeros(rhs.len()));
    (w, true)
}

impl Oracle for LeastSquaresOracle {
    fn predict(&self, s: &BodyState) -> Prediction {
        self.expand_with_var(s)
    }

    fn expand(&self, s: &BodyState) -> MeanExpansion {
        let mean = self.expand_with_var(s).mean;
        let mut jac_f = Mat3x6::zeros();
        for i in 0..3 {
            for a in 0..6 {
                jac_f[(i, a)] = self.coefficients[i][a];
            }
        }
        MeanExpansion {
            mean,
            jac_f,
            hess_f: Default::default(),
        }
    }
}

impl LeastSquaresOracle {
    fn expand_with_var(&self, s: &BodyState) -> Prediction {
        let z = self.feature_map.features(s);
        let mean = Vec6::from_fn(|i, _| {
            let w = &self.coefficients[i];
            let d = w.len() - 1;
            w.rows(0, d).dot(&z.rows(0, d)) + w[d]
        });
        Prediction {
            mean,
            var: self.residual_var,
        }
    }
}
