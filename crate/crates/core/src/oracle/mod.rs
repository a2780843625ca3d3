//! Learning oracles for the unknown force `f(x)` and torque `f_ω(s)`.
//!
//! Every oracle predicts the stacked residual `y = [f; f_ω] ∈ R⁶` together
//! with a per-output variance, and exposes the first and second derivatives
//! of its force prediction with respect to `x = [p; ṗ]` that the tracking
//! controller needs.

mod baseline;
mod dataset;
mod gp;
mod hyper;
mod kernel;

pub use baseline::{LeastSquaresOracle, ZeroOracle};
pub use dataset::{
    build_training_point, read_dataset_csv, write_dataset_csv, Dataset, TrainingPoint,
    DATASET_HEADER, DEFAULT_CAPACITY,
};
pub use gp::{GpModel, OutputKernels};
pub use hyper::{
    neg_log_marginal_likelihood, optimize_hyperparameters, output_neg_log_likelihood,
    OptimizerBudget, OptimizerOutcome,
};
pub use kernel::{kernel_eval, FeatureMap, KernelParams, X_DIM};

use serde::{Deserialize, Serialize};

use crate::rigid_body::{BodyState, Mat3x6, Mat6, Vec3, Vec6};

/// Constant prior mean per output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorMean(pub [f64; 6]);

impl PriorMean {
    pub fn zero() -> Self {
        PriorMean([0.0; 6])
    }

    /// Gravity prior of the reference experiment: `m₃ = −10`.
    pub fn gravity() -> Self {
        PriorMean([0.0, 0.0, -10.0, 0.0, 0.0, 0.0])
    }

    pub fn as_vec6(&self) -> Vec6 {
        Vec6::from_row_slice(&self.0)
    }
}

impl Default for PriorMean {
    fn default() -> Self {
        PriorMean::gravity()
    }
}

/// Posterior mean and per-output variance of `[f; f_ω]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: Vec6,
    pub var: Vec6,
}

/// Second-order expansion of the force prediction around one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanExpansion {
    /// `[f̂; f̂_ω]`
    pub mean: Vec6,
    /// `∂f̂/∂x`
    pub jac_f: Mat3x6,
    /// `∂²f̂_i/∂x²` for each force component.
    pub hess_f: [Mat6; 3],
}

impl MeanExpansion {
    pub fn constant(mean: Vec6) -> Self {
        MeanExpansion {
            mean,
            jac_f: Mat3x6::zeros(),
            hess_f: [Mat6::zeros(); 3],
        }
    }

    pub fn fhat(&self) -> Vec3 {
        self.mean.fixed_rows::<3>(0).into_owned()
    }

    pub fn fhat_omega(&self) -> Vec3 {
        self.mean.fixed_rows::<3>(3).into_owned()
    }

    /// `∂/∂x[(∂f̂/∂x)·v(x)]·v` for a vector field `v` with Jacobian `jv`.
    pub fn second_term(&self, v: &Vec6, jv: &Mat6) -> Vec3 {
        let curvature = Vec3::from_fn(|i, _| (v.transpose() * self.hess_f[i] * v)[0]);
        curvature + self.jac_f * (jv * v)
    }

    /// `∂/∂x[(∂f̂/∂x)·v(x)]` as a 3×6 matrix.
    pub fn second_term_jacobian(&self, v: &Vec6, jv: &Mat6) -> Mat3x6 {
        let mut out = self.jac_f * jv;
        for i in 0..3 {
            let row = (self.hess_f[i] * v).transpose();
            out.set_row(i, &(out.row(i) + row));
        }
        out
    }
}

/// `β` and confidence `δ` of the high-probability prediction error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundParams {
    pub beta: [f64; 6],
    pub delta: f64,
}

impl Default for ErrorBoundParams {
    fn default() -> Self {
        ErrorBoundParams {
            beta: [2.0; 6],
            delta: 0.95,
        }
    }
}

impl ErrorBoundParams {
    pub fn is_valid(&self) -> bool {
        self.beta.iter().all(|b| *b >= 0.0 && b.is_finite()) && self.delta > 0.0 && self.delta <= 1.0
    }
}

/// `ρ̄ = ‖βᵀ·diag(√var)‖ = sqrt(Σ β_i² var_i)`.
pub fn error_bound_from_var(var: &Vec6, ebp: &ErrorBoundParams) -> f64 {
    var.iter()
        .zip(ebp.beta.iter())
        .map(|(v, b)| b * b * v.max(0.0))
        .sum::<f64>()
        .sqrt()
}

pub trait Oracle {
    fn predict(&self, s: &BodyState) -> Prediction;

    fn expand(&self, s: &BodyState) -> MeanExpansion;

    fn error_bound(&self, s: &BodyState, ebp: &ErrorBoundParams) -> f64 {
        error_bound_from_var(&self.predict(s).var, ebp)
    }
}

/// Error bound `ρ̄_n(s)` of any oracle.
pub fn error_bound<O: Oracle + ?Sized>(oracle: &O, s: &BodyState, ebp: &ErrorBoundParams) -> f64 {
    oracle.error_bound(s, ebp)
}

/// `∂f̂/∂x` of any oracle.
pub fn mean_jacobian<O: Oracle + ?Sized>(oracle: &O, s: &BodyState) -> Mat3x6 {
    oracle.expand(s).jac_f
}

/// `∂/∂x[(∂f̂/∂x)·v]·v` of any oracle.
pub fn mean_second_term<O: Oracle + ?Sized>(oracle: &O, s: &BodyState, v: &Vec6, jv: &Mat6) -> Vec3 {
    oracle.expand(s).second_term(v, jv)
}
