//! Squared-exponential kernel with per-dimension (ARD) lengthscales and the
//! map from a body state to kernel inputs.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::rigid_body::BodyState;

/// Number of leading feature entries that hold `x = [p; ṗ]`.
pub const X_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub signal_var: f64,
    pub noise_std: f64,
}

impl KernelParams {
    pub fn isotropic(dim: usize, lengthscale: f64, signal_var: f64, noise_std: f64) -> Self {
        KernelParams {
            lengthscales: vec![lengthscale; dim],
            signal_var,
            noise_std,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_std * self.noise_std
    }

    pub fn is_valid(&self) -> bool {
        self.lengthscales.iter().all(|l| *l > 0.0 && l.is_finite())
            && self.signal_var > 0.0
            && self.signal_var.is_finite()
            && self.noise_std >= 0.0
            && self.noise_std.is_finite()
    }

    pub(crate) fn inv_sq_lengthscales(&self) -> Vec<f64> {
        self.lengthscales.iter().map(|l| 1.0 / (l * l)).collect()
    }
}

/// `σ_f² · exp(−½ Σ_j (a_j − b_j)² / ℓ_j²)`. Only the first `params.dim()`
/// entries of each input are used.
pub fn kernel_eval(a: &[f64], b: &[f64], params: &KernelParams) -> f64 {
    let d2: f64 = params
        .lengthscales
        .iter()
        .zip(a.iter().zip(b))
        .map(|(l, (x, y))| {
            let r = (x - y) / l;
            r * r
        })
        .sum();
    params.signal_var * (-0.5 * d2).exp()
}

#[inline]
pub(crate) fn kernel_scaled(a: &[f64], b: &[f64], inv_sq: &[f64], signal_var: f64) -> f64 {
    let mut d2 = 0.0;
    for ((x, y), w) in a.iter().zip(b).zip(inv_sq) {
        let r = x - y;
        d2 += r * r * w;
    }
    signal_var * (-0.5 * d2).exp()
}

/// How a body state becomes a kernel input. Both maps start with `x = [p; ṗ]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMap {
    /// `[p; ṗ; ω]`, 9 entries.
    #[default]
    PosVelOmega,
    /// `[p; ṗ; ω; vec(R)]` with `R` row-major, 18 entries.
    PosVelOmegaRotation,
}

impl FeatureMap {
    pub fn dim(self) -> usize {
        match self {
            FeatureMap::PosVelOmega => 9,
            FeatureMap::PosVelOmegaRotation => 18,
        }
    }

    /// Input width seen by output `i`: the force outputs (0..3) are functions
    /// of `x` alone, the torque outputs see the whole feature vector.
    pub fn output_dim(self, output: usize) -> usize {
        if output < 3 {
            X_DIM
        } else {
            self.dim()
        }
    }

    pub fn features(self, s: &BodyState) -> DVector<f64> {
        let mut z = DVector::zeros(self.dim());
        self.write_features(s, z.as_mut_slice());
        z
    }

    pub(crate) fn write_features(self, s: &BodyState, out: &mut [f64]) {
        out[0..3].copy_from_slice(s.p.as_slice());
        out[3..6].copy_from_slice(s.v.as_slice());
        out[6..9].copy_from_slice(s.omega.as_slice());
        if self == FeatureMap::PosVelOmegaRotation {
            for i in 0..3 {
                for j in 0..3 {
                    out[9 + 3 * i + j] = s.r[(i, j)];
                }
            }
        }
    }
}
