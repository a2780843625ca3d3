//! Log marginal likelihood and a derivative-free hyperparameter search.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gp::{chol_solve, factorize, gram, OutputKernels};
use super::kernel::{FeatureMap, KernelParams};
use super::{PriorMean, TrainingPoint};
use crate::error::OracleError;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-2, 1e2);
const SIGNAL_VAR_BOUNDS: (f64, f64) = (1e-4, 1e4);
const MIN_STEP: f64 = 1e-3;

fn feature_rows(points: &[TrainingPoint], map: FeatureMap) -> Vec<f64> {
    let stride = map.dim();
    let mut inputs = vec![0.0; points.len() * stride];
    for (pt, row) in points.iter().zip(inputs.chunks_mut(stride)) {
        map.write_features(&pt.state, row);
    }
    inputs
}

fn nll(inputs: &[f64], stride: usize, y: &DVector<f64>, params: &KernelParams, output: usize) -> Result<f64, OracleError> {
    let n = y.len();
    let factor = factorize(|| gram(inputs, stride, n, params), output)?;
    let alpha = chol_solve(&factor.l, y);
    let log_det: f64 = factor.l.diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    Ok(0.5 * y.dot(&alpha) + 0.5 * log_det + 0.5 * n as f64 * LN_2PI)
}

fn centered(points: &[TrainingPoint], output: usize, prior: f64) -> DVector<f64> {
    DVector::from_iterator(points.len(), points.iter().map(|p| p.y[output] - prior))
}

/// `½yᵀK⁻¹y + ½log det K + (N/2)log 2π` for one output, with `y` centered
/// on the prior mean.
pub fn output_neg_log_likelihood(
    points: &[TrainingPoint],
    output: usize,
    params: &KernelParams,
    prior: f64,
    map: FeatureMap,
) -> Result<f64, OracleError> {
    let inputs = feature_rows(points, map);
    nll(&inputs, map.dim(), &centered(points, output, prior), params, output)
}

/// Sum of the per-output negative log evidences.
pub fn neg_log_marginal_likelihood(
    points: &[TrainingPoint],
    kernels: &OutputKernels,
    prior: &PriorMean,
    map: FeatureMap,
) -> Result<f64, OracleError> {
    let inputs = feature_rows(points, map);
    (0..6)
        .map(|i| nll(&inputs, map.dim(), &centered(points, i, prior.0[i]), &kernels[i], i))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBudget {
    pub starts: usize,
    pub evaluations_per_start: usize,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        OptimizerBudget {
            starts: 4,
            evaluations_per_start: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerOutcome {
    pub kernels: OutputKernels,
    pub initial_nll: [f64; 6],
    pub final_nll: [f64; 6],
    pub evaluations: usize,
    /// Outputs where every probe failed to factorize; those keep `init`.
    pub failed: [bool; 6],
}

fn to_log(p: &KernelParams) -> Vec<f64> {
    let mut th: Vec<f64> = p
        .lengthscales
        .iter()
        .map(|l| l.clamp(LENGTHSCALE_BOUNDS.0, LENGTHSCALE_BOUNDS.1).ln())
        .collect();
    th.push(p.signal_var.clamp(SIGNAL_VAR_BOUNDS.0, SIGNAL_VAR_BOUNDS.1).ln());
    th
}

fn from_log(th: &[f64], noise_std: f64) -> KernelParams {
    let (ls, sv) = th.split_at(th.len() - 1);
    KernelParams {
        lengthscales: ls.iter().map(|x| x.exp()).collect(),
        signal_var: sv[0].exp(),
        noise_std,
    }
}

fn bounds(coord: usize, dim: usize) -> (f64, f64) {
    let (lo, hi) = if coord < dim { LENGTHSCALE_BOUNDS } else { SIGNAL_VAR_BOUNDS };
    (lo.ln(), hi.ln())
}

/// Multi-start coordinate search over `(log ℓ, log σ_f²)` per output with the
/// noise level held fixed. Start 0 is `init`; further starts perturb it by up
/// to ±2 in log space. Never returns parameters worse than `init`.
pub fn optimize_hyperparameters(
    points: &[TrainingPoint],
    init: &OutputKernels,
    prior: &PriorMean,
    map: FeatureMap,
    budget: OptimizerBudget,
    seed: u64,
) -> OptimizerOutcome {
    let mut outcome = OptimizerOutcome {
        kernels: init.clone(),
        initial_nll: [f64::INFINITY; 6],
        final_nll: [f64::INFINITY; 6],
        evaluations: 0,
        failed: [false; 6],
    };
    if points.len() < 2 || budget.starts == 0 || budget.evaluations_per_start == 0 {
        return outcome;
    }
    let inputs = feature_rows(points, map);
    let stride = map.dim();

    #[allow(clippy::needless_range_loop)]
    for i in 0..6 {
        let y = centered(points, i, prior.0[i]);
        let noise = init[i].noise_std;
        let dim = init[i].dim();
        let mut evals = 0usize;
        let mut objective = |th: &[f64]| {
            evals += 1;
            nll(&inputs, stride, &y, &from_log(th, noise), i).unwrap_or(f64::INFINITY)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1)));

        let init_th = to_log(&init[i]);
        let init_f = objective(&init_th);
        outcome.initial_nll[i] = init_f;
        let mut best = (init_th.clone(), init_f);

        for start in 0..budget.starts {
            let mut th = if start == 0 {
                init_th.clone()
            } else {
                init_th
                    .iter()
                    .enumerate()
                    .map(|(c, x)| {
                        let (lo, hi) = bounds(c, dim);
                        (x + rng.random_range(-2.0..2.0)).clamp(lo, hi)
                    })
                    .collect()
            };
            let mut used = 1;
            let mut f = if start == 0 { init_f } else { objective(&th) };
            let mut step = 1.0;
            while used < budget.evaluations_per_start && step >= MIN_STEP {
                let mut improved = false;
                'coords: for c in 0..th.len() {
                    let (lo, hi) = bounds(c, dim);
                    for dir in [1.0, -1.0] {
                        if used >= budget.evaluations_per_start {
                            break 'coords;
                        }
                        let cand = (th[c] + dir * step).clamp(lo, hi);
                        if cand == th[c] {
                            continue;
                        }
                        let old = th[c];
                        th[c] = cand;
                        let fc = objective(&th);
                        used += 1;
                        if fc < f {
                            f = fc;
                            improved = true;
                            break;
                        }
                        th[c] = old;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            if f < best.1 {
                best = (th, f);
            }
        }
        outcome.evaluations += evals;
        if best.1.is_finite() {
            outcome.kernels[i] = from_log(&best.0, noise);
            outcome.final_nll[i] = best.1;
        } else {
            log::warn!("hyperparameter search for output {i}: every probe failed to factorize");
            outcome.failed[i] = true;
        }
    }
    outcome
}
