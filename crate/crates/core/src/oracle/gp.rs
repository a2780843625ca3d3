//! Multi-output Gaussian-process regression with independent squared
//! exponential kernels per output.

use nalgebra::{DMatrix, DVector};

use super::kernel::{kernel_scaled, FeatureMap, KernelParams, X_DIM};
use super::{MeanExpansion, Oracle, Prediction, PriorMean, TrainingPoint};
use crate::error::OracleError;
use crate::rigid_body::{BodyState, Mat3x6, Mat6, Vec6};

pub type OutputKernels = [KernelParams; 6];

/// Variances in `(-VAR_CLAMP, 0)` are round-off and clamp to zero.
const VAR_CLAMP: f64 = 1e-10;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Lower Cholesky factor of the Gram matrix of one output plus the jitter
/// that was needed to obtain it.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    pub l: DMatrix<f64>,
    pub jitter: f64,
}

/// Gram matrix `k(X, X) + σ²I` over the first `params.dim()` features.
pub(crate) fn gram(inputs: &[f64], stride: usize, n: usize, params: &KernelParams) -> DMatrix<f64> {
    let inv_sq = params.inv_sq_lengthscales();
    let d = params.dim();
    let noise = params.noise_var();
    let mut k = DMatrix::zeros(n, n);
    for a in 0..n {
        let za = &inputs[a * stride..a * stride + d];
        k[(a, a)] = params.signal_var + noise;
        for b in 0..a {
            let kab = kernel_scaled(za, &inputs[b * stride..b * stride + d], &inv_sq, params.signal_var);
            k[(a, b)] = kab;
            k[(b, a)] = kab;
        }
    }
    k
}

/// Cholesky with jitter escalation: none first, then `1e-10·mean(diag K)`
/// growing ×10 up to `1e-4·mean(diag K)`. `build` is called again for each
/// retry so the first attempt can consume its matrix.
pub(crate) fn factorize<F: Fn() -> DMatrix<f64>>(build: F, output: usize) -> Result<Factor, OracleError> {
    let k = build();
    let n = k.nrows();
    if n == 0 {
        return Ok(Factor {
            l: DMatrix::zeros(0, 0),
            jitter: 0.0,
        });
    }
    let diag = k.diagonal();
    if let Some(ch) = k.cholesky() {
        return Ok(Factor {
            l: ch.unpack(),
            jitter: 0.0,
        });
    }
    let mean_diag = diag.mean();
    let mut level = JITTER_START;
    let mut jitter = 0.0;
    while level <= JITTER_MAX * (1.0 + 1e-12) {
        jitter = level * mean_diag;
        let mut kj = build();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(ch) = kj.cholesky() {
            return Ok(Factor {
                l: ch.unpack(),
                jitter,
            });
        }
        level *= 10.0;
    }
    Err(OracleError::Factorization {
        output,
        n,
        min_diag: diag.min(),
        max_diag: diag.max(),
        jitter,
    })
}

/// Solves `L Lᵀ x = b`.
pub(crate) fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if l.nrows() == 0 {
        return DVector::zeros(0);
    }
    let y = l.solve_lower_triangular(b).expect("factor has a positive diagonal");
    l.tr_solve_lower_triangular(&y).expect("factor has a positive diagonal")
}

#[derive(Debug, Clone)]
struct OutputModel {
    params: KernelParams,
    inv_sq: Vec<f64>,
    prior: f64,
    factor: Factor,
    alpha: DVector<f64>,
}

/// Fitted multi-output GP. Immutable: [`GpModel::update`] returns a new model.
#[derive(Debug, Clone)]
pub struct GpModel {
    feature_map: FeatureMap,
    prior: PriorMean,
    /// Row-major `N × feature_dim` inputs.
    inputs: Vec<f64>,
    targets: Vec<Vec6>,
    outputs: Vec<OutputModel>,
}

impl GpModel {
    /// Fits all six outputs on `points` with fixed hyperparameters.
    pub fn fit(
        points: &[TrainingPoint],
        kernels: &OutputKernels,
        prior: PriorMean,
        feature_map: FeatureMap,
    ) -> Result<Self, OracleError> {
        for (i, k) in kernels.iter().enumerate() {
            let expected = feature_map.output_dim(i);
            if k.dim() != expected {
                return Err(OracleError::Dimension {
                    expected,
                    got: k.dim(),
                });
            }
        }
        let stride = feature_map.dim();
        let mut inputs = vec![0.0; points.len() * stride];
        for (pt, row) in points.iter().zip(inputs.chunks_mut(stride)) {
            feature_map.write_features(&pt.state, row);
        }
        let targets: Vec<Vec6> = points.iter().map(|p| p.y).collect();
        let n = points.len();
        let outputs = kernels
            .iter()
            .enumerate()
            .map(|(i, params)| {
                let factor = factorize(|| gram(&inputs, stride, n, params), i)?;
                let prior_i = prior.0[i];
                let resid = DVector::from_iterator(n, targets.iter().map(|y| y[i] - prior_i));
                let alpha = chol_solve(&factor.l, &resid);
                Ok(OutputModel {
                    inv_sq: params.inv_sq_lengthscales(),
                    params: params.clone(),
                    prior: prior_i,
                    factor,
                    alpha,
                })
            })
            .collect::<Result<Vec<_>, OracleError>>()?;
        Ok(GpModel {
            feature_map,
            prior,
            inputs,
            targets,
            outputs,
        })
    }

    /// Model with no data: predictions equal the prior.
    pub fn empty(kernels: &OutputKernels, prior: PriorMean, feature_map: FeatureMap) -> Result<Self, OracleError> {
        GpModel::fit(&[], kernels, prior, feature_map)
    }

    /// Adds points by extending each Cholesky factor. Equivalent to refitting
    /// on the union with the same hyperparameters.
    pub fn update(&self, new_points: &[TrainingPoint]) -> Result<Self, OracleError> {
        if new_points.is_empty() {
            return Ok(self.clone());
        }
        let stride = self.feature_map.dim();
        let old_n = self.len();
        let m = new_points.len();
        let n = old_n + m;

        let mut inputs = self.inputs.clone();
        inputs.resize(n * stride, 0.0);
        for (pt, row) in new_points.iter().zip(inputs[old_n * stride..].chunks_mut(stride)) {
            self.feature_map.write_features(&pt.state, row);
        }
        let mut targets = self.targets.clone();
        targets.extend(new_points.iter().map(|p| p.y));

        let mut outputs = Vec::with_capacity(6);
        for (i, old) in self.outputs.iter().enumerate() {
            let factor = match extend_factor(&old.factor, &inputs, stride, old_n, m, &old.params, &old.inv_sq) {
                Some(f) => f,
                None => factorize(|| gram(&inputs, stride, n, &old.params), i)?,
            };
            let resid = DVector::from_iterator(n, targets.iter().map(|y| y[i] - old.prior));
            let alpha = chol_solve(&factor.l, &resid);
            outputs.push(OutputModel {
                params: old.params.clone(),
                inv_sq: old.inv_sq.clone(),
                prior: old.prior,
                factor,
                alpha,
            });
        }
        Ok(GpModel {
            feature_map: self.feature_map,
            prior: self.prior,
            inputs,
            targets,
            outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn feature_map(&self) -> FeatureMap {
        self.feature_map
    }

    pub fn prior(&self) -> PriorMean {
        self.prior
    }

    pub fn kernels(&self) -> OutputKernels {
        std::array::from_fn(|i| self.outputs[i].params.clone())
    }

    /// Lower Cholesky factor of output `i`'s Gram matrix.
    pub fn factor(&self, output: usize) -> &DMatrix<f64> {
        &self.outputs[output].factor.l
    }

    pub fn jitter(&self, output: usize) -> f64 {
        self.outputs[output].factor.jitter
    }

    pub fn targets(&self) -> &[Vec6] {
        &self.targets
    }

    fn input(&self, j: usize) -> &[f64] {
        let stride = self.feature_map.dim();
        &self.inputs[j * stride..(j + 1) * stride]
    }

    fn kernel_column(&self, output: &OutputModel, z: &[f64]) -> DVector<f64> {
        let d = output.params.dim();
        DVector::from_iterator(
            self.len(),
            (0..self.len()).map(|j| kernel_scaled(&z[..d], &self.input(j)[..d], &output.inv_sq, output.params.signal_var)),
        )
    }

    /// Posterior mean and variance; variance below `-1e-10` is an error.
    pub fn try_predict(&self, s: &BodyState) -> Result<Prediction, OracleError> {
        self.posterior(s, true)
    }

    fn posterior(&self, s: &BodyState, strict: bool) -> Result<Prediction, OracleError> {
        let z = self.feature_map.features(s);
        let mut mean = Vec6::zeros();
        let mut var = Vec6::zeros();
        for (i, out) in self.outputs.iter().enumerate() {
            if self.is_empty() {
                mean[i] = out.prior;
                var[i] = out.params.signal_var;
                continue;
            }
            let k = self.kernel_column(out, z.as_slice());
            mean[i] = out.prior + k.dot(&out.alpha);
            let v = out
                .factor
                .l
                .solve_lower_triangular(&k)
                .expect("factor has a positive diagonal");
            let vi = out.params.signal_var - v.norm_squared();
            if strict && vi <= -VAR_CLAMP {
                return Err(OracleError::NegativeVariance(vi));
            }
            var[i] = vi.max(0.0);
        }
        Ok(Prediction { mean, var })
    }

    /// Posterior mean with its gradient and Hessian in `x` for the force
    /// outputs. For the squared exponential kernel
    /// `∂k/∂z_a = −k·r_a/ℓ_a²` and
    /// `∂²k/∂z_a∂z_b = k·(r_a r_b/(ℓ_a²ℓ_b²) − δ_ab/ℓ_a²)`, `r = z − x_j`.
    pub fn expand_mean(&self, s: &BodyState) -> MeanExpansion {
        let z = self.feature_map.features(s);
        let z = z.as_slice();
        let mut exp = MeanExpansion::constant(self.prior.as_vec6());
        if self.is_empty() {
            return exp;
        }
        for (i, out) in self.outputs.iter().enumerate() {
            let d = out.params.dim();
            let mut acc = 0.0;
            if i < 3 {
                let inv = &out.inv_sq;
                let mut grad = [0.0; X_DIM];
                let mut hess = Mat6::zeros();
                let mut diag_w = 0.0;
                for j in 0..self.len() {
                    let xj = &self.input(j)[..d];
                    let w = out.alpha[j] * kernel_scaled(&z[..d], xj, inv, out.params.signal_var);
                    acc += w;
                    let mut u = [0.0; X_DIM];
                    for a in 0..X_DIM {
                        u[a] = (z[a] - xj[a]) * inv[a];
                        grad[a] -= w * u[a];
                    }
                    for a in 0..X_DIM {
                        let wu = w * u[a];
                        for b in 0..=a {
                            hess[(a, b)] += wu * u[b];
                        }
                    }
                    diag_w += w;
                }
                for a in 0..X_DIM {
                    hess[(a, a)] -= diag_w * inv[a];
                    for b in 0..a {
                        hess[(b, a)] = hess[(a, b)];
                    }
                    exp.jac_f[(i, a)] = grad[a];
                }
                exp.hess_f[i] = hess;
            } else {
                for j in 0..self.len() {
                    acc += out.alpha[j] * kernel_scaled(&z[..d], &self.input(j)[..d], &out.inv_sq, out.params.signal_var);
                }
            }
            exp.mean[i] += acc;
        }
        exp
    }

    /// `∂f̂/∂x`.
    pub fn mean_jacobian(&self, s: &BodyState) -> Mat3x6 {
        self.expand_mean(s).jac_f
    }
}

/// Extends a factor of the leading `old_n` points by `m` new ones. Returns
/// `None` if the Schur complement is not positive definite.
fn extend_factor(
    old: &Factor,
    inputs: &[f64],
    stride: usize,
    old_n: usize,
    m: usize,
    params: &KernelParams,
    inv_sq: &[f64],
) -> Option<Factor> {
    let d = params.dim();
    let n = old_n + m;
    let row = |j: usize| &inputs[j * stride..j * stride + d];
    let cross = DMatrix::from_fn(old_n, m, |a, b| kernel_scaled(row(a), row(old_n + b), inv_sq, params.signal_var));
    let mut corner = DMatrix::from_fn(m, m, |a, b| {
        kernel_scaled(row(old_n + a), row(old_n + b), inv_sq, params.signal_var)
    });
    for a in 0..m {
        corner[(a, a)] = params.signal_var + params.noise_var() + old.jitter;
    }
    let l21t = if old_n > 0 {
        old.l.solve_lower_triangular(&cross)?
    } else {
        DMatrix::zeros(0, m)
    };
    let schur = corner - l21t.transpose() * &l21t;
    let l22 = schur.cholesky()?.unpack();

    let mut l = DMatrix::zeros(n, n);
    l.view_mut((0, 0), (old_n, old_n)).copy_from(&old.l);
    l.view_mut((old_n, 0), (m, old_n)).copy_from(&l21t.transpose());
    l.view_mut((old_n, old_n), (m, m)).copy_from(&l22);
    Some(Factor {
        l,
        jitter: old.jitter,
    })
}

impl Oracle for GpModel {
    fn predict(&self, s: &BodyState) -> Prediction {
        self.try_predict(s).unwrap_or_else(|e| {
            log::warn!("{e}; clamping to zero");
            self.posterior(s, false).expect("lenient posterior cannot fail")
        })
    }

    fn expand(&self, s: &BodyState) -> MeanExpansion {
        self.expand_mean(s)
    }
}
