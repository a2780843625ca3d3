//! Experiment configuration, stored as TOML.
//!
//! Every key is optional; an empty file yields the reference quadrocopter
//! experiment. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::truth::Disturbance;
use crate::controller::{ControllerOptions, GainParams, GddotForm, TrajectorySpec};
use crate::error::ConfigError;
use crate::oracle::{ErrorBoundParams, FeatureMap, KernelParams, OptimizerBudget, OutputKernels, PriorMean};
use crate::rigid_body::{Mat3, Mat3x6, Mat6, Vec3, VehicleParams};

/// Which oracle drives the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    #[default]
    Gp,
    Zero,
    Linear,
    Truth,
}

impl std::str::FromStr for OracleKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gp" => Ok(OracleKind::Gp),
            "zero" => Ok(OracleKind::Zero),
            "linear" => Ok(OracleKind::Linear),
            "truth" => Ok(OracleKind::Truth),
            other => Err(ConfigError::invalid("oracle", format!("unknown oracle `{other}` (gp, zero, linear, truth)"))),
        }
    }
}

impl std::fmt::Display for OracleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OracleKind::Gp => "gp",
            OracleKind::Zero => "zero",
            OracleKind::Linear => "linear",
            OracleKind::Truth => "truth",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialAttitude {
    /// Attitude, body rate and thrust chosen so the backstepping errors vanish.
    #[default]
    Trimmed,
    /// `R = I`, `ω = 0`, `u = max(u_min, eᵀg_d)`, `u̇ = 0`.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleConfig {
    pub mass: f64,
    pub inertia: [[f64; 3]; 3],
    pub thrust_axis: [f64; 3],
}

impl Default for VehicleConfig {
    fn default() -> Self {
        VehicleConfig {
            mass: 1.0,
            inertia: [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]],
            thrust_axis: [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 1e-3, t_end: 14.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub position: [f64; 3],
    /// Defaults to the desired velocity at `t = 0`.
    pub velocity: Option<[f64; 3]>,
    pub attitude: InitialAttitude,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            position: [0.1, -0.1, 0.0],
            velocity: None,
            attitude: InitialAttitude::Trimmed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningConfig {
    pub collect_period: f64,
    pub update_period: f64,
    pub update_stop_time: f64,
    pub points_per_update: usize,
    pub noise_std: f64,
    pub capacity: usize,
    pub feature_map: FeatureMap,
    pub prior_mean: [f64; 6],
    /// Initial kernel hyperparameters, shared by all outputs.
    pub lengthscale: f64,
    pub signal_var: f64,
    /// Kernel noise level; defaults to `noise_std`.
    pub kernel_noise_std: Option<f64>,
    pub optimize_hyperparameters: bool,
    pub optimizer: OptimizerBudget,
    /// Constant error bound reported by the zero oracle.
    pub zero_oracle_rho_bar: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            collect_period: 0.1,
            update_period: 0.5,
            update_stop_time: 12.0,
            points_per_update: 5,
            noise_std: 0.08,
            capacity: crate::oracle::DEFAULT_CAPACITY,
            feature_map: FeatureMap::PosVelOmega,
            prior_mean: PriorMean::gravity().0,
            lengthscale: 1.0,
            signal_var: 1.0,
            kernel_noise_std: None,
            optimize_hyperparameters: true,
            optimizer: OptimizerBudget::default(),
            zero_oracle_rho_bar: 0.0,
        }
    }
}

impl LearningConfig {
    pub fn initial_kernels(&self) -> OutputKernels {
        let noise = self.kernel_noise_std.unwrap_or(self.noise_std);
        std::array::from_fn(|i| {
            KernelParams::isotropic(self.feature_map.output_dim(i), self.lengthscale, self.signal_var, noise)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsConfig {
    pub g0: [[f64; 6]; 3],
    pub decay: f64,
    pub gz1: [[f64; 3]; 3],
    pub gz2: [[f64; 3]; 3],
    pub q: [[f64; 6]; 6],
}

fn rows<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> [[f64; C]; R] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn from_rows<const R: usize, const C: usize>(a: &[[f64; C]; R]) -> nalgebra::SMatrix<f64, R, C> {
    nalgebra::SMatrix::from_fn(|i, j| a[i][j])
}

impl Default for GainsConfig {
    fn default() -> Self {
        let p = GainParams::default();
        GainsConfig {
            g0: rows(&p.g0),
            decay: p.decay,
            gz1: rows(&p.gz1),
            gz2: rows(&p.gz2),
            q: rows(&p.q),
        }
    }
}

impl GainsConfig {
    pub fn params(&self) -> GainParams {
        GainParams {
            g0: from_rows::<3, 6>(&self.g0) as Mat3x6,
            decay: self.decay,
            gz1: from_rows::<3, 3>(&self.gz1) as Mat3,
            gz2: from_rows::<3, 3>(&self.gz2),
            q: from_rows::<6, 6>(&self.q) as Mat6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub u_min: f64,
    pub k_u: f64,
    /// Defaults to `mass · 9.81`.
    pub u_hover: Option<f64>,
    pub gddot_form: GddotForm,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let d = ControllerOptions::default();
        ControllerConfig {
            u_min: d.u_min,
            k_u: d.k_u,
            u_hover: None,
            gddot_form: d.gddot_form,
        }
    }
}

/// Error bound settings and the probe set used for `max ρ̄`.
///
/// Probe states are sampled in a tube around the desired trajectory:
/// `t ~ U[0, t_end]`, `p = p_d(t) + δp`, `ṗ = ṗ_d(t) + δv`, `ω = δω`, with
/// each offset uniform in a ball of the given radius, and `R` a rotation by
/// an angle up to `attitude_radius` about a uniformly drawn axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConfig {
    pub beta: [f64; 6],
    pub delta: f64,
    pub probe_samples: usize,
    pub position_radius: f64,
    pub velocity_radius: f64,
    pub omega_radius: f64,
    pub attitude_radius: f64,
    /// Start of the window in which `‖z₀‖` is compared with the bound;
    /// defaults to one second after the last update.
    pub check_from: Option<f64>,
}

impl Default for BoundConfig {
    fn default() -> Self {
        let e = ErrorBoundParams::default();
        BoundConfig {
            beta: e.beta,
            delta: e.delta,
            probe_samples: 10_000,
            position_radius: 0.2,
            velocity_radius: 0.5,
            omega_radius: 1.0,
            attitude_radius: 0.5,
            check_from: None,
        }
    }
}

impl BoundConfig {
    pub fn error_bound_params(&self) -> ErrorBoundParams {
        ErrorBoundParams {
            beta: self.beta,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub write_log: bool,
    pub write_dataset: bool,
    pub write_plot_data: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            write_log: true,
            write_dataset: true,
            write_plot_data: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub oracle: OracleKind,
    pub disturbance: Disturbance,
    pub vehicle: VehicleConfig,
    pub trajectory: TrajectorySpec,
    pub sim: SimConfig,
    pub initial: InitialConfig,
    pub learning: LearningConfig,
    pub gains: GainsConfig,
    pub controller: ControllerConfig,
    pub bound: BoundConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            oracle: OracleKind::Gp,
            disturbance: Disturbance::WindField,
            vehicle: VehicleConfig::default(),
            trajectory: TrajectorySpec::Reference,
            sim: SimConfig::default(),
            initial: InitialConfig::default(),
            learning: LearningConfig::default(),
            gains: GainsConfig::default(),
            controller: ControllerConfig::default(),
            bound: BoundConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Ratio `a / b` if it is an integer within round-off.
fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let k = r.round();
    ((r - k).abs() <= 1e-9 * r.abs().max(1.0) && k >= 1.0).then_some(k as usize)
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite<const N: usize>(field: &str, v: &[f64; N]) -> Result<(), ConfigError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, "entries must be finite"))
    }
}

fn spd(field: &str, m: &Mat3) -> Result<(), ConfigError> {
    if (m - m.transpose()).norm() > 1e-12 * m.norm().max(1.0) {
        return Err(ConfigError::invalid(field, "must be symmetric"));
    }
    let min = m.symmetric_eigenvalues().min();
    if !(min > 0.0) {
        return Err(ConfigError::invalid(field, format!("must be positive definite (min eigenvalue {min:.3e})")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn vehicle_params(&self) -> Result<VehicleParams, ConfigError> {
        let v = &self.vehicle;
        VehicleParams::new(v.mass, from_rows::<3, 3>(&v.inertia), Vec3::from(v.thrust_axis))
            .map_err(|e| ConfigError::invalid("vehicle", e.to_string()))
    }

    pub fn controller_options(&self) -> ControllerOptions {
        ControllerOptions {
            u_min: self.controller.u_min,
            k_u: self.controller.k_u,
            u_hover: self.controller.u_hover.unwrap_or(self.vehicle.mass * crate::controller::GRAVITY),
            gddot_form: self.controller.gddot_form,
        }
    }

    pub fn steps(&self) -> usize {
        (self.sim.t_end / self.sim.dt).round() as usize
    }

    pub fn steps_per_collect(&self) -> usize {
        integer_ratio(self.learning.collect_period, self.sim.dt).unwrap_or(1)
    }

    pub fn steps_per_update(&self) -> usize {
        integer_ratio(self.learning.update_period, self.sim.dt).unwrap_or(1)
    }

    /// Final switching index `n_end = update_stop_time / update_period`.
    pub fn n_end(&self) -> usize {
        (self.learning.update_stop_time / self.learning.update_period + 1e-9).floor() as usize
    }

    pub fn check_from(&self) -> f64 {
        self.bound
            .check_from
            .unwrap_or(self.n_end() as f64 * self.learning.update_period + 1.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("vehicle.mass", self.vehicle.mass)?;
        self.vehicle_params()?;

        positive("sim.dt", self.sim.dt)?;
        positive("sim.t_end", self.sim.t_end)?;
        if integer_ratio(self.sim.t_end, self.sim.dt).is_none() {
            return Err(ConfigError::invalid("sim.t_end", "must be an integer multiple of sim.dt"));
        }

        finite("initial.position", &self.initial.position)?;
        if let Some(v) = &self.initial.velocity {
            finite("initial.velocity", v)?;
        }
        if !self.trajectory.is_finite() {
            return Err(ConfigError::invalid("trajectory", "parameters must be finite"));
        }

        let l = &self.learning;
        positive("learning.collect_period", l.collect_period)?;
        positive("learning.update_period", l.update_period)?;
        if l.collect_period < self.sim.dt || integer_ratio(l.collect_period, self.sim.dt).is_none() {
            return Err(ConfigError::invalid("learning.collect_period", "must be an integer multiple of sim.dt"));
        }
        if l.update_period < l.collect_period || integer_ratio(l.update_period, self.sim.dt).is_none() {
            return Err(ConfigError::invalid(
                "learning.update_period",
                "must be at least learning.collect_period and an integer multiple of sim.dt",
            ));
        }
        if !(l.update_stop_time >= 0.0 && l.update_stop_time.is_finite()) {
            return Err(ConfigError::invalid("learning.update_stop_time", "must be nonnegative and finite"));
        }
        if l.points_per_update == 0 {
            return Err(ConfigError::invalid("learning.points_per_update", "must be at least 1"));
        }
        if !(l.noise_std >= 0.0 && l.noise_std.is_finite()) {
            return Err(ConfigError::invalid("learning.noise_std", "must be nonnegative and finite"));
        }
        if let Some(s) = l.kernel_noise_std {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(ConfigError::invalid("learning.kernel_noise_std", "must be nonnegative and finite"));
            }
        }
        if l.capacity == 0 {
            return Err(ConfigError::invalid("learning.capacity", "must be at least 1"));
        }
        if self.n_end() * l.points_per_update > l.capacity {
            return Err(ConfigError::invalid(
                "learning.capacity",
                format!("{} updates of {} points exceed the capacity {}", self.n_end(), l.points_per_update, l.capacity),
            ));
        }
        finite("learning.prior_mean", &l.prior_mean)?;
        positive("learning.lengthscale", l.lengthscale)?;
        positive("learning.signal_var", l.signal_var)?;
        if !(l.zero_oracle_rho_bar >= 0.0 && l.zero_oracle_rho_bar.is_finite()) {
            return Err(ConfigError::invalid("learning.zero_oracle_rho_bar", "must be nonnegative and finite"));
        }

        let g = &self.gains;
        if !g.g0.iter().flatten().all(|x| x.is_finite()) {
            return Err(ConfigError::invalid("gains.g0", "entries must be finite"));
        }
        if !(g.decay > 0.0 && g.decay <= 1.0) {
            return Err(ConfigError::invalid("gains.decay", format!("must lie in (0, 1], got {}", g.decay)));
        }
        let gp = g.params();
        spd("gains.gz1", &gp.gz1)?;
        spd("gains.gz2", &gp.gz2)?;
        let q_min = ((gp.q + gp.q.transpose()) * 0.5).symmetric_eigenvalues().min();
        if !(q_min > 0.0) {
            return Err(ConfigError::invalid("gains.q", "must be positive definite"));
        }

        positive("controller.u_min", self.controller.u_min)?;
        if !(self.controller.k_u >= 0.0 && self.controller.k_u.is_finite()) {
            return Err(ConfigError::invalid("controller.k_u", "must be nonnegative and finite"));
        }
        if let Some(u) = self.controller.u_hover {
            positive("controller.u_hover", u)?;
        }

        let b = &self.bound;
        if !b.beta.iter().all(|x| *x >= 0.0 && x.is_finite()) {
            return Err(ConfigError::invalid("bound.beta", "entries must be nonnegative and finite"));
        }
        if !(b.delta > 0.0 && b.delta <= 1.0) {
            return Err(ConfigError::invalid("bound.delta", "must lie in (0, 1]"));
        }
        for (name, r) in [
            ("bound.position_radius", b.position_radius),
            ("bound.velocity_radius", b.velocity_radius),
            ("bound.omega_radius", b.omega_radius),
            ("bound.attitude_radius", b.attitude_radius),
        ] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(ConfigError::invalid(name, "must be nonnegative and finite"));
            }
        }
        Ok(())
    }
}
