use std::time::Instant;

use nalgebra::SVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, InitialAttitude, OracleKind};
use super::truth::{TruthModel, TruthOracle};
use crate::controller::{
    gain_schedule, ControlOutput, Controller, DesiredTrajectory, GainCertificate, SinusoidalTrajectory,
};
use crate::error::ExperimentError;
use crate::oracle::{
    build_training_point, optimize_hyperparameters, Dataset, ErrorBoundParams, GpModel, LeastSquaresOracle,
    MeanExpansion, Oracle, Prediction, PriorMean, TrainingPoint, ZeroOracle,
};
use crate::rigid_body::{dynamics, rk4_step, rotation_defect, BodyState, StateDerivative, Vec3, VehicleParams};

/// Switching index `n(t) = min(n_end, ⌊t / update_period⌋)`.
pub fn schedule_n(t: f64, cfg: &ExperimentConfig) -> usize {
    let raw = (t / cfg.learning.update_period + 1e-9).floor().max(0.0) as usize;
    raw.min(cfg.n_end())
}

/// One logged control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub p: Vec3,
    pub p_d: Vec3,
    pub z0_norm: f64,
    pub v: f64,
    pub gain_norm: f64,
    pub u: f64,
    pub tau: Vec3,
    pub n_points: usize,
    pub n: usize,
    pub rho_bar: f64,
    /// Running `max ρ̄ · b_n` since the last switch.
    pub bound: f64,
    pub z1_norm: f64,
    pub z2_norm: f64,
    pub g: Vec3,
    pub g_dot: Vec3,
    pub g_d_ddot: Vec3,
    pub singular: bool,
    /// `(‖RᵀR − I‖_F, |det R − 1|)`
    pub rotation_defect: (f64, f64),
}

/// The oracle currently driving the controller.
#[derive(Debug, Clone)]
pub enum ActiveOracle {
    Gp(GpModel),
    Zero(ZeroOracle),
    /// Falls back to the prior until enough points exist for a fit.
    Linear(Option<LeastSquaresOracle>, ZeroOracle),
    Truth(TruthOracle),
}

impl Oracle for ActiveOracle {
    fn predict(&self, s: &BodyState) -> Prediction {
        match self {
            ActiveOracle::Gp(m) => m.predict(s),
            ActiveOracle::Zero(z) | ActiveOracle::Linear(None, z) => z.predict(s),
            ActiveOracle::Linear(Some(l), _) => l.predict(s),
            ActiveOracle::Truth(t) => t.predict(s),
        }
    }

    fn expand(&self, s: &BodyState) -> MeanExpansion {
        match self {
            ActiveOracle::Gp(m) => m.expand(s),
            ActiveOracle::Zero(z) | ActiveOracle::Linear(None, z) => z.expand(s),
            ActiveOracle::Linear(Some(l), _) => l.expand(s),
            ActiveOracle::Truth(t) => t.expand(s),
        }
    }

    fn error_bound(&self, s: &BodyState, ebp: &ErrorBoundParams) -> f64 {
        match self {
            ActiveOracle::Gp(m) => m.error_bound(s, ebp),
            ActiveOracle::Zero(z) | ActiveOracle::Linear(None, z) => z.error_bound(s, ebp),
            ActiveOracle::Linear(Some(l), _) => l.error_bound(s, ebp),
            ActiveOracle::Truth(t) => t.error_bound(s, ebp),
        }
    }
}

/// Hyperparameter search result at one switch.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct UpdateEvent {
    pub t: f64,
    pub n: usize,
    pub n_points: usize,
    pub initial_nll: f64,
    pub final_nll: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: Vec<LogRecord>,
    /// Every collected sample, including those never appended.
    pub collected: Vec<TrainingPoint>,
    pub dataset: Dataset,
    pub oracle: ActiveOracle,
    /// Certificate for each switching index `0..=n_end`.
    pub certificates: Vec<GainCertificate>,
    pub updates: Vec<UpdateEvent>,
    pub final_state: BodyState,
    pub wall_clock: f64,
}

/// A run that aborted; `log` holds every step up to the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: ExperimentError,
    pub log: Vec<LogRecord>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} logged steps)", self.error, self.log.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<ExperimentError> for RunFailure {
    fn from(error: ExperimentError) -> Self {
        RunFailure { error, log: Vec::new() }
    }
}

/// Seed of the hyperparameter search at switch `n`.
fn optimizer_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Plant<'a> {
    params: &'a VehicleParams,
    controller: &'a Controller,
    truth: &'a TruthModel,
    traj: &'a SinusoidalTrajectory,
}

impl Plant<'_> {
    fn eval(
        &self,
        cert: &GainCertificate,
        oracle: &ActiveOracle,
        t: f64,
        s: &BodyState,
        aux: &SVector<f64, 2>,
    ) -> (StateDerivative, SVector<f64, 2>, ControlOutput) {
        let des = self.traj.sample(t);
        let exp = oracle.expand(s);
        let ctl = crate::controller::ControllerState { u: aux[0], u_dot: aux[1] };
        let out = self.controller.control_step(cert, s, &des, &exp, &ctl);
        let f = self.truth.force(&s.x());
        let f_omega = self.truth.torque(s);
        let d = dynamics(s, aux[0], &out.tau, &f, &f_omega, self.params);
        (d, SVector::<f64, 2>::new(aux[1], out.u_ddot), out)
    }
}

fn initial_oracle(cfg: &ExperimentConfig, truth: TruthModel) -> Result<ActiveOracle, ExperimentError> {
    let prior = PriorMean(cfg.learning.prior_mean);
    let zero = ZeroOracle::new(prior, cfg.learning.zero_oracle_rho_bar);
    Ok(match cfg.oracle {
        OracleKind::Gp => ActiveOracle::Gp(GpModel::empty(
            &cfg.learning.initial_kernels(),
            prior,
            cfg.learning.feature_map,
        )?),
        OracleKind::Zero => ActiveOracle::Zero(zero),
        OracleKind::Linear => ActiveOracle::Linear(None, zero),
        OracleKind::Truth => ActiveOracle::Truth(TruthOracle(truth)),
    })
}

/// Precomputes the certificate of every switching index.
pub fn certificates(cfg: &ExperimentConfig) -> Result<Vec<GainCertificate>, ExperimentError> {
    let gains = cfg.gains.params();
    (0..=cfg.n_end())
        .map(|n| gain_schedule(&gains, cfg.vehicle.mass, n).map_err(ExperimentError::from))
        .collect()
}

/// Initial plant and thrust state for `cfg` under `oracle`.
pub fn initial_state(
    cfg: &ExperimentConfig,
    controller: &Controller,
    cert: &GainCertificate,
    oracle: &ActiveOracle,
) -> (BodyState, crate::controller::ControllerState) {
    let traj = cfg.trajectory.build();
    let des = traj.sample(0.0);
    let p = Vec3::from(cfg.initial.position);
    let v = cfg.initial.velocity.map(Vec3::from).unwrap_or(des.v);
    match cfg.initial.attitude {
        InitialAttitude::Trimmed => controller.trimmed_start(cert, p, v, &des, |s| oracle.expand(s)),
        InitialAttitude::Identity => {
            let level = BodyState::at_rest(p);
            controller.identity_start(cert, p, v, &des, &oracle.expand(&BodyState { v, ..level }))
        }
    }
}

fn update_oracle(
    cfg: &ExperimentConfig,
    oracle: &mut ActiveOracle,
    dataset: &Dataset,
    batch: &[TrainingPoint],
    t: f64,
    n: usize,
    updates: &mut Vec<UpdateEvent>,
) -> Result<(), ExperimentError> {
    match oracle {
        ActiveOracle::Gp(model) => {
            let next = if cfg.learning.optimize_hyperparameters {
                let out = optimize_hyperparameters(
                    dataset.points(),
                    &model.kernels(),
                    &model.prior(),
                    model.feature_map(),
                    cfg.learning.optimizer,
                    optimizer_seed(cfg.seed, n),
                );
                updates.push(UpdateEvent {
                    t,
                    n,
                    n_points: dataset.len(),
                    initial_nll: out.initial_nll.iter().sum(),
                    final_nll: out.final_nll.iter().sum(),
                    evaluations: out.evaluations,
                });
                GpModel::fit(dataset.points(), &out.kernels, model.prior(), model.feature_map())?
            } else {
                model.update(batch)?
            };
            *model = next;
        }
        ActiveOracle::Linear(fit, _) => {
            if dataset.len() > cfg.learning.feature_map.dim() {
                *fit = Some(LeastSquaresOracle::fit(dataset.points(), cfg.learning.feature_map)?);
            }
        }
        ActiveOracle::Zero(_) | ActiveOracle::Truth(_) => {}
    }
    Ok(())
}

/// Simulates the closed loop for `cfg.sim.t_end` seconds.
pub fn run_closed_loop(cfg: &ExperimentConfig) -> Result<RunOutput, RunFailure> {
    cfg.validate().map_err(ExperimentError::from)?;
    let started = Instant::now();
    let params = cfg.vehicle_params().map_err(ExperimentError::from)?;
    let controller = Controller::new(params.clone(), cfg.gains.params(), cfg.controller_options());
    let truth = TruthModel::new(cfg.disturbance);
    let traj = cfg.trajectory.build();
    let certs = certificates(cfg)?;
    let ebp = cfg.bound.error_bound_params();
    let plant = Plant {
        params: &params,
        controller: &controller,
        truth: &truth,
        traj: &traj,
    };

    let mut oracle = initial_oracle(cfg, truth)?;
    let mut dataset = Dataset::with_capacity(cfg.learning.capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut n = 0usize;
    let (mut state, ctl0) = initial_state(cfg, &controller, &certs[0], &oracle);
    let mut aux = SVector::<f64, 2>::new(ctl0.u, ctl0.u_dot);

    let steps = cfg.steps();
    let per_collect = cfg.steps_per_collect();
    let per_update = cfg.steps_per_update();
    let n_end = cfg.n_end();
    let mut log = Vec::with_capacity(steps + 1);
    let mut collected = Vec::new();
    let mut buffer: Vec<TrainingPoint> = Vec::new();
    let mut updates = Vec::new();
    let mut rho_max = 0.0f64;

    for k in 0..=steps {
        let t = k as f64 * cfg.sim.dt;
        let mut k1 = plant.eval(&certs[n], &oracle, t, &state, &aux);

        if k > 0 && k % per_collect == 0 {
            let pt = build_training_point(
                t,
                &state,
                &k1.0.dv,
                &k1.0.domega,
                aux[0],
                &k1.2.tau,
                &params,
                cfg.learning.noise_std,
                &mut rng,
            );
            collected.push(pt);
            buffer.push(pt);
        }

        let n_next = (k / per_update).min(n_end);
        if n_next > n {
            let take = cfg.learning.points_per_update.min(buffer.len());
            let batch: Vec<TrainingPoint> = buffer[buffer.len() - take..].to_vec();
            buffer.clear();
            let res = dataset
                .extend(batch.iter().copied())
                .map_err(ExperimentError::from)
                .and_then(|_| update_oracle(cfg, &mut oracle, &dataset, &batch, t, n_next, &mut updates));
            if let Err(error) = res {
                return Err(RunFailure { error, log });
            }
            n = n_next;
            rho_max = 0.0;
            k1 = plant.eval(&certs[n], &oracle, t, &state, &aux);
        }

        let des = traj.sample(t);
        let diag = &k1.2.diagnostics;
        let rho_bar = oracle.error_bound(&state, &ebp);
        rho_max = rho_max.max(rho_bar);
        log.push(LogRecord {
            t,
            p: state.p,
            p_d: des.p,
            z0_norm: diag.z0.norm(),
            v: diag.v,
            gain_norm: certs[n].gain_norm(),
            u: aux[0],
            tau: k1.2.tau,
            n_points: dataset.len(),
            n,
            rho_bar,
            bound: rho_max * certs[n].b,
            z1_norm: diag.z1.norm(),
            z2_norm: diag.z2.norm(),
            g: diag.g,
            g_dot: diag.g_dot,
            g_d_ddot: diag.g_d_ddot,
            singular: diag.singular,
            rotation_defect: rotation_defect(&state.r),
        });
        if k == steps {
            break;
        }

        let cert = &certs[n];
        let mut first = Some((k1.0, k1.1));
        let stepped = rk4_step(t, &state, &aux, cfg.sim.dt, |tt, s, a| {
            if let Some(cached) = first.take() {
                return cached;
            }
            let (d, da, _) = plant.eval(cert, &oracle, tt, s, a);
            (d, da)
        });
        match stepped {
            Ok((s, a)) => {
                state = s;
                aux = a;
            }
            Err(e) => {
                return Err(RunFailure {
                    error: e.into(),
                    log,
                })
            }
        }
    }

    Ok(RunOutput {
        log,
        collected,
        dataset,
        oracle,
        certificates: certs,
        updates,
        final_state: state,
        wall_clock: started.elapsed().as_secs_f64(),
    })
}
