use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{ActiveOracle, LogRecord, RunOutput};
use super::truth::TruthModel;
use crate::controller::{
    coupling_norms, lambda_diagnostic, xhat_dot, DesiredTrajectory, EmpiricalSups, GainCertificate, GainParams,
};
use crate::oracle::{ErrorBoundParams, Oracle};
use crate::rigid_body::{BodyState, Vec3, VehicleParams};

/// Mean and max of `‖z₀‖` over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WindowStats {
    pub from: f64,
    pub to: f64,
    pub mean: f64,
    pub max: f64,
}

fn window(log: &[LogRecord], from: f64, to: f64) -> WindowStats {
    let eps = 1e-9;
    let (sum, max, count) = log
        .iter()
        .filter(|r| r.t >= from - eps && r.t <= to + eps)
        .fold((0.0, 0.0f64, 0usize), |(s, m, c), r| (s + r.z0_norm, m.max(r.z0_norm), c + 1));
    WindowStats {
        from,
        to,
        mean: if count > 0 { sum / count as f64 } else { 0.0 },
        max,
    }
}

/// Figures derived from a log alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogMetrics {
    pub first: WindowStats,
    pub last: WindowStats,
    /// `first.mean / last.mean`
    pub improvement_ratio: f64,
    pub final_v: f64,
    pub final_bound: f64,
    /// `‖G_n‖_F` at each index `n` reached in the log.
    pub gain_norms: Vec<f64>,
    pub max_rotation_defect: f64,
    pub singular_steps: usize,
}

/// Error statistics over `[0, 2]` s and the final two seconds.
pub fn metrics(log: &[LogRecord]) -> LogMetrics {
    let t_end = log.last().map_or(0.0, |r| r.t);
    let first = window(log, 0.0, 2.0_f64.min(t_end));
    let last = window(log, (t_end - 2.0).max(0.0), t_end);
    let improvement_ratio = if last.mean > 0.0 {
        first.mean / last.mean
    } else if first.mean > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let mut gain_norms = Vec::new();
    for r in log {
        if r.n >= gain_norms.len() {
            gain_norms.resize(r.n + 1, r.gain_norm);
        }
    }
    LogMetrics {
        first,
        last,
        improvement_ratio,
        final_v: log.last().map_or(0.0, |r| r.v),
        final_bound: log.last().map_or(0.0, |r| r.bound),
        gain_norms,
        max_rotation_defect: log
            .iter()
            .map(|r| r.rotation_defect.0.max(r.rotation_defect.1))
            .fold(0.0, f64::max),
        singular_steps: log.iter().filter(|r| r.singular).count(),
    }
}

fn in_ball<R: Rng>(rng: &mut R, radius: f64) -> Vec3 {
    if radius == 0.0 {
        return Vec3::zeros();
    }
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        if v.norm_squared() <= 1.0 {
            return v * radius;
        }
    }
}

/// Sample of the compact probe set around the desired trajectory.
pub fn probe_states(cfg: &ExperimentConfig, seed: u64) -> Vec<BodyState> {
    let traj = cfg.trajectory.build();
    let b = &cfg.bound;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..b.probe_samples)
        .map(|_| {
            let t = rng.random_range(0.0..=cfg.sim.t_end);
            let des = traj.sample(t);
            let axis = in_ball(&mut rng, 1.0);
            let angle = rng.random_range(0.0..=b.attitude_radius);
            let r = Unit::try_new(axis, 1e-6)
                .map(|a| Rotation3::from_axis_angle(&a, angle).into_inner())
                .unwrap_or_else(nalgebra::Matrix3::identity);
            BodyState {
                r,
                p: des.p + in_ball(&mut rng, b.position_radius),
                omega: in_ball(&mut rng, b.omega_radius),
                v: des.v + in_ball(&mut rng, b.velocity_radius),
            }
        })
        .collect()
}

/// `max ρ̄` over `probes`.
pub fn max_error_bound<O: Oracle + ?Sized>(oracle: &O, probes: &[BodyState], ebp: &ErrorBoundParams) -> f64 {
    probes.iter().map(|s| oracle.error_bound(s, ebp)).fold(0.0, f64::max)
}

/// Sampled suprema of the coupling norms over `probes` at thrust up to `u_max`.
pub fn empirical_sups<O: Oracle + ?Sized>(
    oracle: &O,
    cert: &GainCertificate,
    gains: &GainParams,
    params: &VehicleParams,
    probes: &[BodyState],
    u_max: f64,
) -> EmpiricalSups {
    let mut sups = EmpiricalSups::default();
    for s in probes {
        let exp = oracle.expand(s);
        let x = s.x();
        let g = s.r * params.thrust_axis() * u_max;
        let v = xhat_dot(&x, &g, &exp.fhat(), cert.mass);
        let (d, e, c) = coupling_norms(cert, gains, params, &exp, &v, u_max);
        sups.d_b = sups.d_b.max(d);
        sups.e_b = sups.e_b.max(e);
        sups.c = sups.c.max(c);
    }
    sups
}

/// Per-output `β_i`: the `delta` quantile of `|y_i − μ_i| / σ_i` against the
/// true disturbance on `probes`. Outputs with no positive variance get 0.
pub fn calibrate_beta<O: Oracle + ?Sized>(oracle: &O, truth: &TruthModel, probes: &[BodyState], delta: f64) -> [f64; 6] {
    let mut ratios: [Vec<f64>; 6] = Default::default();
    for s in probes {
        let pred = oracle.predict(s);
        let y = truth.output(s);
        for i in 0..6 {
            let sd = pred.var[i].sqrt();
            if sd > 1e-12 {
                ratios[i].push((y[i] - pred.mean[i]).abs() / sd);
            }
        }
    }
    std::array::from_fn(|i| {
        let r = &mut ratios[i];
        if r.is_empty() {
            return 0.0;
        }
        r.sort_by(f64::total_cmp);
        let idx = ((delta * r.len() as f64).ceil() as usize).clamp(1, r.len()) - 1;
        r[idx]
    })
}

/// Everything reported for one run.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub oracle: String,
    pub steps: usize,
    pub t_end: f64,
    #[serde(flatten)]
    pub metrics: LogMetrics,
    pub n_end: usize,
    pub training_points: usize,
    /// `b_{n_end}`
    pub b_end: f64,
    /// `max ρ̄_{n_end}` over the probe set.
    pub rho_max: f64,
    /// `max ρ̄_{n_end} · b_{n_end}`
    pub bound: f64,
    pub bound_check_from: f64,
    pub max_z0_after_check: f64,
    pub bound_holds: bool,
    pub max_certificate_residual: f64,
    pub min_p_eigenvalue: f64,
    /// Sampled, so not a certified value.
    pub lambda_diagnostic: f64,
    pub sups: EmpiricalSups,
    pub wall_clock_s: f64,
}

/// Summarizes a completed run, evaluating the final oracle on the probe set.
pub fn summarize(cfg: &ExperimentConfig, out: &RunOutput) -> Summary {
    let m = metrics(&out.log);
    let n_end = out.log.last().map_or(0, |r| r.n);
    let cert = &out.certificates[n_end];
    let probes = probe_states(cfg, cfg.seed ^ 0x5eed_0f91_20be);
    let rho_max = max_error_bound(&out.oracle, &probes, &cfg.bound.error_bound_params());
    let bound = crate::controller::ultimate_bound(cert, rho_max);
    let check_from = cfg.check_from();
    let max_z0_after_check = out
        .log
        .iter()
        .filter(|r| r.t >= check_from - 1e-9)
        .map(|r| r.z0_norm)
        .fold(0.0, f64::max);
    let gains = cfg.gains.params();
    let params = cfg.vehicle_params().expect("validated config");
    let u_max = out.log.iter().map(|r| r.u.abs()).fold(0.0, f64::max);
    let sups = empirical_sups(&out.oracle, cert, &gains, &params, &probes, u_max);
    let oracle = match out.oracle {
        ActiveOracle::Gp(_) => "gp",
        ActiveOracle::Zero(_) => "zero",
        ActiveOracle::Linear(..) => "linear",
        ActiveOracle::Truth(_) => "truth",
    };
    Summary {
        seed: cfg.seed,
        oracle: oracle.to_string(),
        steps: out.log.len().saturating_sub(1),
        t_end: out.log.last().map_or(0.0, |r| r.t),
        metrics: m,
        n_end,
        training_points: out.dataset.len(),
        b_end: cert.b,
        rho_max,
        bound,
        bound_check_from: check_from,
        max_z0_after_check,
        bound_holds: max_z0_after_check <= bound,
        max_certificate_residual: out
            .certificates
            .iter()
            .map(|c| c.residual() / c.q.norm())
            .fold(0.0, f64::max),
        min_p_eigenvalue: out
            .certificates
            .iter()
            .map(|c| c.p.symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min),
        lambda_diagnostic: lambda_diagnostic(cert, &gains, &sups),
        sups,
        wall_clock_s: out.wall_clock,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64, z: f64, n: usize) -> LogRecord {
        LogRecord {
            t,
            p: Vec3::zeros(),
            p_d: Vec3::zeros(),
            z0_norm: z,
            v: 0.0,
            gain_norm: 0.9f64.powi(n as i32),
            u: 0.0,
            tau: Vec3::zeros(),
            n_points: 0,
            n,
            rho_bar: 0.0,
            bound: 0.0,
            z1_norm: 0.0,
            z2_norm: 0.0,
            g: Vec3::zeros(),
            g_dot: Vec3::zeros(),
            g_d_ddot: Vec3::zeros(),
            singular: false,
            rotation_defect: (0.0, 0.0),
        }
    }

    #[test]
    fn zero_log_gives_zero_metrics() {
        let log: Vec<_> = (0..=100).map(|k| record(k as f64 * 0.1, 0.0, 0)).collect();
        let m = metrics(&log);
        assert_eq!(m.first.mean, 0.0);
        assert_eq!(m.last.max, 0.0);
        assert_eq!(m.final_v, 0.0);
    }

    #[test]
    fn ratio_and_gain_sequence() {
        let log: Vec<_> = (0..=100)
            .map(|k| {
                let t = k as f64 * 0.1;
                record(t, if t <= 2.0 { 1.0 } else { 0.1 }, (t / 2.0) as usize)
            })
            .collect();
        let m = metrics(&log);
        assert!((m.improvement_ratio - 10.0).abs() < 1e-12);
        assert_eq!(m.gain_norms.len(), 6);
        assert_eq!(m.gain_norms[1], 0.9);
    }

    #[test]
    fn probes_stay_in_the_tube() {
        let cfg = ExperimentConfig::default();
        let traj = cfg.trajectory.build();
        for s in probe_states(&cfg, 3).iter().take(500) {
            s.validate().unwrap();
            let nearest = (0..=14_000)
                .map(|k| (traj.sample(k as f64 * 1e-3).p - s.p).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= cfg.bound.position_radius + 1e-3);
            assert!(s.omega.norm() <= cfg.bound.omega_radius);
        }
    }
}
