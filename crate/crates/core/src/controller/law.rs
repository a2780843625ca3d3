//! Backstepping tracking law with a dynamic thrust extension.
//!
//! Error coordinates: `z₀ = x − x_d`, `z₁ = g − g_d`, `z₂ = ġ − g_ḋ`, where
//! `g = R·e·u` is the virtual force input.

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use super::gains::{op_norm, system_matrices, GainCertificate, GainParams};
use super::trajectory::TrajectorySample;
use crate::oracle::MeanExpansion;
use crate::rigid_body::{gyroscopic, hat, BodyState, Mat3, Mat3x6, Mat6, Vec3, Vec6, VehicleParams};

pub const GRAVITY: f64 = 9.81;

/// Which expression to use for the second derivative of the desired force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GddotForm {
    /// Differentiates `x̂˙` through its dependence on `g` as well as `x`.
    #[default]
    ChainRule,
    /// Treats `x̂˙` as a function of `x` only.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub u: f64,
    pub u_dot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerOptions {
    /// Thrust magnitude below which the torque law is suspended.
    pub u_min: f64,
    /// Restoring rate toward `u_hover` inside the guard.
    pub k_u: f64,
    pub u_hover: f64,
    pub gddot_form: GddotForm,
}

impl Default for ControllerOptions {
    fn default() -> Self {
        ControllerOptions {
            u_min: 0.1,
            k_u: 50.0,
            u_hover: GRAVITY,
            gddot_form: GddotForm::ChainRule,
        }
    }
}

impl ControllerOptions {
    pub fn for_vehicle(params: &VehicleParams) -> Self {
        ControllerOptions {
            u_hover: params.mass() * GRAVITY,
            ..Default::default()
        }
    }
}

/// Internal quantities of one control evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub z0: Vec6,
    pub z1: Vec3,
    pub z2: Vec3,
    pub v: f64,
    pub g: Vec3,
    pub g_dot: Vec3,
    pub g_d: Vec3,
    pub g_d_dot: Vec3,
    pub g_d_ddot: Vec3,
    pub xhat_dot: Vec6,
    pub singular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub tau: Vec3,
    pub u_ddot: f64,
    pub diagnostics: Diagnostics,
}

/// `A·x + B·(g + f̂)`.
pub fn xhat_dot(x: &Vec6, g: &Vec3, fhat: &Vec3, mass: f64) -> Vec6 {
    let (a, b) = system_matrices(mass);
    a * x + b * (g + fhat)
}

/// `∂x̂˙/∂x = A + B·∂f̂/∂x`.
pub fn xhat_dot_jacobian(jac_f: &Mat3x6, mass: f64) -> Mat6 {
    let (a, b) = system_matrices(mass);
    a + b * jac_f
}

/// `g_d = m·p̈_d − G·z₀ − f̂`.
pub fn desired_force(cert: &GainCertificate, x: &Vec6, des: &TrajectorySample, fhat: &Vec3) -> Vec3 {
    des.a * cert.mass - cert.g * (x - des.x()) + -fhat
}

/// `g_ḋ = m·p⁽³⁾_d − G(x̂˙ − ẋ_d) − BᵀP·z₀ − G_z1·z₁ − (∂f̂/∂x)·x̂˙`.
pub fn desired_force_dot(
    cert: &GainCertificate,
    gains: &GainParams,
    x: &Vec6,
    des: &TrajectorySample,
    exp: &MeanExpansion,
    g: &Vec3,
) -> Vec3 {
    let fhat = exp.fhat();
    let xd = xhat_dot(x, g, &fhat, cert.mass);
    let z0 = x - des.x();
    let z1 = g - desired_force(cert, x, des, &fhat);
    des.jerk * cert.mass - cert.g * (xd - des.x_dot()) - cert.bt_p() * z0 - gains.gz1 * z1 - exp.jac_f * xd
}

/// Second derivative of the desired force, stabilizing `z₂` with `G_z2`.
#[allow(clippy::too_many_arguments)]
pub fn desired_force_ddot(
    cert: &GainCertificate,
    gains: &GainParams,
    x: &Vec6,
    des: &TrajectorySample,
    exp: &MeanExpansion,
    g: &Vec3,
    g_dot: &Vec3,
    form: GddotForm,
) -> Vec3 {
    let m = cert.mass;
    let (_, b) = system_matrices(m);
    let fhat = exp.fhat();
    let f = &exp.jac_f;
    let v = xhat_dot(x, g, &fhat, m);
    let jv = xhat_dot_jacobian(f, m);
    let z0 = x - des.x();
    let btp_z0 = cert.bt_p() * z0;
    let gz = gains.gz1 + gains.gz2;
    let gz21 = gains.gz2 * gains.gz1 + Mat3::identity();

    let mut v_dot = jv * v;
    let mut sec = exp.second_term(&v, &jv);
    if form == GddotForm::ChainRule {
        let bg = b * g_dot;
        v_dot += bg;
        sec += f * bg;
    }

    des.snap * m
        - cert.g * (v_dot - des.x_ddot())
        - cert.bt_p() * (v - des.x_dot())
        - gz * (g_dot - des.jerk * m + cert.g * (v - des.x_dot()) + f * v)
        - gz21 * (g - des.a * m + cert.g * z0 + fhat)
        - gains.gz2 * btp_z0
        - sec
}

/// `V = ½z₀ᵀPz₀ + ½|z₁|² + ½|z₂|²`.
pub fn lyapunov_value(p: &Mat6, z0: &Vec6, z1: &Vec3, z2: &Vec3) -> f64 {
    0.5 * (z0.dot(&(p * z0)) + z1.norm_squared() + z2.norm_squared())
}

/// `g = R·e·u`.
pub fn thrust_vector(r: &Mat3, e: &Vec3, u: f64) -> Vec3 {
    r * e * u
}

/// `ġ = R(ω̌·e·u + e·u̇)`.
pub fn thrust_vector_rate(r: &Mat3, omega: &Vec3, e: &Vec3, u: f64, u_dot: f64) -> Vec3 {
    r * (omega.cross(e) * u + e * u_dot)
}

/// `D(x) = ∂f̂/∂x + G`.
pub fn coupling_d(cert: &GainCertificate, exp: &MeanExpansion) -> Mat3x6 {
    exp.jac_f + cert.g
}

/// `E(x) = BᵀP + G_z1·D + G·∂x̂˙/∂x + ∂/∂x[(∂f̂/∂x)·x̂˙]`.
pub fn coupling_e(cert: &GainCertificate, gains: &GainParams, exp: &MeanExpansion, v: &Vec6) -> Mat3x6 {
    let jv = xhat_dot_jacobian(&exp.jac_f, cert.mass);
    cert.bt_p() + gains.gz1 * coupling_d(cert, exp) + cert.g * jv + exp.second_term_jacobian(v, &jv)
}

/// `(‖D·B‖, ‖E·B‖, c)` at one state; `c = ‖J⁻¹‖·|u|` couples the torque error into `g̈`.
pub fn coupling_norms(
    cert: &GainCertificate,
    gains: &GainParams,
    params: &VehicleParams,
    exp: &MeanExpansion,
    v: &Vec6,
    u: f64,
) -> (f64, f64, f64) {
    let (_, b) = system_matrices(cert.mass);
    let db = coupling_d(cert, exp) * b;
    let eb = coupling_e(cert, gains, exp, v) * b;
    (op_norm(&db), op_norm(&eb), op_norm(params.inertia_inv()) * u.abs())
}

/// Tracking controller bound to one vehicle and gain family.
#[derive(Debug, Clone)]
pub struct Controller {
    pub params: VehicleParams,
    pub gains: GainParams,
    pub options: ControllerOptions,
}

impl Controller {
    pub fn new(params: VehicleParams, gains: GainParams, options: ControllerOptions) -> Self {
        Controller { params, gains, options }
    }

    /// Evaluates the law. `exp` is the oracle expansion at `state`.
    pub fn control_step(
        &self,
        cert: &GainCertificate,
        state: &BodyState,
        des: &TrajectorySample,
        exp: &MeanExpansion,
        ctl: &ControllerState,
    ) -> ControlOutput {
        let e = self.params.thrust_axis();
        let x = state.x();
        let fhat = exp.fhat();
        let g = thrust_vector(&state.r, e, ctl.u);
        let g_dot = thrust_vector_rate(&state.r, &state.omega, e, ctl.u, ctl.u_dot);
        let g_d = desired_force(cert, &x, des, &fhat);
        let g_d_dot = desired_force_dot(cert, &self.gains, &x, des, exp, &g);
        let g_d_ddot = desired_force_ddot(cert, &self.gains, &x, des, exp, &g, &g_dot, self.options.gddot_form);
        let z0 = x - des.x();
        let z1 = g - g_d;
        let z2 = g_dot - g_d_dot;
        let singular = ctl.u.abs() < self.options.u_min;
        let (tau, u_ddot) = if singular {
            (Vec3::zeros(), self.options.k_u * (self.options.u_hover - ctl.u))
        } else {
            let wx = hat(&state.omega);
            let w = state.r.transpose() * g_d_ddot - wx * wx * e * ctl.u - wx * e * (2.0 * ctl.u_dot);
            let omega_dot = e.cross(&w) / ctl.u;
            let tau = self.params.inertia() * omega_dot - gyroscopic(&self.params, &state.omega) - exp.fhat_omega();
            (tau, e.dot(&w))
        };
        ControlOutput {
            tau,
            u_ddot,
            diagnostics: Diagnostics {
                z0,
                z1,
                z2,
                v: lyapunov_value(&cert.p, &z0, &z1, &z2),
                g,
                g_dot,
                g_d,
                g_d_dot,
                g_d_ddot,
                xhat_dot: xhat_dot(&x, &g, &fhat, cert.mass),
                singular,
            },
        }
    }

    /// Attitude, body rate and thrust state with `z₁ = z₂ = 0` at the given
    /// position and velocity. `expand` evaluates the oracle at a candidate state.
    pub fn trimmed_start<F>(
        &self,
        cert: &GainCertificate,
        p: Vec3,
        v: Vec3,
        des: &TrajectorySample,
        expand: F,
    ) -> (BodyState, ControllerState)
    where
        F: Fn(&BodyState) -> MeanExpansion,
    {
        let e = *self.params.thrust_axis();
        let level = BodyState {
            r: Mat3::identity(),
            p,
            omega: Vec3::zeros(),
            v,
        };
        let exp = expand(&level);
        let x = level.x();
        let g_d = desired_force(cert, &x, des, &exp.fhat());
        let u = g_d.norm();
        if u < self.options.u_min {
            return (level, ControllerState { u: self.options.u_min, u_dot: 0.0 });
        }
        let r = Rotation3::rotation_between(&e, &g_d)
            .unwrap_or_else(|| Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI))
            .into_inner();
        let g_d_dot = desired_force_dot(cert, &self.gains, &x, des, &exp, &g_d);
        let c = r.transpose() * g_d_dot;
        let state = BodyState {
            r,
            p,
            omega: e.cross(&c) / u,
            v,
        };
        (state, ControllerState { u, u_dot: e.dot(&c) })
    }

    /// Level attitude at rest in body rates, thrust set to the demanded axial force.
    pub fn identity_start(
        &self,
        cert: &GainCertificate,
        p: Vec3,
        v: Vec3,
        des: &TrajectorySample,
        exp: &MeanExpansion,
    ) -> (BodyState, ControllerState) {
        let state = BodyState {
            r: Mat3::identity(),
            p,
            omega: Vec3::zeros(),
            v,
        };
        let g_d = desired_force(cert, &state.x(), des, &exp.fhat());
        let u = self.params.thrust_axis().dot(&(state.r.transpose() * g_d)).max(self.options.u_min);
        (state, ControllerState { u, u_dot: 0.0 })
    }
}
