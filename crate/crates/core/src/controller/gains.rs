use crate::error::CertificateError;
use crate::rigid_body::{Mat3, Mat3x6, Mat6, Mat6x3, Vec3};

use super::lyapunov::{lyapunov_residual, solve_lyapunov};

/// `A = [0 I; 0 0]`, `B = [0; I/m]` of the translational double integrator.
pub fn system_matrices(mass: f64) -> (Mat6, Mat6x3) {
    let mut a = Mat6::zeros();
    let mut b = Mat6x3::zeros();
    for i in 0..3 {
        a[(i, i + 3)] = 1.0;
        b[(i + 3, i)] = 1.0 / mass;
    }
    (a, b)
}

/// Feedback gains and their decay law `G_n = γⁿ·G₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainParams {
    pub g0: Mat3x6,
    pub decay: f64,
    pub gz1: Mat3,
    pub gz2: Mat3,
    pub q: Mat6,
}

impl Default for GainParams {
    /// `G₀ = [diag(10,10,40), diag(10,10,10)]`, `G_z1 = G_z2 = 2I`, `γ = 0.9`, `Q = I`.
    fn default() -> Self {
        let mut g0 = Mat3x6::zeros();
        g0.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&Mat3::from_diagonal(&Vec3::new(10.0, 10.0, 40.0)));
        g0.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&Mat3::from_diagonal(&Vec3::new(10.0, 10.0, 10.0)));
        GainParams {
            g0,
            decay: 0.9,
            gz1: Mat3::identity() * 2.0,
            gz2: Mat3::identity() * 2.0,
            q: Mat6::identity(),
        }
    }
}

impl GainParams {
    pub fn gain(&self, n: usize) -> Mat3x6 {
        self.g0 * self.decay.powi(n as i32)
    }
}

/// `(G_n, P_n, Q_n)` satisfying the closed-loop Lyapunov equation, with the
/// bound radius `b_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCertificate {
    pub n: usize,
    pub g: Mat3x6,
    pub p: Mat6,
    pub q: Mat6,
    pub b: f64,
    pub mass: f64,
}

impl GainCertificate {
    pub fn closed_loop(&self) -> Mat6 {
        let (a, b) = system_matrices(self.mass);
        a - b * self.g
    }

    pub fn residual(&self) -> f64 {
        lyapunov_residual(&self.p, &self.closed_loop(), &self.q)
    }

    pub fn gain_norm(&self) -> f64 {
        self.g.norm()
    }

    /// `Bᵀ·P_n` (3×6).
    pub fn bt_p(&self) -> Mat3x6 {
        let (_, b) = system_matrices(self.mass);
        b.transpose() * self.p
    }
}

/// `b = sqrt(max{eig(P), 1} / min{eig(P), 1})`.
pub fn bound_radius(p: &Mat6) -> f64 {
    let eig = p.symmetric_eigenvalues();
    (eig.max().max(1.0) / eig.min().min(1.0)).sqrt()
}

/// Certificate for switching index `n`.
pub fn gain_schedule(params: &GainParams, mass: f64, n: usize) -> Result<GainCertificate, CertificateError> {
    let (a, b) = system_matrices(mass);
    let g = params.gain(n);
    let p = solve_lyapunov(&(a - b * g), &params.q)?;
    Ok(GainCertificate {
        n,
        g,
        b: bound_radius(&p),
        p,
        q: params.q,
        mass,
    })
}

/// Tracking error radius `max ρ̄ · b_n`.
pub fn ultimate_bound(cert: &GainCertificate, rho_max: f64) -> f64 {
    rho_max * cert.b
}

/// Sampled suprema of `‖D(x)B‖`, `‖E(x)B‖` and the torque-error coupling `c̄`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct EmpiricalSups {
    pub d_b: f64,
    pub e_b: f64,
    pub c: f64,
}

/// Induced 2-norm of a matrix with three columns.
pub fn op_norm<R: nalgebra::Dim, S>(m: &nalgebra::Matrix<f64, R, nalgebra::U3, S>) -> f64
where
    S: nalgebra::Storage<f64, R, nalgebra::U3>,
{
    let gram = Mat3::from_fn(|i, j| m.column(i).dot(&m.column(j)));
    gram.symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// Radius factor `λ_n = (‖P_nB‖ + ‖D̄B‖ + ‖ĒB‖ + c̄) / min{eig(Q_n), eig(G_z1), eig(G_z2)}`.
/// The suprema are sampled, so this is a diagnostic rather than a certified value.
pub fn lambda_diagnostic(cert: &GainCertificate, gains: &GainParams, sups: &EmpiricalSups) -> f64 {
    let (_, b) = system_matrices(cert.mass);
    let pb = op_norm(&(cert.p * b));
    let min_eig = [
        cert.q.symmetric_eigenvalues().min(),
        gains.gz1.symmetric_eigenvalues().min(),
        gains.gz2.symmetric_eigenvalues().min(),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    (pb + sups.d_b + sups.e_b + sups.c) / min_eig
}
