//! Rigid-body kinematics and dynamics on SE(3) × R⁶ and a fixed-step
//! integrator that keeps the attitude on SO(3).
//!
//! Frames: position `p` and velocity `v` live in the world frame; angular
//! velocity `omega`, the thrust axis and torques live in the body frame.

use nalgebra::{Matrix3, Rotation3, SVector, Vector3};

use crate::error::{GeometryError, IntegrationError};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec6 = nalgebra::Vector6<f64>;
pub type Mat6 = nalgebra::Matrix6<f64>;
pub type Mat3x6 = nalgebra::Matrix3x6<f64>;
pub type Mat6x3 = nalgebra::Matrix6x3<f64>;

/// Orthogonality and determinant tolerance for attitude matrices.
pub const ROTATION_TOL: f64 = 1e-9;

/// Skew-symmetric matrix with `hat(w) * v == w.cross(&v)`.
pub fn hat(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds 1e-9.
pub fn vee(s: &Mat3) -> Result<Vec3, GeometryError> {
    let sym = (s + s.transpose()) * 0.5;
    let err = sym.norm();
    if !(err <= 1e-9) {
        return Err(GeometryError::NotSkew(err));
    }
    Ok(Vec3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)]))
}

/// Nearest rotation in Frobenius norm (orthogonal polar factor).
pub fn project_so3(m: &Mat3) -> Result<Rotation3<f64>, GeometryError> {
    let det = m.determinant();
    if !(det > 0.0) {
        return Err(GeometryError::NonPositiveDeterminant(det));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(GeometryError::NonPositiveDeterminant(det)),
    };
    Ok(Rotation3::from_matrix_unchecked(u * v_t))
}

/// `‖RᵀR − I‖_F` and `|det R − 1|`.
pub fn rotation_defect(r: &Mat3) -> (f64, f64) {
    (
        (r.transpose() * r - Mat3::identity()).norm(),
        (r.determinant() - 1.0).abs(),
    )
}

/// Full vehicle state `((R, p), (ω, ṗ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub r: Mat3,
    pub p: Vec3,
    pub omega: Vec3,
    pub v: Vec3,
}

impl BodyState {
    pub fn new(r: Mat3, p: Vec3, omega: Vec3, v: Vec3) -> Result<Self, GeometryError> {
        let state = BodyState { r, p, omega, v };
        state.validate()?;
        Ok(state)
    }

    pub fn at_rest(p: Vec3) -> Self {
        BodyState {
            r: Mat3::identity(),
            p,
            omega: Vec3::zeros(),
            v: Vec3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.is_finite() {
            return Err(GeometryError::InvalidRotation("non-finite state".into()));
        }
        let (orth, det) = rotation_defect(&self.r);
        if orth > ROTATION_TOL || det > ROTATION_TOL {
            return Err(GeometryError::InvalidRotation(format!(
                "orthogonality defect {orth:.3e}, determinant defect {det:.3e}"
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().all(|x| x.is_finite())
            && self.p.iter().all(|x| x.is_finite())
            && self.omega.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
    }

    /// Translational state `x = [p; ṗ]`.
    pub fn x(&self) -> Vec6 {
        Vec6::new(self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z)
    }

    fn offset(&self, d: &StateDerivative, h: f64) -> BodyState {
        BodyState {
            r: self.r + d.dr * h,
            p: self.p + d.dp * h,
            omega: self.omega + d.domega * h,
            v: self.v + d.dv * h,
        }
    }
}

/// Mass, inertia and body-fixed thrust direction.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    mass: f64,
    inertia: Mat3,
    inertia_inv: Mat3,
    thrust_axis: Vec3,
}

impl VehicleParams {
    pub fn new(mass: f64, inertia: Mat3, thrust_axis: Vec3) -> Result<Self, GeometryError> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(GeometryError::InvalidVehicle(format!("mass {mass} must be > 0")));
        }
        if (inertia - inertia.transpose()).norm() > 1e-12 * inertia.norm().max(1.0) {
            return Err(GeometryError::InvalidVehicle("inertia is not symmetric".into()));
        }
        let min_eig = inertia.symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(GeometryError::InvalidVehicle(format!(
                "inertia is not positive definite (min eigenvalue {min_eig:.3e})"
            )));
        }
        if ((thrust_axis.norm() - 1.0).abs()) > 1e-12 {
            return Err(GeometryError::InvalidVehicle(format!(
                "thrust axis norm {} is not 1",
                thrust_axis.norm()
            )));
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| GeometryError::InvalidVehicle("inertia is singular".into()))?;
        Ok(VehicleParams {
            mass,
            inertia,
            inertia_inv,
            thrust_axis,
        })
    }

    /// The quadrocopter of the reference experiment: 1 kg, diag(2, 2, 1) kg·m², thrust along body z.
    pub fn quadrocopter() -> Self {
        VehicleParams::new(1.0, Mat3::from_diagonal(&Vec3::new(2.0, 2.0, 1.0)), Vec3::z())
            .expect("reference vehicle is valid")
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.inertia
    }

    pub fn inertia_inv(&self) -> &Mat3 {
        &self.inertia_inv
    }

    pub fn thrust_axis(&self) -> &Vec3 {
        &self.thrust_axis
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dr: Mat3,
    pub dp: Vec3,
    pub domega: Vec3,
    pub dv: Vec3,
}

impl StateDerivative {
    pub fn zero() -> Self {
        StateDerivative {
            dr: Mat3::zeros(),
            dp: Vec3::zeros(),
            domega: Vec3::zeros(),
            dv: Vec3::zeros(),
        }
    }
}

/// Gyroscopic term `(Jω) × ω` of Euler's equation.
pub fn gyroscopic(params: &VehicleParams, omega: &Vec3) -> Vec3 {
    (params.inertia() * omega).cross(omega)
}

/// Equations of motion with thrust `u`, body torque `tau` and the (unknown)
/// disturbance force `f` and torque `f_omega`.
pub fn dynamics(
    state: &BodyState,
    u: f64,
    tau: &Vec3,
    f: &Vec3,
    f_omega: &Vec3,
    params: &VehicleParams,
) -> StateDerivative {
    let thrust = state.r * params.thrust_axis() * u;
    StateDerivative {
        dr: state.r * hat(&state.omega),
        dp: state.v,
        domega: params.inertia_inv() * (gyroscopic(params, &state.omega) + tau + f_omega),
        dv: (thrust + f) / params.mass(),
    }
}

/// One classical Runge–Kutta step of the body state jointly with `K`
/// auxiliary scalar states. The attitude is re-projected onto SO(3) after
/// the step.
pub fn rk4_step<const K: usize, F>(
    t: f64,
    state: &BodyState,
    aux: &SVector<f64, K>,
    dt: f64,
    mut eval: F,
) -> Result<(BodyState, SVector<f64, K>), IntegrationError>
where
    F: FnMut(f64, &BodyState, &SVector<f64, K>) -> (StateDerivative, SVector<f64, K>),
{
    let half = 0.5 * dt;
    let (k1, a1) = eval(t, state, aux);
    let (k2, a2) = eval(t + half, &state.offset(&k1, half), &(aux + a1 * half));
    let (k3, a3) = eval(t + half, &state.offset(&k2, half), &(aux + a2 * half));
    let (k4, a4) = eval(t + dt, &state.offset(&k3, dt), &(aux + a3 * dt));

    let w = dt / 6.0;
    let blend = StateDerivative {
        dr: k1.dr + (k2.dr + k3.dr) * 2.0 + k4.dr,
        dp: k1.dp + (k2.dp + k3.dp) * 2.0 + k4.dp,
        domega: k1.domega + (k2.domega + k3.domega) * 2.0 + k4.domega,
        dv: k1.dv + (k2.dv + k3.dv) * 2.0 + k4.dv,
    };
    let mut next = state.offset(&blend, w);
    let next_aux = aux + (a1 + (a2 + a3) * 2.0 + a4) * w;

    let fail = IntegrationError { t: t + dt };
    if !next.is_finite() || next_aux.iter().any(|x| !x.is_finite()) {
        return Err(fail);
    }
    next.r = project_so3(&next.r).map_err(|_| fail.clone())?.into_inner();
    Ok((next, next_aux))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn arb_vec3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-10.0..10.0f64).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
    }

    #[test]
    fn hat_examples() {
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
        assert_eq!(
            hat(&Vec3::new(1.0, 2.0, 3.0)) * Vec3::x(),
            Vec3::new(0.0, 3.0, -2.0)
        );
    }

    #[test]
    fn vee_examples() {
        assert_eq!(vee(&Mat3::zeros()).unwrap(), Vec3::zeros());
        let w = Vec3::new(4.0, -1.0, 2.0);
        assert_eq!(vee(&hat(&w)).unwrap(), w);
        assert!(matches!(vee(&Mat3::identity()), Err(GeometryError::NotSkew(_))));
    }

    proptest! {
        #[test]
        fn hat_is_skew_and_cross(w in arb_vec3(), v in arb_vec3()) {
            let s = hat(&w);
            prop_assert_eq!(s.transpose() + s, Mat3::zeros());
            prop_assert!((s * v - w.cross(&v)).norm() <= 1e-12);
            prop_assert_eq!(vee(&s).unwrap(), w);
        }

        #[test]
        fn dynamics_is_affine_in_inputs(
            omega in arb_vec3(), v in arb_vec3(),
            u1 in -20.0..20.0f64, u2 in -20.0..20.0f64,
            t1 in arb_vec3(), t2 in arb_vec3(),
            f1 in arb_vec3(), f2 in arb_vec3(),
            g1 in arb_vec3(), g2 in arb_vec3(),
            axis in arb_vec3(), angle in -3.0..3.0f64,
        ) {
            let params = VehicleParams::quadrocopter();
            let r = if axis.norm() > 1e-3 {
                Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).into_inner()
            } else {
                Mat3::identity()
            };
            let s = BodyState { r, p: Vec3::zeros(), omega, v };
            let zero = Vec3::zeros();
            let base = dynamics(&s, 0.0, &zero, &zero, &zero, &params);
            let a = dynamics(&s, u1, &t1, &f1, &g1, &params);
            let b = dynamics(&s, u2, &t2, &f2, &g2, &params);
            let ab = dynamics(&s, u1 + u2, &(t1 + t2), &(f1 + f2), &(g1 + g2), &params);
            let scale = 1.0 + a.domega.norm() + b.domega.norm() + a.dv.norm() + b.dv.norm();
            prop_assert!((ab.dv - (a.dv + b.dv - base.dv)).norm() <= 1e-12 * scale);
            prop_assert!((ab.domega - (a.domega + b.domega - base.domega)).norm() <= 1e-12 * scale);
            prop_assert_eq!(ab.dr, base.dr);
            prop_assert_eq!(ab.dp, base.dp);
        }
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let params = VehicleParams::quadrocopter();
        let s = BodyState::at_rest(Vec3::zeros());
        let d = dynamics(
            &s,
            9.81,
            &Vec3::zeros(),
            &Vec3::new(0.0, 0.0, -9.81),
            &Vec3::zeros(),
            &params,
        );
        assert_eq!(d, StateDerivative::zero());
    }

    #[test]
    fn spin_about_principal_axis_has_no_gyroscopic_torque() {
        let params = VehicleParams::quadrocopter();
        let mut s = BodyState::at_rest(Vec3::zeros());
        s.omega = Vec3::z();
        let z = Vec3::zeros();
        let d = dynamics(&s, 0.0, &z, &z, &z, &params);
        assert_eq!(d.domega, Vec3::zeros());
    }

    #[test]
    fn projection_examples() {
        assert_relative_eq!(
            project_so3(&Mat3::identity()).unwrap().into_inner(),
            Mat3::identity(),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            project_so3(&(Mat3::identity() * 2.0)).unwrap().into_inner(),
            Mat3::identity(),
            epsilon = 1e-15
        );
        let r = Rotation3::from_euler_angles(0.3, -0.2, 1.1).into_inner();
        let noisy = r + Mat3::from_fn(|i, j| 1e-6 * ((i * 3 + j) as f64 - 4.0));
        let fixed = project_so3(&noisy).unwrap().into_inner();
        assert!((fixed.transpose() * fixed - Mat3::identity()).norm() <= 1e-12);
        let again = project_so3(&fixed).unwrap().into_inner();
        assert_relative_eq!(again, fixed, epsilon = 1e-14);
        assert!(project_so3(&-Mat3::identity()).is_err());
    }

    #[test]
    fn zero_derivative_leaves_state_unchanged() {
        let s = BodyState {
            r: Rotation3::from_euler_angles(0.1, 0.2, 0.3).into_inner(),
            p: Vec3::new(1.0, 2.0, 3.0),
            omega: Vec3::zeros(),
            v: Vec3::zeros(),
        };
        let aux = SVector::<f64, 2>::new(1.5, -0.5);
        let (next, next_aux) = rk4_step(0.0, &s, &aux, 1e-3, |_, _, _| {
            (StateDerivative::zero(), SVector::zeros())
        })
        .unwrap();
        assert_relative_eq!(next.r, s.r, epsilon = 1e-15);
        assert_eq!(next.p, s.p);
        assert_eq!(next_aux, aux);
    }

    #[test]
    fn non_finite_step_reports_time() {
        let s = BodyState::at_rest(Vec3::zeros());
        let err = rk4_step(2.0, &s, &SVector::<f64, 0>::zeros(), 0.5, |_, _, _| {
            let mut d = StateDerivative::zero();
            d.dv = Vec3::new(f64::NAN, 0.0, 0.0);
            (d, SVector::zeros())
        })
        .unwrap_err();
        assert_eq!(err.t, 2.5);
    }
}
