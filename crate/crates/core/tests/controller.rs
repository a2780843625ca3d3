use learnctl::controller::{
    bound_radius, desired_force, desired_force_dot, desired_force_ddot, gain_schedule, lambda_diagnostic,
    lyapunov_value, solve_lyapunov, system_matrices, xhat_dot, Controller, ControllerOptions, ControllerState,
    DesiredTrajectory, EmpiricalSups, GainCertificate, GainParams, GddotForm, SinusoidalTrajectory,
};
use learnctl::experiment::{Disturbance, TruthModel};
use learnctl::rigid_body::{dynamics, hat, BodyState, Mat3, Mat6, Vec3, Vec6, VehicleParams};
use learnctl::CertificateError;
use nalgebra::{DMatrix, Rotation3};
use proptest::prelude::*;

fn setup(gains: GainParams) -> (Controller, GainCertificate) {
    let params = VehicleParams::quadrocopter();
    let cert = gain_schedule(&gains, params.mass(), 2).unwrap();
    let options = ControllerOptions::for_vehicle(&params);
    (Controller::new(params, gains, options), cert)
}

fn state(p: [f64; 3], v: [f64; 3], w: [f64; 3], axis: [f64; 3]) -> BodyState {
    BodyState {
        r: Rotation3::from_scaled_axis(Vec3::from(axis)).into_inner(),
        p: Vec3::from(p),
        omega: Vec3::from(w),
        v: Vec3::from(v),
    }
}

/// `g_ḋ` written directly in terms of its definition.
fn g_d_dot_oracle(cert: &GainCertificate, gains: &GainParams, s: &BodyState, t: f64, g: &Vec3) -> Vec3 {
    let truth = TruthModel::new(Disturbance::WindField);
    let traj = SinusoidalTrajectory::reference();
    let d = traj.sample(t);
    let x = s.x();
    let f = truth.force(&x);
    let (a, b) = system_matrices(cert.mass);
    let xd = a * x + b * (g + f);
    let z0 = x - d.x();
    let g_d = d.a * cert.mass - cert.g * z0 - f;
    let jac = truth.expansion(s).jac_f;
    d.jerk * cert.mass - cert.g * (xd - d.x_dot()) - b.transpose() * cert.p * z0 - gains.gz1 * (g - g_d) - jac * xd
}

#[test]
fn desired_force_matches_definition() {
    let (ctl, cert) = setup(GainParams::default());
    let traj = SinusoidalTrajectory::reference();
    let truth = TruthModel::new(Disturbance::WindField);
    let s = state([0.3, -0.2, 0.1], [0.5, 0.0, -0.3], [0.1, 0.2, 0.3], [0.1, -0.1, 0.05]);
    let d = traj.sample(1.3);
    let x = s.x();
    let f = truth.force(&x);
    let expected = d.a * cert.mass - cert.g * (x - d.x()) - f;
    assert!((desired_force(&cert, &x, &d, &f) - expected).norm() < 1e-12);

    let g = Vec3::new(0.4, -0.3, 9.0);
    let got = desired_force_dot(&cert, &ctl.gains, &x, &d, &truth.expansion(&s), &g);
    assert!((got - g_d_dot_oracle(&cert, &ctl.gains, &s, 1.3, &g)).norm() < 1e-10);
}

/// Time derivative of `g_ḋ` along the estimated flow, from central differences.
fn g_d_ddot_by_differences(
    cert: &GainCertificate,
    gains: &GainParams,
    s: &BodyState,
    t: f64,
    g: &Vec3,
    g_dot: &Vec3,
) -> Vec3 {
    let truth = TruthModel::new(Disturbance::WindField);
    let v = xhat_dot(&s.x(), g, &truth.force(&s.x()), cert.mass);
    let h = 1e-5;
    let at = |sign: f64| {
        let mut shifted = *s;
        shifted.p += v.fixed_rows::<3>(0) * (sign * h);
        shifted.v += v.fixed_rows::<3>(3) * (sign * h);
        g_d_dot_oracle(cert, gains, &shifted, t + sign * h, &(g + g_dot * (sign * h)))
    };
    (at(1.0) - at(-1.0)) / (2.0 * h)
}

fn check_g_d_ddot(gains: GainParams) {
    let (ctl, cert) = setup(gains);
    let traj = SinusoidalTrajectory::reference();
    let truth = TruthModel::new(Disturbance::WindField);
    let cases = [
        (state([0.3, -0.2, 0.1], [0.5, 0.0, -0.3], [0.0; 3], [0.0; 3]), 0.7, [0.4, -0.3, 9.0], [1.0, 0.5, -2.0]),
        (state([-0.8, 0.4, 1.0], [0.1, 1.2, 0.2], [0.0; 3], [0.0; 3]), 3.1, [-1.0, 2.0, 11.0], [-0.5, 0.0, 3.0]),
        (state([1.2, 0.05, -0.5], [-0.7, 0.3, 0.9], [0.0; 3], [0.0; 3]), 9.4, [0.0, 0.0, 7.5], [2.0, -1.0, 0.0]),
    ];
    for (s, t, g, g_dot) in cases {
        let (g, g_dot) = (Vec3::from(g), Vec3::from(g_dot));
        let d = traj.sample(t);
        let x = s.x();
        let exp = truth.expansion(&s);
        let g_d = desired_force(&cert, &x, &d, &exp.fhat());
        let z1 = g - g_d;
        let z2 = g_dot - desired_force_dot(&cert, &ctl.gains, &x, &d, &exp, &g);
        let expected = g_d_ddot_by_differences(&cert, &ctl.gains, &s, t, &g, &g_dot) - ctl.gains.gz2 * z2 - z1;
        let got = desired_force_ddot(&cert, &ctl.gains, &x, &d, &exp, &g, &g_dot, GddotForm::ChainRule);
        assert!((got - expected).norm() <= 1e-6 * expected.norm().max(1.0), "{got} vs {expected}");
    }
}

#[test]
fn g_d_ddot_matches_differentiated_g_d_dot() {
    check_g_d_ddot(GainParams::default());
}

#[test]
fn g_d_ddot_without_second_stage_gain() {
    check_g_d_ddot(GainParams {
        gz2: Mat3::zeros(),
        ..GainParams::default()
    });
}

#[test]
fn printed_form_differs_only_by_thrust_rate_terms() {
    let (ctl, cert) = setup(GainParams::default());
    let d = SinusoidalTrajectory::reference().sample(2.0);
    let truth = TruthModel::new(Disturbance::WindField);
    let s = state([0.3, -0.2, 0.1], [0.5, 0.0, -0.3], [0.0; 3], [0.0; 3]);
    let exp = truth.expansion(&s);
    let g = Vec3::new(0.1, 0.2, 9.5);
    let x = s.x();
    let a = desired_force_ddot(&cert, &ctl.gains, &x, &d, &exp, &g, &Vec3::zeros(), GddotForm::ChainRule);
    let b = desired_force_ddot(&cert, &ctl.gains, &x, &d, &exp, &g, &Vec3::zeros(), GddotForm::AsPrinted);
    assert!((a - b).norm() < 1e-12);
    let g_dot = Vec3::new(1.0, -2.0, 0.5);
    let a = desired_force_ddot(&cert, &ctl.gains, &x, &d, &exp, &g, &g_dot, GddotForm::ChainRule);
    let b = desired_force_ddot(&cert, &ctl.gains, &x, &d, &exp, &g, &g_dot, GddotForm::AsPrinted);
    let (_, bm) = system_matrices(cert.mass);
    let bg = bm * g_dot;
    let expected = -(cert.g * bg) - exp.jac_f * bg;
    assert!(((a - b) - expected).norm() < 1e-10);
}

/// Applying the commanded torque and thrust acceleration to the plant must
/// reproduce `g̈ = g_d̈`.
#[test]
fn commanded_inputs_realize_desired_force_acceleration() {
    let (ctl, cert) = setup(GainParams::default());
    let truth = TruthModel::new(Disturbance::WindField);
    let traj = SinusoidalTrajectory::reference();
    let e = *ctl.params.thrust_axis();
    for (s, u, u_dot) in [
        (state([0.3, -0.2, 0.1], [0.5, 0.0, -0.3], [0.4, -0.2, 0.7], [0.2, -0.1, 0.3]), 9.0, 0.4),
        (state([-1.0, 0.5, 0.0], [0.0, 0.7, 0.1], [-1.0, 0.3, 0.0], [0.0, 0.5, -0.2]), 12.0, -2.0),
    ] {
        let exp = truth.expansion(&s);
        let out = ctl.control_step(&cert, &s, &traj.sample(4.0), &exp, &ControllerState { u, u_dot });
        assert!(!out.diagnostics.singular);
        let deriv = dynamics(&s, u, &out.tau, &exp.fhat(), &exp.fhat_omega(), &ctl.params);
        let w = hat(&s.omega);
        let wd = hat(&deriv.domega);
        let g_ddot = s.r * (w * w * e * u + wd * e * u + w * e * (2.0 * u_dot) + e * out.u_ddot);
        let target = out.diagnostics.g_d_ddot;
        assert!((g_ddot - target).norm() <= 1e-9 * target.norm().max(1.0), "{g_ddot} vs {target}");
    }
}

#[test]
fn torque_is_orthogonal_to_axis_when_gyroscopic_terms_vanish() {
    let params = VehicleParams::new(1.0, Mat3::identity(), Vec3::z()).unwrap();
    let gains = GainParams::default();
    let cert = gain_schedule(&gains, 1.0, 0).unwrap();
    let options = ControllerOptions::for_vehicle(&params);
    let ctl = Controller::new(params, gains, options);
    let s = state([0.2, 0.1, 0.0], [0.0; 3], [0.0; 3], [0.1, 0.2, 0.0]);
    let out = ctl.control_step(
        &cert,
        &s,
        &SinusoidalTrajectory::reference().sample(0.5),
        &learnctl::oracle::MeanExpansion::constant(Vec6::zeros()),
        &ControllerState { u: 9.0, u_dot: 0.0 },
    );
    assert!(out.tau.z.abs() < 1e-12);
}

#[test]
fn singular_thrust_returns_to_hover() {
    let (ctl, cert) = setup(GainParams::default());
    let s = BodyState::at_rest(Vec3::zeros());
    let out = ctl.control_step(
        &cert,
        &s,
        &SinusoidalTrajectory::reference().sample(0.0),
        &learnctl::oracle::MeanExpansion::constant(Vec6::zeros()),
        &ControllerState { u: 0.01, u_dot: 0.0 },
    );
    assert!(out.diagnostics.singular);
    assert_eq!(out.tau, Vec3::zeros());
    let o = &ctl.options;
    assert!((out.u_ddot - o.k_u * (o.u_hover - 0.01)).abs() < 1e-12);
}

#[test]
fn trimmed_start_zeroes_backstepping_errors() {
    let (ctl, cert) = setup(GainParams::default());
    let truth = TruthModel::new(Disturbance::WindField);
    let traj = SinusoidalTrajectory::reference();
    let d = traj.sample(0.0);
    let (s, c) = ctl.trimmed_start(&cert, Vec3::new(0.1, -0.1, 0.0), d.v, &d, |st| truth.expansion(st));
    s.validate().unwrap();
    let out = ctl.control_step(&cert, &s, &d, &truth.expansion(&s), &c);
    assert!(out.diagnostics.z1.norm() < 1e-10);
    assert!(out.diagnostics.z2.norm() < 1e-10);
}

#[test]
fn lyapunov_examples() {
    let p = solve_lyapunov(&(-Mat6::identity()), &(Mat6::identity() * 2.0)).unwrap();
    assert!((p - Mat6::identity()).norm() < 1e-14);
    assert_eq!(bound_radius(&p), 1.0);

    let open = GainParams {
        g0: nalgebra::Matrix3x6::zeros(),
        ..GainParams::default()
    };
    assert!(matches!(gain_schedule(&open, 1.0, 0), Err(CertificateError::NotHurwitz { .. })));

    let z = Vec6::from_element(1.0);
    let v = lyapunov_value(&Mat6::identity(), &z, &Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros());
    assert_eq!(v, 3.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn certificates_solve_the_lyapunov_equation(
        kp in prop::array::uniform3(0.5f64..50.0),
        kd in prop::array::uniform3(0.5f64..50.0),
        mass in 0.2f64..5.0,
        n in 0usize..30,
    ) {
        let mut gains = GainParams::default();
        for i in 0..3 {
            gains.g0[(i, i)] = kp[i];
            gains.g0[(i, i + 3)] = kd[i];
        }
        let cert = gain_schedule(&gains, mass, n).unwrap();
        prop_assert!(cert.residual() <= 1e-9 * cert.p.norm().max(1.0));
        prop_assert!(cert.p.symmetric_eigenvalues().min() > 0.0);
        prop_assert!((cert.p - cert.p.transpose()).norm() == 0.0);
        prop_assert!(cert.b >= 1.0);
        let expected = gains.g0.norm() * gains.decay.powi(n as i32);
        prop_assert!((cert.gain_norm() - expected).abs() <= 1e-12 * expected);
    }
}

/// Independent solution of `PA + AᵀP = −Q` by integrating `Ṗ = AᵀP + PA + Q` to steady state.
#[test]
fn lyapunov_solution_matches_integral_form() {
    let gains = GainParams::default();
    let cert = gain_schedule(&gains, 0.5, 3).unwrap();
    let a = cert.closed_loop();
    let mut p = Mat6::zeros();
    let dt = 1e-3;
    let f = |p: &Mat6| a.transpose() * p + p * a + cert.q;
    for _ in 0..40_000 {
        let k1 = f(&p);
        let k2 = f(&(p + k1 * (dt / 2.0)));
        let k3 = f(&(p + k2 * (dt / 2.0)));
        let k4 = f(&(p + k3 * dt));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    assert!((p - cert.p).norm() <= 1e-8 * cert.p.norm(), "{}", (p - cert.p).norm());
}

#[test]
fn lambda_uses_induced_norms() {
    let gains = GainParams::default();
    let cert = gain_schedule(&gains, 0.5, 0).unwrap();
    let sups = EmpiricalSups {
        d_b: 1.0,
        e_b: 2.0,
        c: 0.5,
    };
    let (_, b) = system_matrices(cert.mass);
    let pb = DMatrix::from_fn(6, 3, |i, j| (cert.p * b)[(i, j)]);
    let sigma = pb.singular_values().max();
    let min_eig = 1.0f64.min(2.0);
    let expected = (sigma + 3.5) / min_eig;
    assert!((lambda_diagnostic(&cert, &gains, &sups) - expected).abs() < 1e-10);
}
