//! Backstepping tracking controller, its gain certificate and desired trajectories.

mod gains;
mod law;
mod lyapunov;
mod trajectory;

pub use gains::{
    bound_radius, gain_schedule, lambda_diagnostic, op_norm, system_matrices, ultimate_bound,
    EmpiricalSups, GainCertificate, GainParams,
};
pub use law::{
    coupling_d, coupling_e, coupling_norms, desired_force, desired_force_ddot, desired_force_dot,
    lyapunov_value, thrust_vector, thrust_vector_rate, xhat_dot, xhat_dot_jacobian, ControlOutput,
    Controller, ControllerOptions, ControllerState, Diagnostics, GddotForm, GRAVITY,
};
pub use lyapunov::{lyapunov_residual, solve_lyapunov};
pub use trajectory::{AxisWave, DesiredTrajectory, SinusoidalTrajectory, TrajectorySample, TrajectorySpec};
