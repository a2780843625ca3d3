//! Online learning-based trajectory tracking for underactuated rigid-body vehicles.
//!
//! A Gaussian-process oracle learns unknown force and torque disturbances
//! from data collected in flight; a backstepping controller uses its mean
//! and derivatives to track a smooth position trajectory, and a Lyapunov
//! gain certificate turns the oracle's error bound into a tracking bound.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod rigid_body;

pub use error::{CertificateError, ConfigError, ExperimentError, GeometryError, IntegrationError, OracleError};
pub use rigid_body::{BodyState, Mat3, Mat3x6, Mat6, Mat6x3, StateDerivative, Vec3, Vec6, VehicleParams};
