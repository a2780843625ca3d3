//! Closed-loop experiments: configuration, simulation, metrics and artifacts.

mod config;
mod io;
mod metrics;
mod run;
mod truth;

pub use config::{
    BoundConfig, ControllerConfig, ExperimentConfig, GainsConfig, InitialAttitude, InitialConfig, LearningConfig,
    OracleKind, OutputConfig, SimConfig, VehicleConfig,
};
pub use io::{
    atomic_write, write_artifacts, write_data_dat, write_log_csv, write_trajectory_dat, write_vk_dat, Artifacts,
    LOG_HEADER,
};
pub use metrics::{
    calibrate_beta, empirical_sups, max_error_bound, metrics, probe_states, summarize, LogMetrics, Summary,
    WindowStats,
};
pub use run::{
    certificates, initial_state, run_closed_loop, schedule_n, ActiveOracle, LogRecord, RunFailure, RunOutput,
    UpdateEvent,
};
pub use truth::{Disturbance, TruthModel, TruthOracle};
