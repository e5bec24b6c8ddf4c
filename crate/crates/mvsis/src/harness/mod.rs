//! Experiment harness: configuration, experiment runners and CSV output.

pub mod config;
pub mod csv;
pub mod experiments;

pub use config::{ExperimentConfig, ExperimentId, ModelConfig, RawConfig};
pub use csv::{emit_csv, Report, Table};
pub use experiments::{
    estimate_lyapunov, estimate_lyapunov_paths, ordered_fraction, run_convergence_study, run_experiment,
    ExperimentOutput, LyapunovEstimate, RateFit,
};

use crate::error::Error;

/// Process exit code for an error: 2 for configuration errors, 3 for
/// numeric aborts and non-finite values, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::NumericAbort { .. } | Error::NonFinite(_) => 3,
        _ => 1,
    }
}
