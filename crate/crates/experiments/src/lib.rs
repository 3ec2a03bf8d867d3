//! Experiment harness for the random heat equation: decay runs, stability
//! sweeps, and scheme comparisons, with CSV traces and JSON reports.

pub mod compare;
pub mod config;
pub mod error;
pub mod run;
pub mod setup;
pub mod sweep;
pub mod trace;

pub use compare::{compare_projection_modes, compare_schemes, ProjectionRun, SchemeComparison, SchemeDiffRow};
pub use config::ExperimentConfig;
pub use error::{ExperimentError, Result};
pub use run::{run_decay, run_trajectory, DecayRun, InconclusiveReason, Outcome};
pub use setup::{initial_condition, Setup};
pub use sweep::{fit_threshold, stability_sweep, DtGrid, KFit, SweepCell, SweepReport};
pub use trace::{NormTrace, TraceRow};
