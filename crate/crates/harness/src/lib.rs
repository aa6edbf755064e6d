//! Experiment runner for the hybrid online learning engine: JSON configs,
//! seed sweeps, CSV traces, JSON summaries and regret exponent fits.

pub mod config;
pub mod error;
pub mod fit;
pub mod run;

pub use config::{ClassSpec, EnvSpec, ExperimentConfig, LossSpec, Mode, PolicySpec, SegmentSpec};
pub use error::HarnessError;
pub use fit::{fit_exponent, ExponentFit};
pub use run::{read_trace_csv, run_experiment, HorizonStat, RademacherRow, Summary, BANDIT_COLUMNS, ONLINE_COLUMNS, SCHEMA_LINE};
