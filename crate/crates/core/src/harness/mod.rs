//! Batch runs: configuration, sweeps, scaling fits and reports.

pub mod config;
pub mod fit;
pub mod profiles;
pub mod report;
pub mod sweep;

pub use config::{Config, InitKind, Preset, Regime, Schedule, SweepSpec};
pub use fit::{fit_scaling, orientable_comparison, FitReport, OrientableReport, TRIAL_LABEL};
pub use report::{report, CSV_HEADER, FORMATS};
pub use profiles::{run_profiles, ProfileOutcome};
pub use sweep::{read_records, run_sweep, run_trials, FiniteTrialSettings, RunRecord, RunStatus, SweepOutcome};
