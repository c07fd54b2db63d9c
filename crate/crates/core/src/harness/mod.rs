//! Experiment orchestration: configs, seeded training, suites, audits and
//! the command-line interface.

pub mod cli;
pub mod config;
pub mod gradcheck;
pub mod snr;
pub mod suite;
pub mod train;

pub use cli::cli;
pub use config::{ExperimentConfig, MetricsConfig, OutputConfig};
pub use gradcheck::{audit_point, gradient_audit, random_phi, surrogate, AuditRow, Surrogate};
pub use snr::{snr_at, snr_sweep, sweep_objectives, SnrRow, SweepParam};
pub use suite::{evaluate_record, read_log, run_replicate, run_suite, write_summary_csv, SuiteResult};
pub use train::{keys, train, train_replicate, RunRecord, RunStatus, TracePoint};
