//! Monte Carlo experiments: configuration and presets, per-trial pipeline,
//! parallel sweeps and CSV output.

mod config;
mod csv;
mod run;

pub use config::{parse_values, ChannelModel, Detector, ExperimentConfig, SweepAxis, PRESETS};
pub use csv::{emit_csv, parse_csv, to_csv_string, CSV_HEADER};
pub use run::{aggregate, run_sweep, run_trial, DetectorOutcome, MetricsRow, TrialRecord};
