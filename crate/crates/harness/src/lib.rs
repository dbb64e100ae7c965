//! Experiment runner for the KRK classifiers: single runs, parameter
//! sweeps, comparison against bundled reference accuracies, and the
//! `krk` command-line tool built on them.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod presets;
pub mod reference;
pub mod report;
pub mod sweep;

pub use config::{ConfigError, DatasetSource, ExperimentConfig, FastCaps, ModelSpec, ResolvedConfig};
pub use dataset::Dataset;
pub use experiment::{run_experiment, run_resolved, ExperimentError, ExperimentOutcome, ResultRow, Stage};
pub use reference::{compare_to_reference, grid_trend, Band, CompareError, ComparisonReport, ReferenceSet, Tolerances};
pub use sweep::{run_sweep, Axis, CellResult, CellStatus, SweepGrid, SweepOptions, SweepReport};
