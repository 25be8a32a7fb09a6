//! Scenario files, artifact writers and the subcommands behind the
//! `roughroad` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{markers, non_crossing, run, CommandKind, Report};
pub use config::{parse_scenario, read_scenario, Scenario, Setup};
pub use error::{CliError, Result};
pub use output::{
    emit_plot_script, profile_csv, snapshot_csv, Artifact, ArtifactSink, Manifest, PlotStyle,
};
