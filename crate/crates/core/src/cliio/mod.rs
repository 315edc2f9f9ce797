//! On-disk formats, run configuration and the pipeline commands.
//!
//! Every binary payload is little-endian and starts with a four-byte magic
//! and a u16 format version.

pub mod binfmt;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod grid;
pub mod manifest;
pub mod report;
pub mod signal;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint};
pub use commands::{CliError, CliResult, EXIT_FAILURE, EXIT_OK, EXIT_USAGE, THREADS_ENV};
pub use config::{load_run_config, ModelOverrides, ModelPreset, ResolvedRun, RunConfig, TrainOverrides};
pub use grid::{load_grid, save_grid};
pub use manifest::{load_manifest, save_manifest, Manifest, ManifestEntry};
pub use report::{confusion_csv, EvalDocument, TrainReport};
pub use signal::{load_labels, load_signal, save_labels, save_signal, SignalContainer};
