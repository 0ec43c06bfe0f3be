//! Experiment harness and file formats for the intensity-only array imaging
//! library.
//!
//! The `imager` binary drives four subcommands — `simulate`, `recover`,
//! `image`, and `experiment` — all configured through a single TOML document
//! (see [`config`]). The [`io`] module defines the on-disk text formats and a
//! replay oracle over recorded intensity datasets; [`experiment`] owns the
//! deterministic `(L, ε, trial)` sweep.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

pub use error::{CliError, Result};
