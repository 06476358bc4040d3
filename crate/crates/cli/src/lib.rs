//! The `geopin` command line: batch geolocation of annotated sessions,
//! synthetic sessions, UTM33 conversion, NVDB sign lookup and the HTTP
//! service behind the annotation tool.
//!
//! Exit codes: 0 on success, 1 when input cannot be loaded or a command
//! fails outright, 2 when a batch ran but some annotations failed.

pub mod args;
pub mod commands;
pub mod server;

use std::io::Write;
use std::path::PathBuf;

use thiserror::Error;

use geopin_core::geodesy::GeodesyError;
use geopin_core::pipeline::PipelineError;
use geopin_core::session::nvdb::NvdbError;
use geopin_core::session::SessionError;
use geopin_core::synth::SynthError;

pub use args::{Cli, Command};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
/// The batch ran and the report was written, but some annotations failed.
pub const EXIT_ANNOTATION_ERRORS: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Nvdb(#[from] NvdbError),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed input document; `field` is the JSON path of the offending value.
    #[error("{}: {field}: {message}", path.display())]
    Document {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("server: {0}")]
    Server(String),
}

/// Run a parsed command line, writing results to `out` and diagnostics to
/// `err`. Returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match cli.command {
        Command::Geolocate(a) => commands::cmd_geolocate(&a, out, err),
        Command::Synth(a) => commands::cmd_synth(&a, out, err).map(|()| EXIT_OK),
        Command::MonteCarlo(a) => commands::cmd_monte_carlo(&a, out).map(|()| EXIT_OK),
        Command::Convert(a) => commands::cmd_convert(&a, out).map(|()| EXIT_OK),
        Command::Nvdb(a) => commands::cmd_nvdb(&a, out, err).map(|()| EXIT_OK),
        Command::Serve(a) => server::cmd_serve(&a, err).map(|()| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}
