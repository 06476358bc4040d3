use std::path::PathBuf;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use geopin_core::pipeline::{DistanceMode, HeadingMode};
use geopin_core::sync::PoseMode;

#[derive(Debug, Parser)]
#[command(name = "geopin", version, about = "Geolocate roadside objects from annotated camera frames and GNSS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Geolocate every annotation of a session and write the error report.
    Geolocate(GeolocateArgs),
    /// Generate a synthetic session from a scenario document.
    Synth(SynthArgs),
    /// Run seeded Monte-Carlo trials of a scenario and print the pooled statistics.
    MonteCarlo(MonteCarloArgs),
    /// Convert between UTM zone 33N and WGS84.
    Convert(ConvertArgs),
    /// Fetch traffic-sign positions from NVDB as a ground-truth CSV.
    Nvdb(NvdbArgs),
    /// Serve the annotation API and static UI for one session.
    Serve(ServeArgs),
}

/// Parse a snake_case enum through its serde representation.
fn serde_enum<T: DeserializeOwned + Clone + Send + Sync + 'static>(
    names: &'static [&'static str],
) -> impl TypedValueParser<Value = T> {
    PossibleValuesParser::new(names).map(|s| {
        serde_json::from_value(serde_json::Value::String(s)).expect("possible values match the serde names")
    })
}

/// Options that override the manifest's pipeline settings.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineOverrides {
    #[arg(long, value_parser = serde_enum::<HeadingMode>(&["linear", "ray"]))]
    pub heading_mode: Option<HeadingMode>,
    #[arg(long, value_parser = serde_enum::<DistanceMode>(&["ground", "slant"]))]
    pub distance_mode: Option<DistanceMode>,
    #[arg(long, value_parser = serde_enum::<PoseMode>(&["interpolate", "nearest"]))]
    pub pose_mode: Option<PoseMode>,
    /// GNSS timestamp lag in seconds; poses are sampled at t − latency.
    #[arg(long, allow_negative_numbers = true)]
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct GeolocateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to json for a `.json` output path and csv otherwise.
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
    #[command(flatten)]
    pub overrides: PipelineOverrides,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Scenario document (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Session directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Replaces the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct MonteCarloArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("direction").required(true))]
pub struct ConvertArgs {
    /// Input is `easting northing` in UTM33; prints `lat lon`.
    #[arg(long, group = "direction")]
    pub to_wgs84: bool,
    /// Input is `lat lon`; prints `easting northing` in UTM33.
    #[arg(long, group = "direction")]
    pub to_utm33: bool,
    #[arg(allow_negative_numbers = true)]
    pub first: f64,
    #[arg(allow_negative_numbers = true)]
    pub second: f64,
}

#[derive(Debug, Clone, Args)]
pub struct NvdbArgs {
    /// UTM33 box as `min_e,min_n,max_e,max_n`.
    #[arg(long, allow_negative_numbers = true)]
    pub bbox: String,
    /// Ground-truth CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON with `base_url`, `object_type`, `page_size`. `GEOPIN_NVDB_URL` overrides the URL.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30)]
    pub timeout: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Static UI assets served at `/`.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// Frame images as `<camera_id>/<t>.jpg`; defaults to `frames/` beside the manifest.
    #[arg(long)]
    pub frames: Option<PathBuf>,
}
