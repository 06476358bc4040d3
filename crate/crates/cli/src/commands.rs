use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::de::DeserializeOwned;

use geopin_core::geodesy::{utm33_to_wgs84, wgs84_to_utm33, GeoPoint, UtmCoord};
use geopin_core::pipeline::{evaluate, export_report_csv, export_report_json, BinStats, ErrorStats, EvaluationReport};
use geopin_core::session::nvdb::{fetch_signs, NvdbConfig, UreqTransport, UtmBbox};
use geopin_core::session::{load_session, write_ground_truth_csv, Session};
use geopin_core::synth::{generate, monte_carlo, ScenarioSpec, SynthWarning};

use crate::args::{
    ConvertArgs, GeolocateArgs, MonteCarloArgs, NvdbArgs, PipelineOverrides, ReportFormat, SynthArgs,
};
use crate::{CliError, EXIT_ANNOTATION_ERRORS, EXIT_OK};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn stdout_err(source: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

/// Read a JSON document, reporting the JSON path of the first bad field.
pub fn read_json_document<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Document {
        path: path.to_path_buf(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn apply_overrides(session: &mut Session, o: &PipelineOverrides) {
    let opts = &mut session.options;
    if let Some(m) = o.heading_mode {
        opts.heading_mode = m;
    }
    if let Some(m) = o.distance_mode {
        opts.distance_mode = m;
    }
    if let Some(m) = o.pose_mode {
        opts.pose_mode = m;
    }
    if let Some(l) = o.latency {
        opts.latency_offset_s = l;
    }
}

fn stats_line(s: &ErrorStats) -> String {
    format!(
        "n {:>5}  mean {:.3}  median {:.3}  p95 {:.3}  max {:.3}",
        s.count, s.mean, s.median, s.p95, s.max
    )
}

fn bin_lines(out: &mut String, title: &str, unit: &str, bins: &[BinStats]) {
    if bins.is_empty() {
        return;
    }
    let _ = writeln!(out, "{title}:");
    for b in bins {
        let _ = writeln!(out, "  [{:>3}, {:>3}) {unit:<5} {}", b.lower, b.upper, stats_line(&b.stats));
    }
}

/// Human-readable digest of a report: counts, error statistics in meters,
/// and one line per failed annotation.
pub fn summary(report: &EvaluationReport) -> String {
    let mut s = String::new();
    let total = report.rows.len() + report.failures.len();
    let _ = writeln!(
        s,
        "geolocated {} of {total} annotations ({} failed)",
        report.rows.len(),
        report.failures.len()
    );
    match &report.aggregates.overall {
        Some(o) => {
            let _ = writeln!(s, "error_m: {}", stats_line(o));
        }
        None => {
            let _ = writeln!(s, "error_m: no annotation has a ground-truth reference");
        }
    }
    if let Some(w) = &report.aggregates.within_reporting_radius {
        let _ = writeln!(s, "within {} m: {}", report.aggregates.reporting_radius_m, stats_line(w));
    }
    bin_lines(&mut s, "by true distance", "m", &report.aggregates.by_distance_m);
    bin_lines(&mut s, "by speed", "km/h", &report.aggregates.by_speed_kmh);
    for f in &report.failures {
        let _ = writeln!(
            s,
            "annotation {} (t {}, {}, {}): {}: {}",
            f.index, f.t, f.camera_id, f.target_id, f.error, f.message
        );
    }
    s
}

pub fn cmd_geolocate(args: &GeolocateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8, CliError> {
    let mut session = load_session(&args.manifest)?;
    apply_overrides(&mut session, &args.overrides);
    let report = evaluate(&session)?;

    let format = args.format.unwrap_or_else(|| match &args.out {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => ReportFormat::Json,
        _ => ReportFormat::Csv,
    });
    let bytes = match format {
        ReportFormat::Csv => export_report_csv(&report),
        ReportFormat::Json => export_report_json(&report).into_bytes(),
    };
    let text = summary(&report);
    match &args.out {
        Some(path) => {
            write_file(path, &bytes)?;
            out.write_all(text.as_bytes()).map_err(stdout_err)?;
            writeln!(out, "report written to {}", path.display()).map_err(stdout_err)?;
        }
        None => {
            out.write_all(&bytes).map_err(stdout_err)?;
            let _ = err.write_all(text.as_bytes());
        }
    }
    Ok(if report.failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_ANNOTATION_ERRORS
    })
}

fn read_scenario(path: &Path, seed: Option<u64>) -> Result<ScenarioSpec, CliError> {
    let mut spec: ScenarioSpec = read_json_document(path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    Ok(spec)
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let spec = read_scenario(&args.spec, args.seed)?;
    let scene = generate(&spec)?;
    for w in &scene.warnings {
        match w {
            SynthWarning::NoVisibleTarget { target_id } => {
                let _ = writeln!(err, "warning: target {target_id} is never visible");
            }
        }
    }
    let manifest = scene.session.write_to(&args.out)?;
    writeln!(
        out,
        "wrote {} fixes and {} annotations to {}",
        scene.session.track.len(),
        scene.session.annotations.len(),
        manifest.display()
    )
    .map_err(stdout_err)
}

pub fn cmd_monte_carlo(args: &MonteCarloArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = read_scenario(&args.spec, args.seed)?;
    let summary = monte_carlo(&spec, args.trials)?;
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    out.write_all(json.as_bytes()).map_err(stdout_err)
}

/// Shortest decimal of `v` rounded to `decimals` places.
fn rounded(v: f64, decimals: i32) -> String {
    let scale = 10f64.powi(decimals);
    let r = (v * scale).round() / scale;
    // avoid printing "-0.0"
    format!("{:?}", if r == 0.0 { 0.0 } else { r })
}

/// Degrees to 1e-10 (about 10 µm) and meters to 1 µm, so a lat/lon that
/// goes out to UTM and back prints unchanged.
pub fn convert(args: &ConvertArgs) -> Result<String, CliError> {
    if args.to_wgs84 {
        let p = utm33_to_wgs84(UtmCoord::new(args.first, args.second))?;
        Ok(format!("{} {}", rounded(p.lat(), 10), rounded(p.lon(), 10)))
    } else {
        let u = wgs84_to_utm33(GeoPoint::new(args.first, args.second)?)?;
        Ok(format!("{} {}", rounded(u.easting, 6), rounded(u.northing, 6)))
    }
}

pub fn cmd_convert(args: &ConvertArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let line = convert(args)?;
    writeln!(out, "{line}").map_err(stdout_err)
}

pub fn parse_bbox(s: &str) -> Result<UtmBbox, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("--bbox {s:?}: {e}")))?;
    let [min_e, min_n, max_e, max_n] = v[..] else {
        return Err(CliError::Usage(format!("--bbox {s:?}: expected min_e,min_n,max_e,max_n")));
    };
    Ok(UtmBbox::new(min_e, min_n, max_e, max_n)?)
}

pub fn cmd_nvdb(args: &NvdbArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let bbox = parse_bbox(&args.bbox)?;
    let config = NvdbConfig::resolve(args.config.as_deref())?;
    let transport = UreqTransport::new(Duration::from_secs(args.timeout));
    let signs = fetch_signs(&transport, &config, &bbox)?;
    let csv = write_ground_truth_csv(&signs);
    match &args.out {
        Some(path) => {
            write_file(path, &csv)?;
            let _ = writeln!(err, "{} signs written to {}", signs.len(), path.display());
            Ok(())
        }
        None => out.write_all(&csv).map_err(stdout_err),
    }
}
