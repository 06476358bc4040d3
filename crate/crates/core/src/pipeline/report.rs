//! Batch evaluation and report export.

use std::cmp::Ordering;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{geolocate_all, DistanceMode, HeadingMode, PipelineError, TargetEstimate};
use crate::session::Session;
use crate::sync::PoseMode;

pub const DISTANCE_BIN_M: f64 = 5.0;
pub const SPEED_BIN_KMH: f64 = 10.0;
pub const DEFAULT_REPORTING_RADIUS_M: f64 = 15.0;
pub const REPORT_CSV_HEADER: [&str; 6] = [
    "target_id",
    "true_distance_m",
    "error_m",
    "speed_mps",
    "heading_mode",
    "distance_mode",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Nearest-rank 95th percentile.
    pub p95: f64,
    pub max: f64,
}

impl ErrorStats {
    /// `None` for an empty slice.
    pub fn from_errors(errors: &[f64]) -> Option<Self> {
        if errors.is_empty() {
            return None;
        }
        let mut v = errors.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        let rank = (0.95 * n as f64).ceil() as usize;
        Some(Self {
            count: n,
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            p95: v[rank.max(1) - 1],
            max: v[n - 1],
        })
    }
}

/// Statistics for rows whose key lies in `[lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub lower: f64,
    pub upper: f64,
    pub stats: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub overall: Option<ErrorStats>,
    pub reporting_radius_m: f64,
    /// Estimates whose true distance is within the reporting radius.
    pub within_reporting_radius: Option<ErrorStats>,
    /// Keyed by true distance, [`DISTANCE_BIN_M`] wide.
    pub by_distance_m: Vec<BinStats>,
    /// Keyed by vehicle speed in km/h, [`SPEED_BIN_KMH`] wide.
    pub by_speed_kmh: Vec<BinStats>,
}

/// The parts of a row that aggregation needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub true_distance_m: Option<f64>,
    pub speed_mps: f64,
    pub error_m: f64,
}

impl ErrorSample {
    /// `None` for rows without ground truth.
    pub fn from_row(r: &TargetEstimate) -> Option<Self> {
        r.error_m.map(|error_m| Self {
            true_distance_m: r.true_distance_m,
            speed_mps: r.speed_mps,
            error_m,
        })
    }
}

impl Aggregates {
    pub fn from_rows(rows: &[TargetEstimate], reporting_radius_m: f64) -> Self {
        let samples: Vec<ErrorSample> = rows.iter().filter_map(ErrorSample::from_row).collect();
        Self::from_samples(&samples, reporting_radius_m)
    }

    pub fn from_samples(samples: &[ErrorSample], reporting_radius_m: f64) -> Self {
        let errors: Vec<f64> = samples.iter().map(|s| s.error_m).collect();
        let within: Vec<f64> = samples
            .iter()
            .filter(|s| s.true_distance_m.is_some_and(|d| d <= reporting_radius_m))
            .map(|s| s.error_m)
            .collect();
        let by_distance_m = binned(
            samples.iter().filter_map(|s| s.true_distance_m.map(|d| (d, s.error_m))),
            DISTANCE_BIN_M,
        );
        let by_speed_kmh = binned(samples.iter().map(|s| (s.speed_mps * 3.6, s.error_m)), SPEED_BIN_KMH);
        Self {
            overall: ErrorStats::from_errors(&errors),
            reporting_radius_m,
            within_reporting_radius: ErrorStats::from_errors(&within),
            by_distance_m,
            by_speed_kmh,
        }
    }
}

fn binned(items: impl Iterator<Item = (f64, f64)>, width: f64) -> Vec<BinStats> {
    let mut bins: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    for (key, err) in items {
        bins.entry((key / width).floor() as i64).or_default().push(err);
    }
    bins.into_iter()
        .filter_map(|(k, errs)| {
            ErrorStats::from_errors(&errs).map(|stats| BinStats {
                lower: k as f64 * width,
                upper: (k + 1) as f64 * width,
                stats,
            })
        })
        .collect()
}

/// An annotation the pipeline could not geolocate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFailure {
    /// Position in the session's annotation list.
    pub index: usize,
    pub t: f64,
    pub camera_id: String,
    pub target_id: String,
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub heading_mode: HeadingMode,
    pub distance_mode: DistanceMode,
    pub pose_mode: PoseMode,
    /// Sorted by true distance (unknown last), then target id, then time.
    pub rows: Vec<TargetEstimate>,
    pub failures: Vec<AnnotationFailure>,
    pub aggregates: Aggregates,
}

impl EvaluationReport {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn row_order(a: &TargetEstimate, b: &TargetEstimate) -> Ordering {
    let dist = match (a.true_distance_m, b.true_distance_m) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    dist.then_with(|| a.target_id.cmp(&b.target_id)).then_with(|| a.t.total_cmp(&b.t))
}

/// Geolocate every annotation and aggregate errors against ground truth.
pub fn evaluate(session: &Session) -> Result<EvaluationReport, PipelineError> {
    if session.annotations.is_empty() {
        return Err(PipelineError::EmptySession);
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (index, (result, a)) in geolocate_all(session).into_iter().zip(&session.annotations).enumerate() {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(AnnotationFailure {
                index,
                t: a.t,
                camera_id: a.camera_id.clone(),
                target_id: a.target_id.clone(),
                error: e.name().to_string(),
                message: e.to_string(),
            }),
        }
    }
    rows.sort_by(row_order);
    let aggregates = Aggregates::from_rows(&rows, session.options.reporting_radius_m);
    Ok(EvaluationReport {
        heading_mode: session.options.heading_mode,
        distance_mode: session.options.distance_mode,
        pose_mode: session.options.pose_mode,
        rows,
        failures,
        aggregates,
    })
}

/// One line of the flat CSV report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCsvRow {
    pub target_id: String,
    pub true_distance_m: Option<f64>,
    pub error_m: Option<f64>,
    pub speed_mps: f64,
    pub heading_mode: HeadingMode,
    pub distance_mode: DistanceMode,
}

pub fn export_report_json(report: &EvaluationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn export_report_csv(report: &EvaluationReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        w.serialize(ReportCsvRow {
            target_id: r.target_id.clone(),
            true_distance_m: r.true_distance_m,
            error_m: r.error_m,
            speed_mps: r.speed_mps,
            heading_mode: report.heading_mode,
            distance_mode: report.distance_mode,
        })
        .expect("in-memory write");
    }
    if report.rows.is_empty() {
        w.write_record(REPORT_CSV_HEADER).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn read_report_csv<R: Read>(reader: R) -> Result<Vec<ReportCsvRow>, csv::Error> {
    csv::Reader::from_reader(reader).deserialize().collect()
}
