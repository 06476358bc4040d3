//! CSV readers and writers for session data.
//!
//! Every file starts with a fixed header. Floats are written in their
//! shortest round-trip form so load → write → load reproduces the same
//! values and the same bytes.

use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{Annotation, GroundTruthTarget, SessionError, TargetKind, TargetSource};
use crate::geodesy::{utm33_to_wgs84, GeoPoint, UtmCoord};
use crate::sync::{FixQuality, GnssFix};

pub const TRACK_HEADER: [&str; 6] = ["t", "lat", "lon", "heading", "speed", "quality"];
pub const ANNOTATIONS_HEADER: [&str; 5] = ["t", "camera_id", "px", "py", "target_id"];
pub const GROUND_TRUTH_HEADER: [&str; 7] = ["target_id", "kind", "lat", "lon", "easting", "northing", "source"];

#[derive(Deserialize)]
struct TrackRow {
    t: f64,
    lat: f64,
    lon: f64,
    heading: Option<f64>,
    speed: Option<f64>,
    quality: FixQuality,
}

#[derive(Deserialize)]
struct GroundTruthRow {
    target_id: String,
    kind: TargetKind,
    lat: Option<f64>,
    lon: Option<f64>,
    easting: Option<f64>,
    northing: Option<f64>,
    source: Option<TargetSource>,
}

/// Rows paired with their 1-based line numbers.
fn read_rows<T: DeserializeOwned, R: Read>(
    path: &Path,
    reader: R,
    header: &[&str],
) -> Result<Vec<(u64, T)>, SessionError> {
    let parse_err = |line: u64, message: String| SessionError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().ne(header.iter().copied()) {
        return Err(parse_err(
            1,
            format!("expected header {:?}, found {:?}", header.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(line, e.to_string()))?;
        out.push((line, row));
    }
    Ok(out)
}

pub fn read_track_csv<R: Read>(path: &Path, reader: R) -> Result<Vec<GnssFix>, SessionError> {
    read_rows::<TrackRow, _>(path, reader, &TRACK_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let pos = GeoPoint::new(r.lat, r.lon).map_err(|source| SessionError::Geodesy {
                path: path.to_path_buf(),
                line,
                source,
            })?;
            Ok(GnssFix {
                t: r.t,
                pos,
                heading: r.heading,
                speed: r.speed,
                quality: r.quality,
            })
        })
        .collect()
}

pub fn read_annotations_csv<R: Read>(path: &Path, reader: R) -> Result<Vec<(u64, Annotation)>, SessionError> {
    read_rows(path, reader, &ANNOTATIONS_HEADER)
}

/// Each row carries either lat/lon or UTM33 easting/northing, not both.
pub fn read_ground_truth_csv<R: Read>(path: &Path, reader: R) -> Result<Vec<GroundTruthTarget>, SessionError> {
    read_rows::<GroundTruthRow, _>(path, reader, &GROUND_TRUTH_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let geo_err = |source| SessionError::Geodesy {
                path: path.to_path_buf(),
                line,
                source,
            };
            let pos = match (r.lat, r.lon, r.easting, r.northing) {
                (Some(lat), Some(lon), None, None) => GeoPoint::new(lat, lon).map_err(geo_err)?,
                (None, None, Some(e), Some(n)) => utm33_to_wgs84(UtmCoord::new(e, n)).map_err(geo_err)?,
                _ => {
                    return Err(SessionError::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: "give exactly one of lat/lon or easting/northing".into(),
                    })
                }
            };
            if r.target_id.is_empty() {
                return Err(SessionError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: "empty target_id".into(),
                });
            }
            Ok(GroundTruthTarget {
                target_id: r.target_id,
                pos,
                kind: r.kind,
                source: r.source.unwrap_or_default(),
            })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn quality_str(q: FixQuality) -> &'static str {
    match q {
        FixQuality::RtkFixed => "rtk_fixed",
        FixQuality::RtkFloat => "rtk_float",
        FixQuality::Single => "single",
    }
}

fn kind_str(k: TargetKind) -> &'static str {
    match k {
        TargetKind::ControlMarker => "control_marker",
        TargetKind::TrafficSign => "traffic_sign",
    }
}

fn source_str(s: TargetSource) -> &'static str {
    match s {
        TargetSource::Survey => "survey",
        TargetSource::Nvdb => "nvdb",
    }
}

fn to_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_track_csv(fixes: &[GnssFix]) -> Vec<u8> {
    to_bytes(
        &TRACK_HEADER,
        fixes.iter().map(|f| {
            [
                f.t.to_string(),
                f.pos.lat().to_string(),
                f.pos.lon().to_string(),
                opt(f.heading),
                opt(f.speed),
                quality_str(f.quality).to_string(),
            ]
        }),
    )
}

fn annotation_row(a: &Annotation) -> [String; 5] {
    [
        a.t.to_string(),
        a.camera_id.clone(),
        a.px.to_string(),
        a.py.to_string(),
        a.target_id.clone(),
    ]
}

pub fn write_annotations_csv(annotations: &[Annotation]) -> Vec<u8> {
    to_bytes(&ANNOTATIONS_HEADER, annotations.iter().map(annotation_row))
}

pub fn write_ground_truth_csv<'a>(targets: impl IntoIterator<Item = &'a GroundTruthTarget>) -> Vec<u8> {
    to_bytes(
        &GROUND_TRUTH_HEADER,
        targets.into_iter().map(|g| {
            [
                g.target_id.clone(),
                kind_str(g.kind).to_string(),
                g.pos.lat().to_string(),
                g.pos.lon().to_string(),
                String::new(),
                String::new(),
                source_str(g.source).to_string(),
            ]
        }),
    )
}

/// Append one annotation to a log, writing the header if the file is new
/// or empty.
pub fn append_annotation_csv(path: &Path, annotation: &Annotation) -> Result<(), SessionError> {
    let io = |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    let fresh = file.metadata().map_err(io)?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    if fresh {
        w.write_record(ANNOTATIONS_HEADER).expect("in-memory write");
    }
    w.write_record(annotation_row(annotation)).expect("in-memory write");
    let bytes = w.into_inner().expect("in-memory flush");
    file.write_all(&bytes).map_err(io)?;
    file.sync_data().map_err(io)
}
