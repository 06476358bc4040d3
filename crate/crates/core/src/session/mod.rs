//! Session data model and ingestion.
//!
//! A session is described by a JSON manifest that points at camera
//! calibrations, the GNSS track, the annotation log and the ground-truth
//! targets. Paths in the manifest are relative to the manifest's directory.
//!
//! ```json
//! {
//!   "cameras": ["cam3.json"],
//!   "gnss_track": "track.csv",
//!   "annotations": "annotations.csv",
//!   "ground_truth": "ground_truth.csv",
//!   "options": { "heading_mode": "linear", "distance_mode": "ground" }
//! }
//! ```
//!
//! A `cameras` entry is either a path to a calibration document or the
//! calibration document itself.

mod files;
pub mod nvdb;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CalibrationFile, Camera, CameraError};
use crate::geodesy::{EarthModel, GeoPoint, GeodesyError};
use crate::pipeline::{DistanceMode, HeadingMode};
use crate::sync::{PoseMode, SyncError, Track, EDGE_MARGIN_S};

pub use files::{
    append_annotation_csv, read_annotations_csv, read_ground_truth_csv, read_track_csv, write_annotations_csv,
    write_ground_truth_csv, write_track_csv, ANNOTATIONS_HEADER, GROUND_TRUTH_HEADER, TRACK_HEADER,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACK_FILE: &str = "track.csv";
pub const ANNOTATIONS_FILE: &str = "annotations.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: camera {id}: {source}")]
    Camera {
        path: PathBuf,
        id: String,
        #[source]
        source: CameraError,
    },
    #[error("{path}: {source}")]
    Track {
        path: PathBuf,
        #[source]
        source: SyncError,
    },
    #[error("{path}:{line}: unknown {kind} id {id:?}")]
    DanglingReference {
        path: PathBuf,
        line: u64,
        kind: &'static str,
        id: String,
    },
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{path}:{line}: pixel ({px}, {py}) is outside camera {camera_id} ({width}x{height})")]
    PixelOutOfBounds {
        path: PathBuf,
        line: u64,
        camera_id: String,
        px: f64,
        py: f64,
        width: u32,
        height: u32,
    },
    #[error("{path}:{line}: time {t} s is outside the GNSS track [{start}, {end}] s")]
    AnnotationOutsideTrack {
        path: PathBuf,
        line: u64,
        t: f64,
        start: f64,
        end: f64,
    },
    #[error("{path}:{line}: {source}")]
    Geodesy {
        path: PathBuf,
        line: u64,
        #[source]
        source: GeodesyError,
    },
}

/// One human click: which target, in which camera, at which pixel and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub t: f64,
    pub camera_id: String,
    pub px: f64,
    pub py: f64,
    pub target_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    ControlMarker,
    TrafficSign,
}

/// Where a target position came from. Road-database positions are kept
/// apart from surveyed ones and only used as ground truth on request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    #[default]
    Survey,
    Nvdb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthTarget {
    pub target_id: String,
    pub pos: GeoPoint,
    pub kind: TargetKind,
    pub source: TargetSource,
}

/// Antenna position in the rig frame (x forward, y left), meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaOffset {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionOptions {
    pub heading_mode: HeadingMode,
    pub distance_mode: DistanceMode,
    pub pose_mode: PoseMode,
    pub latency_offset_s: f64,
    pub earth: EarthModel,
    pub antenna_offset_m: AntennaOffset,
    /// Use road-database positions as ground truth.
    pub trust_nvdb: bool,
    /// Headline statistics cover targets at most this far from the camera.
    pub reporting_radius_m: f64,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            heading_mode: HeadingMode::Linear,
            distance_mode: DistanceMode::Ground,
            pose_mode: PoseMode::Interpolate,
            latency_offset_s: 0.0,
            earth: EarthModel::default(),
            antenna_offset_m: AntennaOffset::default(),
            trust_nvdb: false,
            reporting_radius_m: crate::pipeline::DEFAULT_REPORTING_RADIUS_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CameraEntry {
    Path(PathBuf),
    Inline(Box<CalibrationFile>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub cameras: Vec<CameraEntry>,
    pub gnss_track: PathBuf,
    pub annotations: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    #[serde(default)]
    pub options: SessionOptions,
    /// Free-form provenance, e.g. the generator and seed of a synthetic
    /// session. Carried through unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, SessionError> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| SessionError::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Annotation log path, resolved against the manifest location.
    pub fn annotations_path(&self, manifest_path: &Path) -> PathBuf {
        base_dir(manifest_path).join(&self.annotations)
    }
}

/// Fully validated, immutable session contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub cameras: BTreeMap<String, Camera>,
    pub track: Track,
    pub annotations: Vec<Annotation>,
    pub ground_truth: BTreeMap<String, GroundTruthTarget>,
    pub options: SessionOptions,
    pub metadata: Option<serde_json::Value>,
}

fn base_dir(manifest_path: &Path) -> &Path {
    manifest_path.parent().unwrap_or_else(|| Path::new("."))
}

fn read_text(path: &Path) -> Result<String, SessionError> {
    fs::read_to_string(path).map_err(|source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Read and cross-validate every file referenced by the manifest.
pub fn load_session(manifest_path: &Path) -> Result<Session, SessionError> {
    let manifest = Manifest::read(manifest_path)?;
    let base = base_dir(manifest_path);

    let mut cameras = BTreeMap::new();
    for entry in &manifest.cameras {
        let (path, file) = match entry {
            CameraEntry::Path(p) => {
                let path = base.join(p);
                let text = read_text(&path)?;
                let file: CalibrationFile = serde_json::from_str(&text).map_err(|e| SessionError::Json {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                (path, file)
            }
            CameraEntry::Inline(file) => (manifest_path.to_path_buf(), (**file).clone()),
        };
        let camera = Camera::from_file(&file).map_err(|source| SessionError::Camera {
            path,
            id: file.id.clone(),
            source,
        })?;
        if cameras.insert(camera.id.clone(), camera).is_some() {
            return Err(SessionError::DuplicateId {
                kind: "camera",
                id: file.id,
            });
        }
    }

    let track_path = base.join(&manifest.gnss_track);
    let fixes = read_track_csv(&track_path, fs::File::open(&track_path).map_err(io_err(&track_path))?)?;
    let track = Track::new(fixes).map_err(|source| SessionError::Track {
        path: track_path.clone(),
        source,
    })?;

    let mut ground_truth = BTreeMap::new();
    if let Some(gt) = &manifest.ground_truth {
        let gt_path = base.join(gt);
        let targets = read_ground_truth_csv(&gt_path, fs::File::open(&gt_path).map_err(io_err(&gt_path))?)?;
        for target in targets {
            let id = target.target_id.clone();
            if ground_truth.insert(id.clone(), target).is_some() {
                return Err(SessionError::DuplicateId { kind: "target", id });
            }
        }
    }

    let ann_path = base.join(&manifest.annotations);
    let rows = read_annotations_csv(&ann_path, fs::File::open(&ann_path).map_err(io_err(&ann_path))?)?;

    let mut session = Session {
        cameras,
        track,
        annotations: Vec::with_capacity(rows.len()),
        ground_truth,
        options: manifest.options,
        metadata: manifest.metadata,
    };
    for (line, annotation) in rows {
        session.validate_annotation(&annotation, &ann_path, line)?;
        session.annotations.push(annotation);
    }
    Ok(session)
}

impl Session {
    /// Check an annotation against the camera list, image bounds and track
    /// span. `path`/`line` only label the error.
    pub fn validate_annotation(&self, a: &Annotation, path: &Path, line: u64) -> Result<(), SessionError> {
        let camera = self
            .cameras
            .get(&a.camera_id)
            .ok_or_else(|| SessionError::DanglingReference {
                path: path.to_path_buf(),
                line,
                kind: "camera",
                id: a.camera_id.clone(),
            })?;
        if a.target_id.trim().is_empty() {
            return Err(SessionError::Parse {
                path: path.to_path_buf(),
                line,
                message: "empty target_id".into(),
            });
        }
        let i = &camera.intrinsics;
        if !a.px.is_finite() || !a.py.is_finite() || !i.contains(a.px, a.py) {
            return Err(SessionError::PixelOutOfBounds {
                path: path.to_path_buf(),
                line,
                camera_id: a.camera_id.clone(),
                px: a.px,
                py: a.py,
                width: i.width(),
                height: i.height(),
            });
        }
        let (start, end) = self.track.span();
        if !a.t.is_finite() || a.t < start - EDGE_MARGIN_S || a.t > end + EDGE_MARGIN_S {
            return Err(SessionError::AnnotationOutsideTrack {
                path: path.to_path_buf(),
                line,
                t: a.t,
                start,
                end,
            });
        }
        Ok(())
    }

    /// Ground truth usable for error measurement under the session options.
    pub fn reference_for(&self, target_id: &str) -> Option<&GroundTruthTarget> {
        self.ground_truth
            .get(target_id)
            .filter(|t| t.source == TargetSource::Survey || self.options.trust_nvdb)
    }

    /// Write the session as a manifest with inline cameras plus three CSV
    /// files. Returns the manifest path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, SessionError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;

        let manifest = Manifest {
            cameras: self
                .cameras
                .values()
                .map(|c| CameraEntry::Inline(Box::new(c.to_file())))
                .collect(),
            gnss_track: TRACK_FILE.into(),
            annotations: ANNOTATIONS_FILE.into(),
            ground_truth: Some(GROUND_TRUTH_FILE.into()),
            options: self.options.clone(),
            metadata: self.metadata.clone(),
        };
        let manifest_path = dir.join(MANIFEST_FILE);
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        fs::write(&manifest_path, json).map_err(io_err(&manifest_path))?;

        let write_csv = |name: &str, bytes: Vec<u8>| -> Result<(), SessionError> {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))
        };
        write_csv(TRACK_FILE, write_track_csv(self.track.fixes()))?;
        write_csv(ANNOTATIONS_FILE, write_annotations_csv(&self.annotations))?;
        write_csv(
            GROUND_TRUTH_FILE,
            write_ground_truth_csv(self.ground_truth.values()),
        )?;
        Ok(manifest_path)
    }
}
