//! Pixel → geographic position.
//!
//! For one annotation: back-project the pixel, intersect the ray with the
//! ground plane for a range, pick a heading, sample the vehicle pose at the
//! frame time, then walk from the camera's ground footprint along that
//! heading with the inverse haversine.

mod report;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{camera_ray_to_rig, intersect_ground, Camera, CameraError, GroundHit};
use crate::geodesy::{
    linear_heading, geodesic_error, haversine_distance, inverse_haversine, ray_azimuth_heading, Bearing,
    EarthModel, GeoPoint, GeodesyError,
};
use crate::session::{AntennaOffset, Annotation, Session, SessionOptions};
use crate::sync::{pose_at, PoseSample, RigState, SyncError, Track};

pub use report::{
    evaluate, export_report_csv, export_report_json, read_report_csv, Aggregates, BinStats, ErrorStats,
    ErrorSample, EvaluationReport, ReportCsvRow, AnnotationFailure, DEFAULT_REPORTING_RADIUS_M, DISTANCE_BIN_M,
    REPORT_CSV_HEADER, SPEED_BIN_KMH,
};

/// How the target heading is obtained from the pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingMode {
    /// Column offset scaled linearly by the horizontal field of view.
    Linear,
    /// Azimuth of the calibrated back-projected ray.
    Ray,
}

/// Which ground-plane range feeds the inverse haversine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Horizontal range from the camera footprint.
    Ground,
    /// Length of the ray from the camera centre.
    Slant,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("session has no annotations")]
    EmptySession,
    #[error("unknown camera id {0:?}")]
    UnknownCamera(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
}

impl PipelineError {
    /// Stable variant name for machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Self::EmptySession => "EmptySession",
            Self::UnknownCamera(_) => "UnknownCamera",
            Self::Camera(e) => match e {
                CameraError::PixelOutOfBounds { .. } => "PixelOutOfBounds",
                CameraError::FThetaInversionFailure { .. } => "FThetaInversionFailure",
                CameraError::BehindCamera => "BehindCamera",
                CameraError::OutsideFieldOfView => "OutsideFieldOfView",
                CameraError::AboveHorizon => "AboveHorizon",
                CameraError::NegativeHeight(_) => "NegativeHeight",
                CameraError::InvalidIntrinsics(_) => "InvalidIntrinsics",
                CameraError::InvalidExtrinsics(_) => "InvalidExtrinsics",
                CameraError::InvalidDirection => "InvalidDirection",
            },
            Self::Sync(e) => match e {
                SyncError::EmptyTrack => "EmptyTrack",
                SyncError::NotIncreasing { .. } => "NotIncreasing",
                SyncError::NonFinite { .. } => "NonFinite",
                SyncError::OutOfTrack { .. } => "OutOfTrack",
                SyncError::MissingHeading { .. } => "MissingHeading",
                SyncError::StationaryAmbiguous { .. } => "StationaryAmbiguous",
                SyncError::NoNeighbors { .. } => "NoNeighbors",
                SyncError::Geodesy(g) => geodesy_name(g),
            },
            Self::Geodesy(g) => geodesy_name(g),
        }
    }
}

fn geodesy_name(e: &GeodesyError) -> &'static str {
    match e {
        GeodesyError::InvalidLatitude(_) => "InvalidLatitude",
        GeodesyError::NonFinite => "NonFinite",
        GeodesyError::CoincidentPoints => "CoincidentPoints",
        GeodesyError::PoleDegenerate => "PoleDegenerate",
        GeodesyError::InvalidDistance(_) => "InvalidDistance",
        GeodesyError::DistanceOutOfRange { .. } => "DistanceOutOfRange",
        GeodesyError::InvalidPixel { .. } => "InvalidPixel",
        GeodesyError::InvalidArgument(_) => "InvalidArgument",
        GeodesyError::VerticalRay => "VerticalRay",
        GeodesyError::OutOfProjectionDomain { .. } => "OutOfProjectionDomain",
        GeodesyError::InvalidEarthModel(_) => "InvalidEarthModel",
    }
}

/// Everything computed for one pixel at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geolocation {
    pub estimate: GeoPoint,
    /// Camera ground footprint the inverse haversine starts from.
    pub origin: GeoPoint,
    /// Range fed to the inverse haversine.
    pub distance_m: f64,
    pub bearing: Bearing,
    pub ground_hit: GroundHit,
    pub pose: PoseSample,
}

/// Geolocate pixel (`px`, `py`) of `camera` at frame time `t`.
pub fn geolocate_pixel(
    camera: &Camera,
    track: &Track,
    t: f64,
    px: f64,
    py: f64,
    options: &SessionOptions,
) -> Result<Geolocation, PipelineError> {
    let intr = &camera.intrinsics;
    let extr = &camera.extrinsics;
    let dir_cam = intr.pixel_to_ray(px, py)?;
    let ray = camera_ray_to_rig(extr, &dir_cam);
    let ground_hit = intersect_ground(&ray.origin, &ray.direction)?;
    let pose = pose_at(track, t, options.pose_mode, options.latency_offset_s)?;
    let theta_car = pose.state.theta_car.deg();

    let bearing = match options.heading_mode {
        // Extrinsic yaw turns left; the linear model wants clockwise.
        HeadingMode::Linear => linear_heading(camera.fov_deg, f64::from(intr.width()), px, -extr.yaw_deg(), theta_car)?,
        HeadingMode::Ray => ray_azimuth_heading(ray.direction.into(), theta_car)?,
    };
    let distance_m = match options.distance_mode {
        DistanceMode::Ground => ground_hit.ground_distance,
        DistanceMode::Slant => ground_hit.slant_distance,
    };
    let origin = camera_footprint(&pose.state, &extr.position(), &options.antenna_offset_m, &options.earth)?;
    let estimate = inverse_haversine(origin, distance_m, bearing, &options.earth)?;
    Ok(Geolocation {
        estimate,
        origin,
        distance_m,
        bearing,
        ground_hit,
        pose,
    })
}

/// Geographic position of the point below the camera, given the antenna
/// position reported in `state`.
pub fn camera_footprint(
    state: &RigState,
    camera_pos: &Vector3<f64>,
    antenna: &AntennaOffset,
    earth: &EarthModel,
) -> Result<GeoPoint, GeodesyError> {
    let dx = camera_pos.x - antenna.x;
    let dy = camera_pos.y - antenna.y;
    let lever = dx.hypot(dy);
    if lever == 0.0 {
        return Ok(state.pos);
    }
    let bearing = Bearing::new(state.theta_car.deg() + (-dy).atan2(dx).to_degrees());
    inverse_haversine(state.pos, lever, bearing, earth)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimateFlags {
    pub clamped: bool,
    pub heading_held: bool,
    pub across_gap: bool,
    /// The ellipsoidal error fell back to the spherical distance.
    pub geodesic_fallback: bool,
}

/// Result row for one annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub target_id: String,
    pub t: f64,
    pub camera_id: String,
    pub px: f64,
    pub py: f64,
    pub estimate: GeoPoint,
    pub origin: GeoPoint,
    pub distance_m: f64,
    pub bearing: Bearing,
    pub vehicle: RigState,
    /// Ellipsoidal distance to the reference position, when one is known.
    pub error_m: Option<f64>,
    /// Spherical distance from the camera footprint to the reference.
    pub true_distance_m: Option<f64>,
    pub speed_mps: f64,
    pub flags: EstimateFlags,
}

pub fn geolocate(session: &Session, a: &Annotation) -> Result<TargetEstimate, PipelineError> {
    let camera = session
        .cameras
        .get(&a.camera_id)
        .ok_or_else(|| PipelineError::UnknownCamera(a.camera_id.clone()))?;
    let g = geolocate_pixel(camera, &session.track, a.t, a.px, a.py, &session.options)?;
    let earth = &session.options.earth;
    let reference = session.reference_for(&a.target_id);
    let geodesic = reference.map(|r| geodesic_error(g.estimate, r.pos, earth));
    Ok(TargetEstimate {
        target_id: a.target_id.clone(),
        t: a.t,
        camera_id: a.camera_id.clone(),
        px: a.px,
        py: a.py,
        estimate: g.estimate,
        origin: g.origin,
        distance_m: g.distance_m,
        bearing: g.bearing,
        vehicle: g.pose.state,
        error_m: geodesic.map(|d| d.meters),
        true_distance_m: reference.map(|r| haversine_distance(g.origin, r.pos, earth)),
        speed_mps: g.pose.state.speed,
        flags: EstimateFlags {
            clamped: g.pose.clamped,
            heading_held: g.pose.heading_held,
            across_gap: g.pose.across_gap,
            geodesic_fallback: geodesic.is_some_and(|d| d.fallback),
        },
    })
}

/// Geolocate every annotation in parallel, preserving annotation order.
pub fn geolocate_all(session: &Session) -> Vec<Result<TargetEstimate, PipelineError>> {
    session.annotations.par_iter().map(|a| geolocate(session, a)).collect()
}
