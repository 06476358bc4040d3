//! Ready-made scenarios mirroring the field experiments: a stationary
//! vehicle with markers at three ranges, a slow approach that stops short of
//! a marker, and a fast pass along a row of roadside signs.

use super::{NoiseSpec, ScenarioSpec, SpeedSegment, TargetSpec};
use crate::camera::{CalibrationFile, ExtrinsicsFile, ModelKind};
use crate::geodesy::{inverse_haversine, Bearing, EarthModel, GeoPoint};
use crate::pipeline::{DistanceMode, HeadingMode};
use crate::session::{SessionOptions, TargetKind};
use crate::sync::PoseMode;

/// Marker ranges of the stationary experiment, meters from the camera.
pub const STATIONARY_RANGES_M: [f64; 3] = [9.004, 11.78, 19.3];
/// Bearing of each stationary marker relative to the vehicle heading.
const STATIONARY_OFFSETS_DEG: [f64; 3] = [0.0, 8.0, -6.0];
const START: (f64, f64) = (63.4195, 10.4065);
const HEADING_DEG: f64 = 30.0;

pub fn start() -> GeoPoint {
    GeoPoint::new(START.0, START.1).expect("constant is a valid point")
}

/// Wide front camera: 1920×1208 f-theta lens with a 120° field of view,
/// 1.8 m ahead of the antenna at 1.5 m height, tilted 3° down.
pub fn wide_camera() -> CalibrationFile {
    CalibrationFile {
        id: "cam3".into(),
        model: ModelKind::Ftheta,
        width: 1920,
        height: 1208,
        fov_deg: 120.0,
        params: serde_json::json!({ "cx": 960.0, "cy": 604.0, "coefficients": [930.0, 0.0, -8.0] }),
        extrinsics: ExtrinsicsFile {
            x: 1.8,
            y: 0.0,
            z: 1.5,
            yaw_deg: 0.0,
            pitch_deg: 3.0,
            roll_deg: 0.0,
        },
    }
}

/// Survey-grade correction service: 2 cm position, 0.5° heading, 2 px
/// annotation noise.
pub fn cpos_noise() -> NoiseSpec {
    NoiseSpec {
        position_sigma_m: 0.02,
        heading_sigma_deg: 0.5,
        pixel_sigma_px: 2.0,
        latency_s: 0.0,
    }
}

fn options(pose_mode: PoseMode) -> SessionOptions {
    SessionOptions {
        heading_mode: HeadingMode::Ray,
        distance_mode: DistanceMode::Ground,
        pose_mode,
        ..SessionOptions::default()
    }
}

/// Point `forward_m` ahead along `heading_deg` and `right_m` to the right.
fn offset(origin: GeoPoint, heading_deg: f64, forward_m: f64, right_m: f64) -> GeoPoint {
    let bearing = Bearing::new(heading_deg + right_m.atan2(forward_m).to_degrees());
    inverse_haversine(origin, forward_m.hypot(right_m), bearing, &EarthModel::default())
        .expect("short offsets stay in range")
}

/// Ground point under the wide camera at the start.
fn camera_footprint_at_start() -> GeoPoint {
    offset(start(), HEADING_DEG, wide_camera().extrinsics.x, 0.0)
}

fn base(seed: u64, noise: NoiseSpec, pose_mode: PoseMode) -> ScenarioSpec {
    ScenarioSpec {
        seed,
        start: start(),
        heading_deg: HEADING_DEG,
        speed_profile: Vec::new(),
        duration_s: 1.0,
        gnss_hz: 5.0,
        fps: 30.0,
        cameras: vec![wide_camera()],
        targets: Vec::new(),
        noise,
        max_annotation_range_m: None,
        options: options(pose_mode),
    }
}

/// Stationary vehicle, markers at [`STATIONARY_RANGES_M`] from the camera.
pub fn stationary_markers(noise: NoiseSpec, seed: u64) -> ScenarioSpec {
    let foot = camera_footprint_at_start();
    let targets = STATIONARY_RANGES_M
        .iter()
        .zip(STATIONARY_OFFSETS_DEG)
        .enumerate()
        .map(|(i, (&range, off))| TargetSpec {
            id: format!("marker{}", i + 1),
            pos: inverse_haversine(foot, range, Bearing::new(HEADING_DEG + off), &EarthModel::default())
                .expect("short range"),
            kind: TargetKind::ControlMarker,
        })
        .collect();
    ScenarioSpec {
        targets,
        ..base(seed, noise, PoseMode::Interpolate)
    }
}

/// 10 km/h approach: the camera starts 15 m from a marker dead ahead and the
/// track ends 6 m short of it.
pub fn approach_pass(noise: NoiseSpec, seed: u64) -> ScenarioSpec {
    let speed = 10.0 / 3.6;
    let marker = offset(camera_footprint_at_start(), HEADING_DEG, 15.0, 0.0);
    ScenarioSpec {
        speed_profile: vec![SpeedSegment {
            duration_s: 9.0 / speed,
            speed_mps: speed,
        }],
        duration_s: 9.0 / speed,
        targets: vec![TargetSpec {
            id: "marker".into(),
            pos: marker,
            kind: TargetKind::ControlMarker,
        }],
        ..base(seed, noise, PoseMode::Interpolate)
    }
}

/// Constant-speed pass along four signs 3–5 m right of the lane,
/// annotated only within 15 m of the camera.
pub fn drive_by(speed_kmh: f64, noise: NoiseSpec, pose_mode: PoseMode, seed: u64) -> ScenarioSpec {
    let speed = speed_kmh / 3.6;
    let duration = 2.4;
    let signs = [(18.0, 4.0), (25.0, 5.0), (31.0, 3.5), (38.0, 4.5)];
    let targets = signs
        .iter()
        .enumerate()
        .map(|(i, &(fwd, right))| TargetSpec {
            id: format!("sign{}", i + 1),
            pos: offset(start(), HEADING_DEG, fwd, right),
            kind: TargetKind::TrafficSign,
        })
        .collect();
    ScenarioSpec {
        speed_profile: vec![SpeedSegment {
            duration_s: duration,
            speed_mps: speed,
        }],
        duration_s: duration,
        targets,
        max_annotation_range_m: Some(15.0),
        ..base(seed, noise, pose_mode)
    }
}
