//! Synthetic scenes with known truth, and a Monte-Carlo harness on top.
//!
//! The vehicle drives a great circle from `start` at the initial heading
//! with a piecewise-constant speed profile. GNSS fixes sample the true state
//! (plus noise and a constant timestamp lag); annotations come from
//! projecting every target through every camera at the true state of each
//! frame. Generated sessions are ordinary [`Session`]s.
//!
//! Random draws come from ChaCha8, keyed by (seed, stream). A single
//! [`generate`] call uses stream 0; Monte-Carlo trial `i` uses stream `i`, so
//! trial 0 reproduces [`generate`] and results do not depend on scheduling.
//! Every noise term is drawn even when its σ is zero, which keeps the
//! streams aligned across noise levels.

pub mod presets;

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{camera_ray_to_rig, intersect_ground, CalibrationFile, Camera, CameraError};
use crate::geodesy::{
    haversine_distance, initial_bearing, inverse_haversine, Bearing, EarthModel, GeoPoint, GeodesyError,
};
use crate::pipeline::{camera_footprint, evaluate, Aggregates, ErrorSample, ErrorStats, PipelineError};
use crate::session::{Annotation, GroundTruthTarget, Session, SessionOptions, TargetKind, TargetSource};
use crate::sync::{FixQuality, GnssFix, RigState, SyncError, Track};

pub const RNG_NAME: &str = "ChaCha8";
const DEFAULT_GNSS_HZ: f64 = 5.0;
const DEFAULT_FPS: f64 = 30.0;
/// Look-ahead used to read the great-circle course at a point.
const COURSE_PROBE_M: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("camera {id}: {source}")]
    Camera {
        id: String,
        #[source]
        source: CameraError,
    },
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedSegment {
    pub duration_s: f64,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub id: String,
    pub pos: GeoPoint,
    #[serde(default = "default_kind")]
    pub kind: TargetKind,
}

fn default_kind() -> TargetKind {
    TargetKind::ControlMarker
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Per-axis σ of the east and north fix position error.
    pub position_sigma_m: f64,
    pub heading_sigma_deg: f64,
    /// Per-axis σ of the annotated pixel.
    pub pixel_sigma_px: f64,
    /// A fix stamped `s` reports the true state at `s + latency_s`.
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub start: GeoPoint,
    pub heading_deg: f64,
    /// Consecutive segments from t = 0; the vehicle stands still after the
    /// last one.
    #[serde(default)]
    pub speed_profile: Vec<SpeedSegment>,
    pub duration_s: f64,
    #[serde(default = "default_gnss_hz")]
    pub gnss_hz: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub cameras: Vec<CalibrationFile>,
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Skip annotations of targets further than this from the camera.
    #[serde(default)]
    pub max_annotation_range_m: Option<f64>,
    /// Pipeline options written into the generated session.
    #[serde(default)]
    pub options: SessionOptions,
}

fn default_gnss_hz() -> f64 {
    DEFAULT_GNSS_HZ
}

fn default_fps() -> f64 {
    DEFAULT_FPS
}

/// True vehicle (antenna) state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthState {
    pub t: f64,
    pub pos: GeoPoint,
    pub heading: Bearing,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynthWarning {
    /// The target was never visible from any camera.
    NoVisibleTarget { target_id: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub session: Session,
    /// True state at every frame instant.
    pub truth: Vec<TruthState>,
    pub warnings: Vec<SynthWarning>,
}

/// Round to whole microseconds, the resolution timestamps are written at.
fn round_us(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

/// Instants `k / hz` for `k = 0..=⌊duration·hz⌋`.
fn sample_times(duration: f64, hz: f64) -> Vec<f64> {
    let n = (duration * hz + 1e-9).floor() as u64;
    (0..=n).map(|k| round_us(k as f64 / hz)).collect()
}

pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// East and north offset of `p` from `origin` in the local tangent plane of
/// the sphere.
fn enu_offset(origin: GeoPoint, p: GeoPoint, earth: &EarthModel) -> (f64, f64) {
    let r = earth.sphere_radius_m();
    let ecef = |g: GeoPoint| {
        let (sp, cp) = g.lat().to_radians().sin_cos();
        let (sl, cl) = g.lon().to_radians().sin_cos();
        Vector3::new(r * cp * cl, r * cp * sl, r * sp)
    };
    let d = ecef(p) - ecef(origin);
    let (sp, cp) = origin.lat().to_radians().sin_cos();
    let (sl, cl) = origin.lon().to_radians().sin_cos();
    let east = -sl * d.x + cl * d.y;
    let north = -sp * cl * d.x - sp * sl * d.y + cp * d.z;
    (east, north)
}

/// A validated scenario with its cameras built.
#[derive(Debug, Clone)]
pub struct Scenario {
    spec: ScenarioSpec,
    cameras: BTreeMap<String, Camera>,
}

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self, SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(spec.duration_s.is_finite() && spec.duration_s > 0.0) {
            return bad(format!("duration_s {} must be positive", spec.duration_s));
        }
        if !(spec.gnss_hz.is_finite() && spec.gnss_hz > 0.0 && spec.fps.is_finite() && spec.fps > 0.0) {
            return bad("gnss_hz and fps must be positive".into());
        }
        if !spec.heading_deg.is_finite() {
            return bad("heading_deg must be finite".into());
        }
        for s in &spec.speed_profile {
            if !(s.duration_s.is_finite() && s.duration_s > 0.0 && s.speed_mps.is_finite() && s.speed_mps >= 0.0) {
                return bad(format!("speed segment {s:?} needs positive duration and non-negative speed"));
            }
        }
        let n = spec.noise;
        let sigmas = [n.position_sigma_m, n.heading_sigma_deg, n.pixel_sigma_px, n.latency_s];
        if sigmas.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("noise terms must be finite and non-negative".into());
        }
        if spec.max_annotation_range_m.is_some_and(|r| r.is_nan() || r <= 0.0) {
            return bad("max_annotation_range_m must be positive".into());
        }
        if spec.targets.is_empty() || spec.cameras.is_empty() {
            return bad("need at least one camera and one target".into());
        }
        let mut cameras = BTreeMap::new();
        for file in &spec.cameras {
            let camera = Camera::from_file(file).map_err(|source| SynthError::Camera {
                id: file.id.clone(),
                source,
            })?;
            if cameras.insert(camera.id.clone(), camera).is_some() {
                return bad(format!("duplicate camera id {:?}", file.id));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for t in &spec.targets {
            if t.id.is_empty() || !ids.insert(&t.id) {
                return bad(format!("target id {:?} is empty or repeated", t.id));
            }
        }
        Ok(Self { spec, cameras })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        let mut t0 = 0.0;
        for s in &self.spec.speed_profile {
            if t < t0 + s.duration_s {
                return s.speed_mps;
            }
            t0 += s.duration_s;
        }
        0.0
    }

    /// Distance travelled by time `t ≥ 0`.
    pub fn distance_at(&self, t: f64) -> f64 {
        let mut t0 = 0.0;
        let mut d = 0.0;
        for s in &self.spec.speed_profile {
            let dt = (t - t0).clamp(0.0, s.duration_s);
            d += s.speed_mps * dt;
            t0 += s.duration_s;
        }
        d
    }

    pub fn true_state(&self, t: f64) -> Result<TruthState, GeodesyError> {
        let earth = &self.spec.options.earth;
        let course = Bearing::new(self.spec.heading_deg);
        let s = self.distance_at(t);
        let pos = inverse_haversine(self.spec.start, s, course, earth)?;
        let heading = if s == 0.0 {
            course
        } else {
            let ahead = inverse_haversine(self.spec.start, s + COURSE_PROBE_M, course, earth)?;
            initial_bearing(pos, ahead)?
        };
        Ok(TruthState {
            t,
            pos,
            heading,
            speed_mps: self.speed_at(t),
        })
    }

    /// Noiseless pixel of `target` in `camera` at `state`, with the ground
    /// range from the camera footprint. `None` when out of range, behind the
    /// camera or outside the image.
    pub fn project(
        &self,
        camera: &Camera,
        state: &TruthState,
        target: GeoPoint,
    ) -> Result<Option<(f64, f64, f64)>, GeodesyError> {
        let opts = &self.spec.options;
        let rig = RigState {
            t: state.t,
            pos: state.pos,
            theta_car: state.heading,
            speed: state.speed_mps,
        };
        let footprint = camera_footprint(&rig, &camera.extrinsics.position(), &opts.antenna_offset_m, &opts.earth)?;
        let range = haversine_distance(footprint, target, &opts.earth);
        if self.spec.max_annotation_range_m.is_some_and(|r| range > r) {
            return Ok(None);
        }
        let (e, n) = enu_offset(state.pos, target, &opts.earth);
        let (st, ct) = state.heading.radians().sin_cos();
        let p_rig = Vector3::new(
            e * st + n * ct + opts.antenna_offset_m.x,
            -e * ct + n * st + opts.antenna_offset_m.y,
            0.0,
        );
        let p_cam = camera.extrinsics.rig_to_camera(&p_rig);
        let pixel = match camera.intrinsics.ray_to_pixel(&p_cam) {
            Ok((px, py)) if camera.intrinsics.contains(px, py) => Some((px, py, range)),
            _ => None,
        };
        Ok(pixel)
    }

    fn usable_pixel(camera: &Camera, px: f64, py: f64) -> bool {
        camera.intrinsics.contains(px, py)
            && camera.intrinsics.pixel_to_ray(px, py).is_ok_and(|d| {
                let ray = camera_ray_to_rig(&camera.extrinsics, &d);
                intersect_ground(&ray.origin, &ray.direction).is_ok()
            })
    }

    pub fn generate_with(&self, rng: &mut ChaCha8Rng) -> Result<GeneratedScene, SynthError> {
        let spec = &self.spec;
        let noise = spec.noise;
        let earth = &spec.options.earth;

        let mut fixes = Vec::new();
        for t in sample_times(spec.duration_s, spec.gnss_hz) {
            let truth = self.true_state(t + noise.latency_s)?;
            let (zn, ze, zh) = (normal(rng), normal(rng), normal(rng));
            let (dn, de) = (noise.position_sigma_m * zn, noise.position_sigma_m * ze);
            let offset = de.hypot(dn);
            let pos = if offset > 0.0 {
                inverse_haversine(truth.pos, offset, Bearing::new(de.atan2(dn).to_degrees()), earth)?
            } else {
                truth.pos
            };
            fixes.push(GnssFix {
                t,
                pos,
                heading: Some(Bearing::new(truth.heading.deg() + noise.heading_sigma_deg * zh).deg()),
                speed: Some(truth.speed_mps),
                quality: FixQuality::RtkFixed,
            });
        }
        let track = Track::new(fixes)?;
        let (_, track_end) = track.span();

        let mut annotations = Vec::new();
        let mut truth = Vec::new();
        let mut seen = vec![false; spec.targets.len()];
        for t in sample_times(spec.duration_s, spec.fps) {
            if t > track_end {
                break;
            }
            let state = self.true_state(t)?;
            truth.push(state);
            for camera in self.cameras.values() {
                for (k, target) in spec.targets.iter().enumerate() {
                    let Some((px, py, _)) = self.project(camera, &state, target.pos)? else {
                        continue;
                    };
                    seen[k] = true;
                    let (zx, zy) = (normal(rng), normal(rng));
                    let (px, py) = (px + noise.pixel_sigma_px * zx, py + noise.pixel_sigma_px * zy);
                    if !Self::usable_pixel(camera, px, py) {
                        continue;
                    }
                    annotations.push(Annotation {
                        t,
                        camera_id: camera.id.clone(),
                        px,
                        py,
                        target_id: target.id.clone(),
                    });
                }
            }
        }

        let warnings = spec
            .targets
            .iter()
            .zip(&seen)
            .filter(|(_, s)| !**s)
            .map(|(t, _)| SynthWarning::NoVisibleTarget {
                target_id: t.id.clone(),
            })
            .collect();
        let ground_truth = spec
            .targets
            .iter()
            .map(|t| {
                (
                    t.id.clone(),
                    GroundTruthTarget {
                        target_id: t.id.clone(),
                        pos: t.pos,
                        kind: t.kind,
                        source: TargetSource::Survey,
                    },
                )
            })
            .collect();
        let session = Session {
            cameras: self.cameras.clone(),
            track,
            annotations,
            ground_truth,
            options: spec.options.clone(),
            metadata: Some(serde_json::json!({
                "generator": "geopin synth",
                "rng": RNG_NAME,
                "seed": spec.seed,
            })),
        };
        Ok(GeneratedScene {
            session,
            truth,
            warnings,
        })
    }
}

/// Generate one session from `spec.seed`.
pub fn generate(spec: &ScenarioSpec) -> Result<GeneratedScene, SynthError> {
    let scenario = Scenario::new(spec.clone())?;
    scenario.generate_with(&mut trial_rng(spec.seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub master_seed: u64,
    pub rng: String,
    /// Successful estimates pooled over all trials.
    pub estimates: usize,
    pub failures: usize,
    pub aggregates: Aggregates,
    /// Absolute offset of the estimate from the camera→target sight line.
    pub cross_track: Option<ErrorStats>,
}

struct TrialOutcome {
    samples: Vec<ErrorSample>,
    cross_track: Vec<f64>,
    failures: usize,
}

fn run_trial(scenario: &Scenario, trial: u64) -> Result<TrialOutcome, SynthError> {
    let scene = scenario.generate_with(&mut trial_rng(scenario.spec.seed, trial))?;
    let session = &scene.session;
    if session.annotations.is_empty() {
        return Ok(TrialOutcome {
            samples: Vec::new(),
            cross_track: Vec::new(),
            failures: 0,
        });
    }
    let report = evaluate(session)?;
    let mut cross_track = Vec::with_capacity(report.rows.len());
    for row in &report.rows {
        if let Some(reference) = session.reference_for(&row.target_id) {
            let sight = initial_bearing(row.origin, reference.pos)?;
            cross_track.push((row.distance_m * sight.signed_diff(row.bearing).to_radians().sin()).abs());
        }
    }
    Ok(TrialOutcome {
        samples: report.rows.iter().filter_map(ErrorSample::from_row).collect(),
        cross_track,
        failures: report.failures.len(),
    })
}

/// Generate and evaluate `trials` independent sessions seeded from
/// `spec.seed`, pooling every estimate.
pub fn monte_carlo(spec: &ScenarioSpec, trials: usize) -> Result<MonteCarloSummary, SynthError> {
    if trials == 0 {
        return Err(SynthError::InvalidSpec("trials must be at least 1".into()));
    }
    let scenario = Scenario::new(spec.clone())?;
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(&scenario, i))
        .collect::<Result<Vec<_>, _>>()?;
    let samples: Vec<ErrorSample> = outcomes.iter().flat_map(|o| o.samples.iter().copied()).collect();
    let cross: Vec<f64> = outcomes.iter().flat_map(|o| o.cross_track.iter().copied()).collect();
    Ok(MonteCarloSummary {
        trials,
        master_seed: spec.seed,
        rng: RNG_NAME.into(),
        estimates: samples.len(),
        failures: outcomes.iter().map(|o| o.failures).sum(),
        aggregates: Aggregates::from_samples(&samples, spec.options.reporting_radius_m),
        cross_track: ErrorStats::from_errors(&cross),
    })
}
