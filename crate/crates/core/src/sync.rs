//! Alignment of the GNSS track with camera frame timestamps.
//!
//! The receiver reports at a few hertz while frames arrive at tens of
//! hertz, so every annotation needs a vehicle pose between fixes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{
    haversine_distance, initial_bearing, normalize_lon, Bearing, EarthModel, GeoPoint, GeodesyError,
};

/// Queries may fall this far outside the track and clamp to the end fix.
pub const EDGE_MARGIN_S: f64 = 0.2;
/// Below this ground speed course-over-ground is meaningless.
pub const SPEED_GATE_MPS: f64 = 0.5;
/// Consecutive fixes further apart than this are reported as gaps.
pub const MAX_GAP_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyncError {
    #[error("GNSS track is empty")]
    EmptyTrack,
    #[error("fix {index}: timestamps must be strictly increasing")]
    NotIncreasing { index: usize },
    #[error("fix {index}: non-finite value")]
    NonFinite { index: usize },
    #[error("time {t} s is outside the track span [{start}, {end}] s")]
    OutOfTrack { t: f64, start: f64, end: f64 },
    #[error("no heading available at t = {t} s")]
    MissingHeading { t: f64 },
    #[error("fix {index}: vehicle is stationary, course over ground is undefined")]
    StationaryAmbiguous { index: usize },
    #[error("fix {index} has no neighbour to derive a course from")]
    NoNeighbors { index: usize },
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixQuality {
    RtkFixed,
    RtkFloat,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnssFix {
    pub t: f64,
    pub pos: GeoPoint,
    pub heading: Option<f64>,
    pub speed: Option<f64>,
    pub quality: FixQuality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseMode {
    Interpolate,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingSource {
    /// Heading field of the fix.
    Reported,
    /// Course over ground from neighbouring fixes.
    Derived,
    /// Copied from the nearest fix with a usable heading.
    Held,
}

/// Vehicle state at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigState {
    pub t: f64,
    pub pos: GeoPoint,
    pub theta_car: Bearing,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub state: RigState,
    /// Query fell in the margin outside the track and used the end fix.
    pub clamped: bool,
    /// At least one contributing fix had its heading held from elsewhere.
    pub heading_held: bool,
    /// The bracketing fixes are more than [`MAX_GAP_S`] apart.
    pub across_gap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ResolvedHeading {
    bearing: Bearing,
    source: HeadingSource,
}

/// Time-ordered GNSS fixes with per-fix heading and speed resolved once.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    fixes: Vec<GnssFix>,
    headings: Vec<Option<ResolvedHeading>>,
    speeds: Vec<f64>,
    gaps: Vec<usize>,
}

impl Track {
    pub fn new(fixes: Vec<GnssFix>) -> Result<Self, SyncError> {
        if fixes.is_empty() {
            return Err(SyncError::EmptyTrack);
        }
        for (i, f) in fixes.iter().enumerate() {
            let finite = f.t.is_finite()
                && f.heading.is_none_or(f64::is_finite)
                && f.speed.is_none_or(f64::is_finite);
            if !finite {
                return Err(SyncError::NonFinite { index: i });
            }
            if i > 0 && f.t <= fixes[i - 1].t {
                return Err(SyncError::NotIncreasing { index: i });
            }
        }
        let gaps = fixes
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].t - w[0].t > MAX_GAP_S)
            .map(|(i, _)| i)
            .collect();

        let mut track = Self {
            fixes,
            headings: Vec::new(),
            speeds: Vec::new(),
            gaps,
        };
        track.speeds = (0..track.len()).map(|i| track.resolve_speed(i)).collect();
        track.headings = track.resolve_headings();
        Ok(track)
    }

    pub fn fixes(&self) -> &[GnssFix] {
        &self.fixes
    }

    pub fn len(&self) -> usize {
        self.fixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.fixes[0].t, self.fixes[self.fixes.len() - 1].t)
    }

    /// Indices `i` where fix `i + 1` follows more than [`MAX_GAP_S`] later.
    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    /// Heading source for fix `index`, if any heading could be resolved.
    pub fn heading_source(&self, index: usize) -> Option<HeadingSource> {
        self.headings[index].map(|h| h.source)
    }

    fn neighbours(&self, index: usize) -> Result<(usize, usize), SyncError> {
        let prev = index.saturating_sub(1);
        let next = (index + 1).min(self.len() - 1);
        if prev == next {
            return Err(SyncError::NoNeighbors { index });
        }
        Ok((prev, next))
    }

    fn resolve_speed(&self, index: usize) -> f64 {
        if let Some(s) = self.fixes[index].speed {
            return s;
        }
        match self.neighbours(index) {
            Ok((a, b)) => {
                let (fa, fb) = (&self.fixes[a], &self.fixes[b]);
                haversine_distance(fa.pos, fb.pos, &EarthModel::default()) / (fb.t - fa.t)
            }
            Err(_) => 0.0,
        }
    }

    fn resolve_headings(&self) -> Vec<Option<ResolvedHeading>> {
        let own: Vec<Option<ResolvedHeading>> = (0..self.len())
            .map(|i| match self.fixes[i].heading {
                Some(h) => Some(ResolvedHeading {
                    bearing: Bearing::new(h),
                    source: HeadingSource::Reported,
                }),
                None => derive_heading(self, i).ok().map(|bearing| ResolvedHeading {
                    bearing,
                    source: HeadingSource::Derived,
                }),
            })
            .collect();

        // Hold the last known heading through stationary stretches; before the
        // first usable heading, take the next one instead.
        let mut out = own.clone();
        let mut last = None;
        for (i, h) in own.iter().enumerate() {
            match h {
                Some(h) => last = Some(h.bearing),
                None => {
                    out[i] = last.map(|bearing| ResolvedHeading {
                        bearing,
                        source: HeadingSource::Held,
                    })
                }
            }
        }
        let mut next = None;
        for i in (0..own.len()).rev() {
            match own[i] {
                Some(h) => next = Some(h.bearing),
                None if out[i].is_none() => {
                    out[i] = next.map(|bearing| ResolvedHeading {
                        bearing,
                        source: HeadingSource::Held,
                    })
                }
                None => {}
            }
        }
        out
    }

    fn state_at_fix(&self, index: usize, t: f64) -> Result<(RigState, bool), SyncError> {
        let f = &self.fixes[index];
        let h = self.headings[index].ok_or(SyncError::MissingHeading { t })?;
        Ok((
            RigState {
                t,
                pos: f.pos,
                theta_car: h.bearing,
                speed: self.speeds[index],
            },
            h.source == HeadingSource::Held,
        ))
    }
}

/// Course over ground at fix `index` from its neighbours (one-sided at the
/// ends of the track).
pub fn derive_heading(track: &Track, index: usize) -> Result<Bearing, SyncError> {
    let (a, b) = track.neighbours(index)?;
    let (fa, fb) = (&track.fixes[a], &track.fixes[b]);
    let dist = haversine_distance(fa.pos, fb.pos, &EarthModel::default());
    if dist / (fb.t - fa.t) < SPEED_GATE_MPS {
        return Err(SyncError::StationaryAmbiguous { index });
    }
    Ok(initial_bearing(fa.pos, fb.pos)?)
}

/// Vehicle pose for camera time `t`. The track is sampled at
/// `t − latency_offset`, i.e. `latency_offset` is how far GNSS timestamps
/// lag the state they describe.
pub fn pose_at(track: &Track, t: f64, mode: PoseMode, latency_offset: f64) -> Result<PoseSample, SyncError> {
    let tq = t - latency_offset;
    let (start, end) = track.span();
    if !tq.is_finite() || tq < start - EDGE_MARGIN_S || tq > end + EDGE_MARGIN_S {
        return Err(SyncError::OutOfTrack { t: tq, start, end });
    }
    let fixes = &track.fixes;
    let last = fixes.len() - 1;

    let single = |i: usize, clamped: bool| -> Result<PoseSample, SyncError> {
        let (state, held) = track.state_at_fix(i, t)?;
        Ok(PoseSample {
            state,
            clamped,
            heading_held: held,
            across_gap: false,
        })
    };

    if tq <= start {
        return single(0, tq < start);
    }
    if tq >= end {
        return single(last, tq > end);
    }
    // fixes[i].t <= tq < fixes[i + 1].t
    let i = fixes.partition_point(|f| f.t <= tq) - 1;
    if fixes[i].t == tq {
        return single(i, false);
    }
    let (a, b) = (&fixes[i], &fixes[i + 1]);
    let across_gap = b.t - a.t > MAX_GAP_S;

    match mode {
        PoseMode::Nearest => {
            let j = if tq - a.t <= b.t - tq { i } else { i + 1 };
            let mut s = single(j, false)?;
            s.across_gap = across_gap;
            Ok(s)
        }
        PoseMode::Interpolate => {
            let w = (tq - a.t) / (b.t - a.t);
            let ha = track.headings[i].ok_or(SyncError::MissingHeading { t })?;
            let hb = track.headings[i + 1].ok_or(SyncError::MissingHeading { t })?;

            let lat = a.pos.lat() + w * (b.pos.lat() - a.pos.lat());
            let dlon = normalize_lon(b.pos.lon() - a.pos.lon());
            let lon = a.pos.lon() + w * dlon;
            let heading = ha.bearing.deg() + w * ha.bearing.signed_diff(hb.bearing);
            let speed = track.speeds[i] + w * (track.speeds[i + 1] - track.speeds[i]);

            Ok(PoseSample {
                state: RigState {
                    t,
                    pos: GeoPoint::new(lat, lon)?,
                    theta_car: Bearing::new(heading),
                    speed,
                },
                clamped: false,
                heading_held: ha.source == HeadingSource::Held || hb.source == HeadingSource::Held,
                across_gap,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::inverse_haversine;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn fix(t: f64, lat: f64, lon: f64, heading: Option<f64>) -> GnssFix {
        GnssFix {
            t,
            pos: GeoPoint::new(lat, lon).unwrap(),
            heading,
            speed: None,
            quality: FixQuality::RtkFixed,
        }
    }

    #[test]
    fn midpoint_with_heading_wrap() {
        let track = Track::new(vec![
            fix(0.0, 63.0, 10.0, Some(350.0)),
            fix(0.2, 63.00001, 10.0, Some(10.0)),
        ])
        .unwrap();
        let s = pose_at(&track, 0.1, PoseMode::Interpolate, 0.0).unwrap();
        assert_abs_diff_eq!(s.state.pos.lat(), 63.000005, epsilon = 1e-12);
        assert_eq!(s.state.pos.lon(), 10.0);
        assert_abs_diff_eq!(s.state.theta_car.deg(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn exact_fix_time_is_verbatim() {
        let fixes = vec![
            fix(0.0, 63.0, 10.0, Some(20.0)),
            fix(0.2, 63.00001, 10.00001, Some(21.0)),
            fix(0.4, 63.00002, 10.00002, Some(22.0)),
        ];
        let track = Track::new(fixes.clone()).unwrap();
        for mode in [PoseMode::Interpolate, PoseMode::Nearest] {
            for f in &fixes {
                let s = pose_at(&track, f.t, mode, 0.0).unwrap();
                assert_eq!(s.state.pos, f.pos);
                assert_eq!(s.state.theta_car.deg(), f.heading.unwrap());
            }
        }
    }

    #[test]
    fn margins_and_out_of_track() {
        let track = Track::new(vec![fix(1.0, 63.0, 10.0, Some(0.0)), fix(1.2, 63.00001, 10.0, Some(0.0))]).unwrap();
        let s = pose_at(&track, 0.85, PoseMode::Interpolate, 0.0).unwrap();
        assert!(s.clamped);
        assert_eq!(s.state.pos.lat(), 63.0);
        let s = pose_at(&track, 1.35, PoseMode::Nearest, 0.0).unwrap();
        assert!(s.clamped);
        assert!(matches!(
            pose_at(&track, 0.7, PoseMode::Interpolate, 0.0),
            Err(SyncError::OutOfTrack { .. })
        ));
        // latency shifts the query into range
        assert!(pose_at(&track, 1.6, PoseMode::Interpolate, 0.5).is_ok());
    }

    #[test]
    fn constant_velocity_lag() {
        let earth = EarthModel::default();
        let v = 16.67;
        let start = GeoPoint::new(63.4, 10.4).unwrap();
        let truth = |t: f64| inverse_haversine(start, v * t, Bearing::new(0.0), &earth).unwrap();
        let fixes: Vec<_> = (0..=25)
            .map(|k| {
                let t = k as f64 * 0.2;
                let p = truth(t);
                fix(t, p.lat(), p.lon(), Some(0.0))
            })
            .collect();
        let track = Track::new(fixes).unwrap();

        let mut worst_nearest: f64 = 0.0;
        let mut worst_interp: f64 = 0.0;
        for k in 0..=150 {
            let t = k as f64 / 30.0;
            let p = truth(t);
            let n = pose_at(&track, t, PoseMode::Nearest, 0.0).unwrap();
            let i = pose_at(&track, t, PoseMode::Interpolate, 0.0).unwrap();
            worst_nearest = worst_nearest.max(haversine_distance(p, n.state.pos, &earth));
            worst_interp = worst_interp.max(haversine_distance(p, i.state.pos, &earth));
        }
        assert!(worst_nearest <= 0.1 * v + 1e-6);
        assert!(worst_nearest > 0.9 * 0.1 * v);
        assert!(worst_interp < 1e-3);
    }

    #[test]
    fn straight_tracks_give_cardinal_courses() {
        let earth = EarthModel::default();
        let start = GeoPoint::new(63.4, 10.4).unwrap();
        // Along a meridian, and along a parallel (the chord of a parallel
        // deviates from due east by Δλ·sin φ / 2, ~4e-5° here).
        let metres_per_deg_lon = earth.sphere_radius_m() * start.lat().to_radians().cos() * PI / 180.0;
        for heading in [0.0, 90.0] {
            let fixes: Vec<_> = (0..5)
                .map(|k| {
                    let s = 2.0 * k as f64;
                    let p = if heading == 0.0 {
                        inverse_haversine(start, s, Bearing::new(0.0), &earth).unwrap()
                    } else {
                        GeoPoint::new(start.lat(), start.lon() + s / metres_per_deg_lon).unwrap()
                    };
                    fix(k as f64 * 0.2, p.lat(), p.lon(), None)
                })
                .collect();
            let track = Track::new(fixes).unwrap();
            let h = derive_heading(&track, 2).unwrap();
            assert_abs_diff_eq!(h.signed_diff(Bearing::new(heading)), 0.0, epsilon = 1e-3);
            assert_eq!(track.heading_source(2), Some(HeadingSource::Derived));
        }
    }

    #[test]
    fn circular_track_matches_tangent() {
        // Local flat circle of radius 50 m, counter-clockwise seen from above,
        // 10 m/s sampled at 5 Hz.
        let r = 50.0;
        let omega = 10.0 / r;
        let centre = GeoPoint::new(63.4, 10.4).unwrap();
        let earth = EarthModel::default();
        let place = |phi: f64| {
            let (east, north) = (r * phi.cos(), r * phi.sin());
            let d = east.hypot(north);
            inverse_haversine(centre, d, Bearing::new(east.atan2(north).to_degrees()), &earth).unwrap()
        };
        let fixes: Vec<_> = (0..40)
            .map(|k| {
                let t = k as f64 * 0.2;
                let p = place(omega * t);
                fix(t, p.lat(), p.lon(), None)
            })
            .collect();
        let track = Track::new(fixes).unwrap();
        for k in 1..39 {
            let phi = omega * k as f64 * 0.2;
            // velocity (−sin φ, cos φ) in (east, north)
            let tangent = Bearing::new((-phi.sin()).atan2(phi.cos()).to_degrees());
            let h = derive_heading(&track, k).unwrap();
            assert!(h.signed_diff(tangent).abs() < 0.5, "fix {k}: {} vs {}", h.deg(), tangent.deg());
        }
    }

    #[test]
    fn stationary_holds_last_heading() {
        let earth = EarthModel::default();
        let start = GeoPoint::new(63.4, 10.4).unwrap();
        let mut fixes = Vec::new();
        for k in 0..4 {
            let p = inverse_haversine(start, 2.0 * k as f64, Bearing::new(90.0), &earth).unwrap();
            fixes.push(fix(k as f64 * 0.2, p.lat(), p.lon(), None));
        }
        let stop = fixes[3].pos;
        for k in 4..8 {
            fixes.push(fix(k as f64 * 0.2, stop.lat(), stop.lon(), None));
        }
        let track = Track::new(fixes).unwrap();
        assert!(matches!(derive_heading(&track, 6), Err(SyncError::StationaryAmbiguous { index: 6 })));
        assert_eq!(track.heading_source(6), Some(HeadingSource::Held));
        let s = pose_at(&track, 1.3, PoseMode::Interpolate, 0.0).unwrap();
        assert!(s.heading_held);
        assert_abs_diff_eq!(s.state.theta_car.signed_diff(Bearing::new(90.0)), 0.0, epsilon = 1e-3);
    }

    #[test]
    fn fully_stationary_track_has_no_heading() {
        let track = Track::new(vec![fix(0.0, 63.0, 10.0, None), fix(0.2, 63.0, 10.0, None)]).unwrap();
        assert!(matches!(
            pose_at(&track, 0.1, PoseMode::Interpolate, 0.0),
            Err(SyncError::MissingHeading { .. })
        ));
    }

    #[test]
    fn track_validation_and_gaps() {
        assert_eq!(Track::new(vec![]), Err(SyncError::EmptyTrack));
        assert_eq!(
            Track::new(vec![fix(0.0, 63.0, 10.0, None), fix(0.0, 63.0, 10.0, None)]),
            Err(SyncError::NotIncreasing { index: 1 })
        );
        let track = Track::new(vec![
            fix(0.0, 63.0, 10.0, Some(0.0)),
            fix(0.2, 63.0, 10.0, Some(0.0)),
            fix(1.5, 63.0, 10.0, Some(0.0)),
        ])
        .unwrap();
        assert_eq!(track.gaps(), &[1]);
        assert!(pose_at(&track, 1.0, PoseMode::Interpolate, 0.0).unwrap().across_gap);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn interpolation_stays_between_fixes(
                lat in 58.0f64..70.0, lon in 5.0f64..25.0,
                dlat in -1e-4f64..1e-4, dlon in -1e-4f64..1e-4,
                h0 in 0.0f64..360.0, h1 in 0.0f64..360.0, w in 0.0f64..1.0,
            ) {
                let track = Track::new(vec![
                    fix(0.0, lat, lon, Some(h0)),
                    fix(0.2, lat + dlat, lon + dlon, Some(h1)),
                ]).unwrap();
                let s = pose_at(&track, 0.2 * w, PoseMode::Interpolate, 0.0).unwrap().state;
                let (lo, hi) = (lat.min(lat + dlat), lat.max(lat + dlat));
                prop_assert!(s.pos.lat() >= lo - 1e-12 && s.pos.lat() <= hi + 1e-12);
                let (lo, hi) = (lon.min(lon + dlon), lon.max(lon + dlon));
                prop_assert!(s.pos.lon() >= lo - 1e-12 && s.pos.lon() <= hi + 1e-12);

                let (b0, b1) = (Bearing::new(h0), Bearing::new(h1));
                let span = b0.signed_diff(b1).abs();
                prop_assert!(b0.signed_diff(s.theta_car).abs() <= span + 1e-9);
                prop_assert!(b1.signed_diff(s.theta_car).abs() <= span + 1e-9);
            }
        }
    }
}
