//! Position math on the sphere and the WGS84 ellipsoid.
//!
//! Destination and heading computations run on a sphere of configurable
//! radius. Error measurement between two positions uses the ellipsoid.
//! Survey coordinates arrive in UTM zone 33N and are converted here.

mod sphere;
mod utm;
mod vincenty;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sphere::{
    linear_heading, haversine_distance, initial_bearing, inverse_haversine, ray_azimuth_heading,
};
pub use utm::{utm33_to_wgs84, wgs84_to_utm33, UtmCoord, UTM33_CENTRAL_MERIDIAN_DEG};
pub use vincenty::{geodesic_error, GeodesicDistance};

/// Mean Earth radius used for the spherical destination formulas.
pub const DEFAULT_SPHERE_RADIUS_M: f64 = 6_371_000.0;
/// WGS84 semi-major axis.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesyError {
    #[error("latitude {0} is outside [-90, 90]")]
    InvalidLatitude(f64),
    #[error("non-finite coordinate value")]
    NonFinite,
    #[error("points coincide, bearing is undefined")]
    CoincidentPoints,
    #[error("bearing is undefined at a pole")]
    PoleDegenerate,
    #[error("distance {0} m is negative or not finite")]
    InvalidDistance(f64),
    #[error("distance {distance_m} m exceeds half the great-circle circumference ({limit_m} m)")]
    DistanceOutOfRange { distance_m: f64, limit_m: f64 },
    #[error("pixel column {px} is outside [0, {width}]")]
    InvalidPixel { px: f64, width: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("ray has no horizontal component")]
    VerticalRay,
    #[error("({lat}, {lon}) is outside the UTM33 projection domain")]
    OutOfProjectionDomain { lat: f64, lon: f64 },
    #[error("invalid earth model: {0}")]
    InvalidEarthModel(&'static str),
}

/// WGS84 latitude/longitude in degrees.
///
/// Latitude is checked to lie in [-90, 90]; longitude is wrapped into
/// [-180, 180). Values already inside that range are kept bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
struct RawGeoPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = GeodesyError;

    fn try_from(raw: RawGeoPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeodesyError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(GeodesyError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeodesyError::InvalidLatitude(lat));
        }
        Ok(Self {
            lat,
            lon: normalize_lon(lon),
        })
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl std::fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

/// Wrap a longitude into [-180, 180). In-range inputs pass through untouched,
/// and +180 maps to -180.
pub fn normalize_lon(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        return lon;
    }
    let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped >= 180.0 {
        -180.0
    } else {
        wrapped
    }
}

/// Signed angular difference `to - from` wrapped into [-180, 180).
pub(crate) fn wrap_delta_deg(delta: f64) -> f64 {
    normalize_lon(delta)
}

/// Degrees clockwise from true north, always in [0, 360).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Bearing(f64);

impl Bearing {
    pub fn new(deg: f64) -> Self {
        Bearing(normalize_bearing(deg))
    }

    #[inline]
    pub fn deg(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    /// Smallest signed rotation from `self` to `other`, in (-180, 180].
    pub fn signed_diff(self, other: Bearing) -> f64 {
        let d = wrap_delta_deg(other.0 - self.0);
        if d == -180.0 {
            180.0
        } else {
            d
        }
    }
}

impl From<f64> for Bearing {
    fn from(deg: f64) -> Self {
        Bearing::new(deg)
    }
}

impl From<Bearing> for f64 {
    fn from(b: Bearing) -> f64 {
        b.0
    }
}

pub(crate) fn normalize_bearing(deg: f64) -> f64 {
    if (0.0..360.0).contains(&deg) {
        return deg;
    }
    let r = deg.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Sphere radius for the destination formulas plus the reference ellipsoid
/// for error measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEarthModel")]
pub struct EarthModel {
    sphere_radius_m: f64,
    semi_major_m: f64,
    flattening: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEarthModel {
    sphere_radius_m: f64,
    #[serde(default = "default_a")]
    semi_major_m: f64,
    #[serde(default = "default_f")]
    flattening: f64,
}

fn default_a() -> f64 {
    WGS84_A
}

fn default_f() -> f64 {
    WGS84_F
}

impl TryFrom<RawEarthModel> for EarthModel {
    type Error = GeodesyError;

    fn try_from(raw: RawEarthModel) -> Result<Self, Self::Error> {
        EarthModel::new(raw.sphere_radius_m, raw.semi_major_m, raw.flattening)
    }
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            sphere_radius_m: DEFAULT_SPHERE_RADIUS_M,
            semi_major_m: WGS84_A,
            flattening: WGS84_F,
        }
    }
}

impl EarthModel {
    pub fn new(sphere_radius_m: f64, semi_major_m: f64, flattening: f64) -> Result<Self, GeodesyError> {
        if !(sphere_radius_m.is_finite() && sphere_radius_m > 0.0) {
            return Err(GeodesyError::InvalidEarthModel("sphere radius must be positive"));
        }
        if !(semi_major_m.is_finite() && semi_major_m > 0.0) {
            return Err(GeodesyError::InvalidEarthModel("semi-major axis must be positive"));
        }
        if !(flattening > 0.0 && flattening < 1.0) {
            return Err(GeodesyError::InvalidEarthModel("flattening must be in (0, 1)"));
        }
        Ok(Self {
            sphere_radius_m,
            semi_major_m,
            flattening,
        })
    }

    /// Default ellipsoid with a custom sphere radius.
    pub fn with_sphere_radius(sphere_radius_m: f64) -> Result<Self, GeodesyError> {
        Self::new(sphere_radius_m, WGS84_A, WGS84_F)
    }

    #[inline]
    pub fn sphere_radius_m(&self) -> f64 {
        self.sphere_radius_m
    }

    #[inline]
    pub fn semi_major_m(&self) -> f64 {
        self.semi_major_m
    }

    #[inline]
    pub fn flattening(&self) -> f64 {
        self.flattening
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lon_normalization() {
        assert_eq!(normalize_lon(180.0), -180.0);
        assert_eq!(normalize_lon(-180.0), -180.0);
        assert_eq!(normalize_lon(190.0), -170.0);
        assert_eq!(normalize_lon(-190.0), 170.0);
        assert_eq!(normalize_lon(540.0), -180.0);
        assert_eq!(normalize_lon(10.4065), 10.4065);
        assert_eq!(normalize_lon(-1e-300 - 180.0), -180.0);
    }

    #[test]
    fn bearing_normalization() {
        assert_eq!(Bearing::new(360.0).deg(), 0.0);
        assert_eq!(Bearing::new(-90.0).deg(), 270.0);
        assert_eq!(Bearing::new(-1e-20).deg(), 0.0);
        assert_eq!(Bearing::new(725.0).deg(), 5.0);
        assert_eq!(Bearing::new(350.0).signed_diff(Bearing::new(10.0)), 20.0);
        assert_eq!(Bearing::new(10.0).signed_diff(Bearing::new(350.0)), -20.0);
    }

    #[test]
    fn geopoint_validation() {
        assert!(matches!(GeoPoint::new(90.5, 0.0), Err(GeodesyError::InvalidLatitude(_))));
        assert!(matches!(GeoPoint::new(f64::NAN, 0.0), Err(GeodesyError::NonFinite)));
        let p = GeoPoint::new(-90.0, 180.0).unwrap();
        assert_eq!(p.lon(), -180.0);
        let parsed: Result<GeoPoint, _> = serde_json::from_str(r#"{"lat": 91.0, "lon": 0.0}"#);
        assert!(parsed.is_err());
    }

    #[test]
    fn earth_model_validation() {
        assert!(EarthModel::with_sphere_radius(0.0).is_err());
        assert!(EarthModel::new(6_371_000.0, WGS84_A, 1.0).is_err());
        let m: EarthModel = serde_json::from_str(r#"{"sphere_radius_m": 6378137.0}"#).unwrap();
        assert_eq!(m.sphere_radius_m(), 6_378_137.0);
        assert_eq!(m.flattening(), WGS84_F);
    }
}
