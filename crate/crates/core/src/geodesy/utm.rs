//! UTM zone 33N on WGS84 via the 6th-order Krüger n-series.
//!
//! ETRS89 survey coordinates are treated as WGS84. Zone 33 is used across
//! all of Norway, so western points carry negative eastings; the accepted
//! domain is geographic (latitude and distance from the central meridian)
//! rather than a bound on easting.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::{GeoPoint, GeodesyError, WGS84_A, WGS84_F};

pub const UTM33_CENTRAL_MERIDIAN_DEG: f64 = 15.0;
const K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING: f64 = 0.0;
const MIN_LAT: f64 = -80.0;
const MAX_LAT: f64 = 84.0;
/// Far enough east for Finnmark (31.2°E); the series stays at nanometre
/// accuracy well beyond this.
const MAX_DLON: f64 = 17.0;

/// Projected UTM33N coordinate, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtmCoord {
    pub easting: f64,
    pub northing: f64,
}

impl UtmCoord {
    pub fn new(easting: f64, northing: f64) -> Self {
        Self { easting, northing }
    }
}

struct Krueger {
    /// Rectifying radius scaled by k0.
    k0_a_hat: f64,
    e: f64,
    e2: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

static UTM33: LazyLock<Krueger> = LazyLock::new(|| Krueger::new(WGS84_A, WGS84_F));

impl Krueger {
    fn new(a: f64, f: f64) -> Self {
        let n = f / (2.0 - f);
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        let n5 = n4 * n;
        let n6 = n5 * n;
        let a_hat = a / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let e2 = f * (2.0 - f);

        let alpha = [
            n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 + 41.0 / 180.0 * n4 - 127.0 / 288.0 * n5
                + 7891.0 / 37800.0 * n6,
            13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4 + 281.0 / 630.0 * n5
                - 1_983_433.0 / 1_935_360.0 * n6,
            61.0 / 240.0 * n3 - 103.0 / 140.0 * n4 + 15061.0 / 26880.0 * n5
                + 167_603.0 / 181_440.0 * n6,
            49561.0 / 161_280.0 * n4 - 179.0 / 168.0 * n5 + 6_601_661.0 / 7_257_600.0 * n6,
            34729.0 / 80640.0 * n5 - 3_418_889.0 / 1_995_840.0 * n6,
            212_378_941.0 / 319_334_400.0 * n6,
        ];
        let beta = [
            n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 - 1.0 / 360.0 * n4 - 81.0 / 512.0 * n5
                + 96199.0 / 604_800.0 * n6,
            1.0 / 48.0 * n2 + 1.0 / 15.0 * n3 - 437.0 / 1440.0 * n4 + 46.0 / 105.0 * n5
                - 1_118_711.0 / 3_870_720.0 * n6,
            17.0 / 480.0 * n3 - 37.0 / 840.0 * n4 - 209.0 / 4480.0 * n5 + 5569.0 / 90720.0 * n6,
            4397.0 / 161_280.0 * n4 - 11.0 / 504.0 * n5 - 830_251.0 / 7_257_600.0 * n6,
            4583.0 / 161_280.0 * n5 - 108_847.0 / 3_991_680.0 * n6,
            20_648_693.0 / 638_668_800.0 * n6,
        ];

        Self {
            k0_a_hat: K0 * a_hat,
            e: e2.sqrt(),
            e2,
            alpha,
            beta,
        }
    }

    /// Geodetic tangent τ = tan φ to conformal tangent τ'.
    fn conformal_tan(&self, tau: f64) -> f64 {
        let tau1 = tau.hypot(1.0);
        let sigma = (self.e * (self.e * tau / tau1).atanh()).sinh();
        tau * sigma.hypot(1.0) - sigma * tau1
    }

    /// Newton inversion of [`Self::conformal_tan`].
    fn geodetic_tan(&self, tau_prime: f64) -> f64 {
        let mut tau = tau_prime / (1.0 - self.e2);
        for _ in 0..10 {
            let tau1 = tau.hypot(1.0);
            let tp = self.conformal_tan(tau);
            let dtau = (tau_prime - tp) * (1.0 + (1.0 - self.e2) * tau * tau)
                / ((1.0 - self.e2) * tau1 * tp.hypot(1.0));
            tau += dtau;
            if dtau.abs() <= 1e-14 * tau.abs().max(1.0) {
                break;
            }
        }
        tau
    }

    fn forward(&self, lat_deg: f64, dlon_deg: f64) -> (f64, f64) {
        let lam = dlon_deg.to_radians();
        let tau = lat_deg.to_radians().tan();
        let tau_p = self.conformal_tan(tau);
        let (sin_lam, cos_lam) = lam.sin_cos();

        let xi_p = tau_p.atan2(cos_lam);
        let eta_p = (sin_lam / tau_p.hypot(cos_lam)).asinh();

        let mut xi = xi_p;
        let mut eta = eta_p;
        for (j, a) in self.alpha.iter().enumerate() {
            let k = 2.0 * (j as f64 + 1.0);
            xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
            eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
        }
        (
            FALSE_EASTING + self.k0_a_hat * eta,
            FALSE_NORTHING + self.k0_a_hat * xi,
        )
    }

    fn inverse(&self, easting: f64, northing: f64) -> (f64, f64) {
        let eta = (easting - FALSE_EASTING) / self.k0_a_hat;
        let xi = (northing - FALSE_NORTHING) / self.k0_a_hat;

        let mut xi_p = xi;
        let mut eta_p = eta;
        for (j, b) in self.beta.iter().enumerate() {
            let k = 2.0 * (j as f64 + 1.0);
            xi_p -= b * (k * xi).sin() * (k * eta).cosh();
            eta_p -= b * (k * xi).cos() * (k * eta).sinh();
        }

        let sinh_eta = eta_p.sinh();
        let (sin_xi, cos_xi) = xi_p.sin_cos();
        let tau_p = sin_xi / sinh_eta.hypot(cos_xi);
        let tau = self.geodetic_tan(tau_p);
        (tau.atan().to_degrees(), sinh_eta.atan2(cos_xi).to_degrees())
    }
}

fn check_domain(lat: f64, lon: f64) -> Result<f64, GeodesyError> {
    let dlon = lon - UTM33_CENTRAL_MERIDIAN_DEG;
    if !lat.is_finite() || !lon.is_finite() {
        return Err(GeodesyError::NonFinite);
    }
    if lat <= MIN_LAT || lat >= MAX_LAT || dlon.abs() > MAX_DLON {
        return Err(GeodesyError::OutOfProjectionDomain { lat, lon });
    }
    Ok(dlon)
}

pub fn wgs84_to_utm33(p: GeoPoint) -> Result<UtmCoord, GeodesyError> {
    let dlon = check_domain(p.lat(), p.lon())?;
    let (easting, northing) = UTM33.forward(p.lat(), dlon);
    Ok(UtmCoord { easting, northing })
}

pub fn utm33_to_wgs84(c: UtmCoord) -> Result<GeoPoint, GeodesyError> {
    if !c.easting.is_finite() || !c.northing.is_finite() {
        return Err(GeodesyError::NonFinite);
    }
    let (lat, dlon) = UTM33.inverse(c.easting, c.northing);
    let lon = UTM33_CENTRAL_MERIDIAN_DEG + dlon;
    check_domain(lat, lon)?;
    GeoPoint::new(lat, lon)
}
