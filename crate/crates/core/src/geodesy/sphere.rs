use super::{normalize_lon, wrap_delta_deg, Bearing, EarthModel, GeoPoint, GeodesyError};

const COINCIDENT_M: f64 = 1e-9;
const POLE_EPS_DEG: f64 = 1e-9;
const VERTICAL_RAY_EPS: f64 = 1e-12;

/// Great-circle distance in meters on the sphere of `earth`.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint, earth: &EarthModel) -> f64 {
    let phi1 = a.lat().to_radians();
    let phi2 = b.lat().to_radians();
    let dphi = (b.lat() - a.lat()).to_radians();
    let dlam = wrap_delta_deg(b.lon() - a.lon()).to_radians();

    let s_phi = (dphi / 2.0).sin();
    let s_lam = (dlam / 2.0).sin();
    let h = (s_phi * s_phi + phi1.cos() * phi2.cos() * s_lam * s_lam).clamp(0.0, 1.0);
    2.0 * earth.sphere_radius_m() * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Bearing of the great circle leaving `a` toward `b`.
pub fn initial_bearing(a: GeoPoint, b: GeoPoint) -> Result<Bearing, GeodesyError> {
    if a.lat().abs() > 90.0 - POLE_EPS_DEG || b.lat().abs() > 90.0 - POLE_EPS_DEG {
        return Err(GeodesyError::PoleDegenerate);
    }
    if haversine_distance(a, b, &EarthModel::default()) < COINCIDENT_M {
        return Err(GeodesyError::CoincidentPoints);
    }
    let phi1 = a.lat().to_radians();
    let phi2 = b.lat().to_radians();
    let dlam = wrap_delta_deg(b.lon() - a.lon()).to_radians();

    let y = dlam.sin() * phi2.cos();
    // cos φ1 sin φ2 − sin φ1 cos φ2 cos Δλ, rewritten to avoid cancellation
    // when the points are close together.
    let half = (dlam / 2.0).sin();
    let x = (phi2 - phi1).sin() + 2.0 * phi1.sin() * phi2.cos() * half * half;
    Ok(Bearing::new(y.atan2(x).to_degrees()))
}

/// Destination reached from `origin` after travelling `distance_m` along the
/// great circle with initial `bearing`.
///
/// φ₂ = asin(sin φ₁ cos δ + cos φ₁ sin δ cos θ)
/// λ₂ = λ₁ + atan2(sin θ sin δ cos φ₁, cos δ − sin φ₁ sin φ₂), δ = d / R
pub fn inverse_haversine(
    origin: GeoPoint,
    distance_m: f64,
    bearing: Bearing,
    earth: &EarthModel,
) -> Result<GeoPoint, GeodesyError> {
    if !distance_m.is_finite() || distance_m < 0.0 {
        return Err(GeodesyError::InvalidDistance(distance_m));
    }
    let radius = earth.sphere_radius_m();
    let limit = std::f64::consts::PI * radius;
    if distance_m > limit {
        return Err(GeodesyError::DistanceOutOfRange {
            distance_m,
            limit_m: limit,
        });
    }
    if distance_m == 0.0 {
        return Ok(origin);
    }

    let phi1 = origin.lat().to_radians();
    let theta = bearing.radians();
    let delta = distance_m / radius;
    let (sin_phi1, cos_phi1) = phi1.sin_cos();
    let (sin_delta, cos_delta) = delta.sin_cos();

    let (sin_theta, cos_theta) = theta.sin_cos();

    // Destination unit vector with the origin meridian as λ = 0. atan2 keeps
    // the latitude well conditioned near the poles, where asin is not.
    let x = cos_phi1 * cos_delta - sin_phi1 * sin_delta * cos_theta;
    let y = sin_delta * sin_theta;
    let z = sin_phi1 * cos_delta + cos_phi1 * sin_delta * cos_theta;
    let phi2 = z.atan2(x.hypot(y));
    let dlam = y.atan2(x);

    // Add the longitude change in degrees so a zero change leaves λ₁ untouched.
    let lon2 = normalize_lon(origin.lon() + dlam.to_degrees());
    GeoPoint::new(phi2.to_degrees(), lon2)
}

/// Linear pixel-column heading model:
/// `(fov / w) · (px − w/2) + ψ_camera + θ_car`, wrapped into [0, 360).
///
/// `psi_camera_deg` is the camera yaw measured clockwise from the vehicle's
/// forward axis, in the same sense as `theta_car_deg`.
pub fn linear_heading(
    fov_deg: f64,
    image_width: f64,
    px: f64,
    psi_camera_deg: f64,
    theta_car_deg: f64,
) -> Result<Bearing, GeodesyError> {
    if !(image_width.is_finite() && image_width > 0.0) {
        return Err(GeodesyError::InvalidArgument("image width must be positive"));
    }
    if !(fov_deg > 0.0 && fov_deg < 360.0) {
        return Err(GeodesyError::InvalidArgument("field of view must be in (0, 360)"));
    }
    if !psi_camera_deg.is_finite() || !theta_car_deg.is_finite() {
        return Err(GeodesyError::NonFinite);
    }
    if !(0.0..=image_width).contains(&px) {
        return Err(GeodesyError::InvalidPixel {
            px,
            width: image_width,
        });
    }
    let offset = (fov_deg / image_width) * (px - image_width / 2.0);
    Ok(Bearing::new(offset + psi_camera_deg + theta_car_deg))
}

/// Heading of a rig-frame ray (x forward, y left, z up): its horizontal
/// azimuth, clockwise-positive, added to the vehicle heading.
pub fn ray_azimuth_heading(ray_rig: [f64; 3], theta_car_deg: f64) -> Result<Bearing, GeodesyError> {
    let [x, y, _] = ray_rig;
    if !x.is_finite() || !y.is_finite() || !theta_car_deg.is_finite() {
        return Err(GeodesyError::NonFinite);
    }
    if x.hypot(y) < VERTICAL_RAY_EPS {
        return Err(GeodesyError::VerticalRay);
    }
    Ok(Bearing::new((-y).atan2(x).to_degrees() + theta_car_deg))
}
