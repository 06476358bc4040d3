use serde::{Deserialize, Serialize};

use super::{haversine_distance, wrap_delta_deg, EarthModel, GeoPoint};

const MAX_ITERATIONS: usize = 200;
const LAMBDA_TOLERANCE: f64 = 1e-12;

/// Ellipsoidal distance between two points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicDistance {
    pub meters: f64,
    /// The iteration did not converge (near-antipodal pair) and `meters`
    /// holds the spherical distance instead.
    pub fallback: bool,
}

/// Distance between `a` and `b` on the ellipsoid of `earth`, solved with
/// Vincenty's inverse iteration.
pub fn geodesic_error(a: GeoPoint, b: GeoPoint, earth: &EarthModel) -> GeodesicDistance {
    match vincenty_inverse(a, b, earth.semi_major_m(), earth.flattening()) {
        Some(meters) => GeodesicDistance {
            meters,
            fallback: false,
        },
        None => GeodesicDistance {
            meters: haversine_distance(a, b, earth),
            fallback: true,
        },
    }
}

fn vincenty_inverse(p1: GeoPoint, p2: GeoPoint, a: f64, f: f64) -> Option<f64> {
    let b = a * (1.0 - f);
    let l = wrap_delta_deg(p2.lon() - p1.lon()).to_radians();
    let u1 = ((1.0 - f) * p1.lat().to_radians().tan()).atan();
    let u2 = ((1.0 - f) * p2.lat().to_radians().tan()).atan();
    let (sin_u1, cos_u1) = u1.sin_cos();
    let (sin_u2, cos_u2) = u2.sin_cos();

    let mut lambda = l;
    for _ in 0..MAX_ITERATIONS {
        let (sin_lambda, cos_lambda) = lambda.sin_cos();
        let sin_sigma = (cos_u2 * sin_lambda).hypot(cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lambda);
        if sin_sigma == 0.0 {
            return Some(0.0);
        }
        let cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lambda;
        let sigma = sin_sigma.atan2(cos_sigma);
        let sin_alpha = cos_u1 * cos_u2 * sin_lambda / sin_sigma;
        let cos_sq_alpha = 1.0 - sin_alpha * sin_alpha;
        // Equatorial lines have cos²α = 0.
        let cos_2sigma_m = if cos_sq_alpha != 0.0 {
            cos_sigma - 2.0 * sin_u1 * sin_u2 / cos_sq_alpha
        } else {
            0.0
        };
        let c = f / 16.0 * cos_sq_alpha * (4.0 + f * (4.0 - 3.0 * cos_sq_alpha));
        let lambda_prev = lambda;
        lambda = l
            + (1.0 - c)
                * f
                * sin_alpha
                * (sigma
                    + c * sin_sigma
                        * (cos_2sigma_m + c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m * cos_2sigma_m)));

        if (lambda - lambda_prev).abs() <= LAMBDA_TOLERANCE {
            let u_sq = cos_sq_alpha * (a * a - b * b) / (b * b);
            let big_a =
                1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)));
            let big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)));
            let c2 = cos_2sigma_m * cos_2sigma_m;
            let delta_sigma = big_b
                * sin_sigma
                * (cos_2sigma_m
                    + big_b / 4.0
                        * (cos_sigma * (-1.0 + 2.0 * c2)
                            - big_b / 6.0
                                * cos_2sigma_m
                                * (-3.0 + 4.0 * sin_sigma * sin_sigma)
                                * (-3.0 + 4.0 * c2)));
            return Some(b * big_a * (sigma - delta_sigma));
        }
        if lambda.abs() > std::f64::consts::PI {
            return None;
        }
    }
    None
}
