//! Camera models and the pixel → ground-plane chain.
//!
//! Frames used throughout:
//! - camera optical frame: z along the optical axis, x right, y down;
//! - rig frame: x forward, y left, z up, ground plane at z = 0.

mod calibration;
mod extrinsics;

use nalgebra::Vector3;
use thiserror::Error;

pub use calibration::{Camera, CalibrationFile, ExtrinsicsFile, ModelKind};
pub use extrinsics::{camera_ray_to_rig, intersect_ground, CameraExtrinsics, GroundHit, RigRay};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("pixel ({px}, {py}) is outside the {width}x{height} image")]
    PixelOutOfBounds {
        px: f64,
        py: f64,
        width: u32,
        height: u32,
    },
    #[error("f-theta polynomial inversion did not converge for radius {radius} px")]
    FThetaInversionFailure { radius: f64 },
    #[error("direction points behind the camera")]
    BehindCamera,
    #[error("direction is outside the field of view")]
    OutsideFieldOfView,
    #[error("ray does not intersect the ground plane (at or above the horizon)")]
    AboveHorizon,
    #[error("camera height {0} m is not above the ground plane")]
    NegativeHeight(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid extrinsics: {0}")]
    InvalidExtrinsics(String),
    #[error("invalid direction vector")]
    InvalidDirection,
}

const NEWTON_TOLERANCE: f64 = 1e-12;
const NEWTON_MAX_ITERATIONS: usize = 50;

/// Projection model plus image size.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    width: u32,
    height: u32,
    projection: Projection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Pinhole {
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
    },
    FTheta(FTheta),
}

/// Fisheye model with image radius `r(θ) = c₁θ + c₂θ² + … + c₅θ⁵` (pixels)
/// for a ray at off-axis angle θ (radians).
#[derive(Debug, Clone, PartialEq)]
pub struct FTheta {
    cx: f64,
    cy: f64,
    coeffs: [f64; 5],
    max_angle: f64,
}

impl FTheta {
    #[inline]
    pub fn radius(&self, theta: f64) -> f64 {
        let c = &self.coeffs;
        theta * (c[0] + theta * (c[1] + theta * (c[2] + theta * (c[3] + theta * c[4]))))
    }

    #[inline]
    pub fn radius_derivative(&self, theta: f64) -> f64 {
        let c = &self.coeffs;
        c[0] + theta * (2.0 * c[1] + theta * (3.0 * c[2] + theta * (4.0 * c[3] + theta * 5.0 * c[4])))
    }

    pub fn coefficients(&self) -> [f64; 5] {
        self.coeffs
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    /// Off-axis angle of the image corner farthest from the principal point.
    pub fn max_angle(&self) -> f64 {
        self.max_angle
    }

    /// Solve `r(θ) = radius` on [0, max_angle]. Newton from θ₀ = r/c₁ with a
    /// bisection step whenever Newton leaves the bracket.
    pub fn angle_for_radius(&self, radius: f64) -> Result<f64, CameraError> {
        if radius == 0.0 {
            return Ok(0.0);
        }
        let fail = CameraError::FThetaInversionFailure { radius };
        if radius.is_nan() || radius <= 0.0 || radius > self.radius(self.max_angle) * (1.0 + 1e-12) {
            return Err(fail);
        }
        let (mut lo, mut hi) = (0.0, self.max_angle);
        let mut theta = (radius / self.coeffs[0]).clamp(lo, hi);
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let f = self.radius(theta) - radius;
            if f < 0.0 {
                lo = theta;
            } else {
                hi = theta;
            }
            let slope = self.radius_derivative(theta);
            let mut next = theta - f / slope;
            if slope.is_nan() || slope <= 0.0 || !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - theta).abs();
            theta = next;
            if step < NEWTON_TOLERANCE {
                break;
            }
        }
        if (self.radius(theta) - radius).abs() < 1e-10 * self.coeffs[0] {
            Ok(theta)
        } else {
            Err(fail)
        }
    }
}

impl CameraIntrinsics {
    pub fn pinhole(width: u32, height: u32, fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, CameraError> {
        check_size(width, height)?;
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return Err(CameraError::InvalidIntrinsics("fx and fy must be positive".into()));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(CameraError::InvalidIntrinsics("principal point must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            projection: Projection::Pinhole { fx, fy, cx, cy },
        })
    }

    /// f-theta camera. `coeffs` holds c₁..cₖ for k ≤ 5; missing terms are zero.
    /// The polynomial must be strictly increasing out to the farthest corner.
    pub fn ftheta(width: u32, height: u32, cx: f64, cy: f64, coeffs: &[f64]) -> Result<Self, CameraError> {
        check_size(width, height)?;
        if coeffs.is_empty() || coeffs.len() > 5 {
            return Err(CameraError::InvalidIntrinsics(
                "f-theta needs between 1 and 5 coefficients".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) || !cx.is_finite() || !cy.is_finite() {
            return Err(CameraError::InvalidIntrinsics("non-finite f-theta parameter".into()));
        }
        if coeffs[0].is_nan() || coeffs[0] <= 0.0 {
            return Err(CameraError::InvalidIntrinsics("c1 must be positive".into()));
        }
        let mut c = [0.0; 5];
        c[..coeffs.len()].copy_from_slice(coeffs);
        let mut model = FTheta {
            cx,
            cy,
            coeffs: c,
            max_angle: 0.0,
        };

        let (w, h) = (width as f64, height as f64);
        let corner = [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
            .iter()
            .map(|&(x, y)| (x - cx).hypot(y - cy))
            .fold(0.0, f64::max);

        // Walk outward until the corner radius is reached, requiring r' > 0.
        const STEP: f64 = 1e-3;
        let mut theta = 0.0;
        loop {
            if model.radius_derivative(theta) <= 0.0 {
                return Err(CameraError::InvalidIntrinsics(format!(
                    "f-theta polynomial is not increasing at {theta:.3} rad before reaching the image corner"
                )));
            }
            if model.radius(theta + STEP) >= corner {
                break;
            }
            theta += STEP;
            if theta > std::f64::consts::PI {
                return Err(CameraError::InvalidIntrinsics(
                    "f-theta polynomial does not reach the image corner within 180 degrees".into(),
                ));
            }
        }
        let (mut lo, mut hi) = (theta, theta + STEP);
        if model.radius_derivative(hi) <= 0.0 {
            return Err(CameraError::InvalidIntrinsics(
                "f-theta polynomial is not increasing at the image corner".into(),
            ));
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if model.radius(mid) < corner {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        model.max_angle = hi;

        Ok(Self {
            width,
            height,
            projection: Projection::FTheta(model),
        })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn principal_point(&self) -> (f64, f64) {
        match &self.projection {
            Projection::Pinhole { cx, cy, .. } => (*cx, *cy),
            Projection::FTheta(m) => (m.cx, m.cy),
        }
    }

    /// Whether `(px, py)` lies on the image, edges included.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        (0.0..=self.width as f64).contains(&px) && (0.0..=self.height as f64).contains(&py)
    }

    /// Unit direction in the camera optical frame for an image pixel.
    pub fn pixel_to_ray(&self, px: f64, py: f64) -> Result<Vector3<f64>, CameraError> {
        if !self.contains(px, py) {
            return Err(CameraError::PixelOutOfBounds {
                px,
                py,
                width: self.width,
                height: self.height,
            });
        }
        match &self.projection {
            Projection::Pinhole { fx, fy, cx, cy } => {
                Ok(Vector3::new((px - cx) / fx, (py - cy) / fy, 1.0).normalize())
            }
            Projection::FTheta(m) => {
                let (dx, dy) = (px - m.cx, py - m.cy);
                let r = dx.hypot(dy);
                if r == 0.0 {
                    return Ok(Vector3::z());
                }
                let theta = m.angle_for_radius(r)?;
                let (s, c) = theta.sin_cos();
                Ok(Vector3::new(s * dx / r, s * dy / r, c))
            }
        }
    }

    /// Forward projection of a camera-frame direction. The result may fall
    /// outside the image; use [`Self::contains`] to test visibility.
    pub fn ray_to_pixel(&self, dir: &Vector3<f64>) -> Result<(f64, f64), CameraError> {
        let n = dir.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(CameraError::InvalidDirection);
        }
        match &self.projection {
            Projection::Pinhole { fx, fy, cx, cy } => {
                if dir.z <= 0.0 {
                    return Err(CameraError::BehindCamera);
                }
                Ok((cx + fx * dir.x / dir.z, cy + fy * dir.y / dir.z))
            }
            Projection::FTheta(m) => {
                let rho = dir.x.hypot(dir.y);
                let theta = rho.atan2(dir.z);
                if theta > m.max_angle {
                    return Err(if dir.z <= 0.0 {
                        CameraError::BehindCamera
                    } else {
                        CameraError::OutsideFieldOfView
                    });
                }
                if rho == 0.0 {
                    return Ok((m.cx, m.cy));
                }
                let r = m.radius(theta);
                Ok((m.cx + r * dir.x / rho, m.cy + r * dir.y / rho))
            }
        }
    }
}

fn check_size(width: u32, height: u32) -> Result<(), CameraError> {
    if width == 0 || height == 0 {
        return Err(CameraError::InvalidIntrinsics("image size must be nonzero".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pinhole() -> CameraIntrinsics {
        CameraIntrinsics::pinhole(1920, 1208, 960.0, 960.0, 960.0, 604.0).unwrap()
    }

    #[test]
    fn principal_point_is_optical_axis() {
        let ray = pinhole().pixel_to_ray(960.0, 604.0).unwrap();
        assert_eq!(ray, Vector3::new(0.0, 0.0, 1.0));
        let (u, v) = pinhole().ray_to_pixel(&Vector3::z()).unwrap();
        assert_eq!((u, v), (960.0, 604.0));
    }

    #[test]
    fn pinhole_45_degrees_at_focal_offset() {
        let ray = pinhole().pixel_to_ray(1920.0, 604.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(ray.x, s, epsilon = 1e-15);
        assert_abs_diff_eq!(ray.y, 0.0);
        assert_abs_diff_eq!(ray.z, s, epsilon = 1e-15);
    }

    #[test]
    fn linear_ftheta_inverts_exactly() {
        let cam = CameraIntrinsics::ftheta(1920, 1208, 960.0, 604.0, &[800.0]).unwrap();
        // 400 px from the principal point along the 3-4-5 diagonal.
        let ray = cam.pixel_to_ray(960.0 + 240.0, 604.0 + 320.0).unwrap();
        let theta = ray.z.acos();
        assert_abs_diff_eq!(theta, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ray.y / ray.x, 320.0 / 240.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ray.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn out_of_bounds_pixel() {
        assert!(matches!(
            pinhole().pixel_to_ray(-0.5, 10.0),
            Err(CameraError::PixelOutOfBounds { .. })
        ));
        assert!(matches!(
            pinhole().pixel_to_ray(10.0, 1208.01),
            Err(CameraError::PixelOutOfBounds { .. })
        ));
        assert!(pinhole().pixel_to_ray(1920.0, 1208.0).is_ok());
    }

    #[test]
    fn behind_and_outside() {
        assert_eq!(
            pinhole().ray_to_pixel(&Vector3::new(0.0, 0.0, -1.0)),
            Err(CameraError::BehindCamera)
        );
        let fish = CameraIntrinsics::ftheta(1920, 1208, 960.0, 604.0, &[930.0, 0.0, -8.0]).unwrap();
        assert_eq!(
            fish.ray_to_pixel(&Vector3::new(1.0, 0.0, 0.05)),
            Err(CameraError::OutsideFieldOfView)
        );
        assert_eq!(
            fish.ray_to_pixel(&Vector3::new(0.0, 0.0, -1.0)),
            Err(CameraError::BehindCamera)
        );
    }

    #[test]
    fn ftheta_rejects_bad_polynomials() {
        assert!(CameraIntrinsics::ftheta(1920, 1208, 960.0, 604.0, &[-1.0]).is_err());
        assert!(CameraIntrinsics::ftheta(1920, 1208, 960.0, 604.0, &[]).is_err());
        // Turns over at ~0.41 rad, long before the ~1134 px corner radius.
        assert!(CameraIntrinsics::ftheta(1920, 1208, 960.0, 604.0, &[900.0, 0.0, -1800.0]).is_err());
        assert!(CameraIntrinsics::pinhole(1920, 1208, 0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ftheta_max_angle_hits_corner() {
        let cam = CameraIntrinsics::ftheta(1920, 1208, 960.0, 604.0, &[930.0, 0.0, -8.0]).unwrap();
        let Projection::FTheta(m) = cam.projection() else { unreachable!() };
        let corner = 960.0f64.hypot(604.0);
        assert_abs_diff_eq!(m.radius(m.max_angle()), corner, epsilon = 1e-9);
        assert!(cam.pixel_to_ray(0.0, 0.0).is_ok());
        assert!(cam.pixel_to_ray(1920.0, 1208.0).is_ok());
    }

    #[test]
    fn bisection_fallback_on_stiff_polynomial() {
        // Strong higher-order terms push plain Newton from r/c1 out of the bracket.
        let cam = CameraIntrinsics::ftheta(1920, 1208, 960.0, 604.0, &[50.0, 0.0, 0.0, 0.0, 900.0]).unwrap();
        let Projection::FTheta(m) = cam.projection() else { unreachable!() };
        for r in [1.0, 100.0, 500.0, 1000.0, 1130.0] {
            let theta = m.angle_for_radius(r).unwrap();
            assert!((m.radius(theta) - r).abs() < 1e-10 * 50.0);
        }
    }
}
