use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::CameraError;

const HORIZON_EPS: f64 = 1e-9;

/// Camera mounting in the rig frame.
///
/// `yaw_deg` turns the camera to the left (counter-clockwise seen from
/// above), `pitch_deg` tilts it down, `roll_deg` rotates it about its
/// viewing direction. With all three zero the optical axis points along
/// rig +x and image-right is rig −y.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraExtrinsics {
    position: Vector3<f64>,
    yaw_deg: f64,
    pitch_deg: f64,
    roll_deg: f64,
    rotation: Rotation3<f64>,
}

impl CameraExtrinsics {
    pub fn new(
        x: f64,
        y: f64,
        z: f64,
        yaw_deg: f64,
        pitch_deg: f64,
        roll_deg: f64,
    ) -> Result<Self, CameraError> {
        if [x, y, z, yaw_deg, pitch_deg, roll_deg].iter().any(|v| !v.is_finite()) {
            return Err(CameraError::InvalidExtrinsics("non-finite value".into()));
        }
        if z <= 0.0 {
            return Err(CameraError::NegativeHeight(z));
        }
        // Optical (x right, y down, z forward) -> rig (x forward, y left, z up).
        let optical_to_rig = Rotation3::from_matrix_unchecked(Matrix3::new(
            0.0, 0.0, 1.0, //
            -1.0, 0.0, 0.0, //
            0.0, -1.0, 0.0,
        ));
        let mount = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw_deg.to_radians())
            * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch_deg.to_radians())
            * Rotation3::from_axis_angle(&Vector3::x_axis(), roll_deg.to_radians());
        Ok(Self {
            position: Vector3::new(x, y, z),
            yaw_deg,
            pitch_deg,
            roll_deg,
            rotation: mount * optical_to_rig,
        })
    }

    pub fn position(&self) -> Vector3<f64> {
        self.position
    }

    pub fn height(&self) -> f64 {
        self.position.z
    }

    pub fn yaw_deg(&self) -> f64 {
        self.yaw_deg
    }

    pub fn pitch_deg(&self) -> f64 {
        self.pitch_deg
    }

    pub fn roll_deg(&self) -> f64 {
        self.roll_deg
    }

    /// Camera-optical → rig rotation.
    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }

    /// Rig-frame point expressed in the camera optical frame.
    pub fn rig_to_camera(&self, p_rig: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(p_rig - self.position))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigRay {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

pub fn camera_ray_to_rig(extr: &CameraExtrinsics, dir_cam: &Vector3<f64>) -> RigRay {
    RigRay {
        origin: extr.position,
        direction: extr.rotation * dir_cam,
    }
}

/// Where a rig-frame ray meets the ground plane z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundHit {
    /// Rig-frame hit point; z is 0.
    pub point: [f64; 3],
    /// Ray length from the camera to the hit.
    pub slant_distance: f64,
    /// Horizontal range from the camera's ground footprint to the hit.
    pub ground_distance: f64,
}

pub fn intersect_ground(origin: &Vector3<f64>, direction: &Vector3<f64>) -> Result<GroundHit, CameraError> {
    if origin.z <= 0.0 {
        return Err(CameraError::NegativeHeight(origin.z));
    }
    let n = direction.norm();
    if !n.is_finite() || n == 0.0 {
        return Err(CameraError::InvalidDirection);
    }
    let dir = direction / n;
    if dir.z >= -HORIZON_EPS {
        return Err(CameraError::AboveHorizon);
    }
    let t = -origin.z / dir.z;
    let (hx, hy) = (t * dir.x, t * dir.y);
    Ok(GroundHit {
        point: [origin.x + hx, origin.y + hy, 0.0],
        slant_distance: t,
        ground_distance: hx.hypot(hy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_vec(a: Vector3<f64>, b: [f64; 3]) {
        for i in 0..3 {
            assert_abs_diff_eq!(a[i], b[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn mounting_conventions() {
        let straight = CameraExtrinsics::new(0.0, 0.0, 1.5, 0.0, 0.0, 0.0).unwrap();
        assert_vec(camera_ray_to_rig(&straight, &Vector3::z()).direction, [1.0, 0.0, 0.0]);
        // image-right is rig −y, image-down is rig −z
        assert_vec(camera_ray_to_rig(&straight, &Vector3::x()).direction, [0.0, -1.0, 0.0]);
        assert_vec(camera_ray_to_rig(&straight, &Vector3::y()).direction, [0.0, 0.0, -1.0]);

        let left = CameraExtrinsics::new(0.0, 0.0, 1.5, 90.0, 0.0, 0.0).unwrap();
        assert_vec(camera_ray_to_rig(&left, &Vector3::z()).direction, [0.0, 1.0, 0.0]);

        let down = CameraExtrinsics::new(0.0, 0.0, 1.5, 0.0, 10.0, 0.0).unwrap();
        let a = 10f64.to_radians();
        assert_vec(camera_ray_to_rig(&down, &Vector3::z()).direction, [a.cos(), 0.0, -a.sin()]);
    }

    #[test]
    fn rig_to_camera_inverts_mounting() {
        let e = CameraExtrinsics::new(1.8, -0.3, 1.4, 7.0, 4.0, -1.5).unwrap();
        let p = Vector3::new(12.0, 3.0, 0.0);
        let c = e.rig_to_camera(&p);
        let back = e.rotation() * c + e.position();
        assert_vec(back, [12.0, 3.0, 0.0]);
    }

    #[test]
    fn rejects_camera_below_ground() {
        assert!(matches!(
            CameraExtrinsics::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            Err(CameraError::NegativeHeight(_))
        ));
    }

    #[test]
    fn thirty_degree_depression() {
        let a = 30f64.to_radians();
        let hit = intersect_ground(&Vector3::new(0.0, 0.0, 1.5), &Vector3::new(a.cos(), 0.0, -a.sin())).unwrap();
        assert_abs_diff_eq!(hit.slant_distance, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(hit.ground_distance, 1.5 / a.tan(), epsilon = 1e-12);
        assert_abs_diff_eq!(hit.ground_distance, 2.5981, epsilon = 1e-4);
        assert_eq!(hit.point[2], 0.0);
    }

    #[test]
    fn parallel_ray_never_hits() {
        assert_eq!(
            intersect_ground(&Vector3::new(0.0, 0.0, 1.5), &Vector3::new(1.0, 0.0, 0.0)),
            Err(CameraError::AboveHorizon)
        );
        assert_eq!(
            intersect_ground(&Vector3::new(0.0, 0.0, 1.5), &Vector3::new(1.0, 0.0, 0.1)),
            Err(CameraError::AboveHorizon)
        );
        assert!(matches!(
            intersect_ground(&Vector3::new(0.0, 0.0, -1.0), &Vector3::new(1.0, 0.0, -0.1)),
            Err(CameraError::NegativeHeight(_))
        ));
    }
}
