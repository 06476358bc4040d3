//! Per-camera calibration documents.
//!
//! ```json
//! {
//!   "id": "cam3",
//!   "model": "ftheta",
//!   "width": 1920,
//!   "height": 1208,
//!   "fov_deg": 120.0,
//!   "params": { "cx": 960.0, "cy": 604.0, "coefficients": [930.0, 0.0, -8.0] },
//!   "extrinsics": { "x": 1.8, "y": 0.0, "z": 1.5, "yaw_deg": 0.0, "pitch_deg": 3.0, "roll_deg": 0.0 }
//! }
//! ```
//!
//! Pinhole `params` are `{ "fx", "fy", "cx", "cy" }`. Unknown fields are
//! rejected at every level.

use serde::{Deserialize, Serialize};

use super::{CameraError, CameraExtrinsics, CameraIntrinsics, Projection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pinhole,
    Ftheta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub id: String,
    pub model: ModelKind,
    pub width: u32,
    pub height: u32,
    pub fov_deg: f64,
    pub params: serde_json::Value,
    pub extrinsics: ExtrinsicsFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrinsicsFile {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PinholeParams {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FThetaParams {
    cx: f64,
    cy: f64,
    coefficients: Vec<f64>,
}

/// A calibrated camera: intrinsics, mounting, and the horizontal field of
/// view used by the linear heading model.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub id: String,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
    pub fov_deg: f64,
}

impl Camera {
    pub fn from_file(file: &CalibrationFile) -> Result<Self, CameraError> {
        if file.id.trim().is_empty() {
            return Err(CameraError::InvalidIntrinsics("camera id is empty".into()));
        }
        if !(file.fov_deg > 0.0 && file.fov_deg < 360.0) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "fov_deg {} is outside (0, 360)",
                file.fov_deg
            )));
        }
        let bad_params = |e: serde_json::Error| CameraError::InvalidIntrinsics(format!("params: {e}"));
        let intrinsics = match file.model {
            ModelKind::Pinhole => {
                let p: PinholeParams = serde_json::from_value(file.params.clone()).map_err(bad_params)?;
                CameraIntrinsics::pinhole(file.width, file.height, p.fx, p.fy, p.cx, p.cy)?
            }
            ModelKind::Ftheta => {
                let p: FThetaParams = serde_json::from_value(file.params.clone()).map_err(bad_params)?;
                CameraIntrinsics::ftheta(file.width, file.height, p.cx, p.cy, &p.coefficients)?
            }
        };
        let e = &file.extrinsics;
        let extrinsics = CameraExtrinsics::new(e.x, e.y, e.z, e.yaw_deg, e.pitch_deg, e.roll_deg)?;
        Ok(Self {
            id: file.id.clone(),
            intrinsics,
            extrinsics,
            fov_deg: file.fov_deg,
        })
    }

    pub fn to_file(&self) -> CalibrationFile {
        let i = &self.intrinsics;
        let (model, params) = match i.projection() {
            Projection::Pinhole { fx, fy, cx, cy } => (
                ModelKind::Pinhole,
                serde_json::to_value(PinholeParams {
                    fx: *fx,
                    fy: *fy,
                    cx: *cx,
                    cy: *cy,
                }),
            ),
            Projection::FTheta(m) => {
                let mut coefficients = m.coefficients().to_vec();
                while coefficients.len() > 1 && coefficients.last() == Some(&0.0) {
                    coefficients.pop();
                }
                let (cx, cy) = m.principal_point();
                (
                    ModelKind::Ftheta,
                    serde_json::to_value(FThetaParams { cx, cy, coefficients }),
                )
            }
        };
        let e = &self.extrinsics;
        let p = e.position();
        CalibrationFile {
            id: self.id.clone(),
            model,
            width: i.width(),
            height: i.height(),
            fov_deg: self.fov_deg,
            params: params.expect("plain numeric params always serialize"),
            extrinsics: ExtrinsicsFile {
                x: p.x,
                y: p.y,
                z: p.z,
                yaw_deg: e.yaw_deg(),
                pitch_deg: e.pitch_deg(),
                roll_deg: e.roll_deg(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FTHETA: &str = r#"{
        "id": "cam3", "model": "ftheta", "width": 1920, "height": 1208, "fov_deg": 120.0,
        "params": {"cx": 960.0, "cy": 604.0, "coefficients": [930.0, 0.0, -8.0]},
        "extrinsics": {"x": 1.8, "y": 0.0, "z": 1.5, "yaw_deg": 0.0, "pitch_deg": 3.0, "roll_deg": 0.0}
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let file: CalibrationFile = serde_json::from_str(FTHETA).unwrap();
        let cam = Camera::from_file(&file).unwrap();
        assert_eq!(cam.intrinsics.width(), 1920);
        assert_eq!(cam.to_file(), file);
    }

    #[test]
    fn unknown_fields_rejected() {
        let extra = FTHETA.replace("\"fov_deg\"", "\"lens\": \"x\", \"fov_deg\"");
        assert!(serde_json::from_str::<CalibrationFile>(&extra).is_err());

        let extra_param = FTHETA.replace("\"cx\": 960.0,", "\"cx\": 960.0, \"k1\": 0.1,");
        let file: CalibrationFile = serde_json::from_str(&extra_param).unwrap();
        assert!(Camera::from_file(&file).is_err());
    }

    #[test]
    fn pinhole_file() {
        let json = r#"{"id":"cam1","model":"pinhole","width":1920,"height":1208,"fov_deg":60.0,
            "params":{"fx":1663.0,"fy":1663.0,"cx":960.0,"cy":604.0},
            "extrinsics":{"x":1.8,"y":0.3,"z":1.4,"yaw_deg":0.0,"pitch_deg":2.0,"roll_deg":0.0}}"#;
        let file: CalibrationFile = serde_json::from_str(json).unwrap();
        let cam = Camera::from_file(&file).unwrap();
        assert_eq!(cam.to_file(), file);
        let bad = json.replace("\"model\":\"pinhole\"", "\"model\":\"ocam\"");
        assert!(serde_json::from_str::<CalibrationFile>(&bad).is_err());
    }
}
