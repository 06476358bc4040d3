//! Geolocation of road objects from a single calibrated camera and a GNSS
//! track.

pub mod camera;
pub mod geodesy;
pub mod pipeline;
pub mod session;
pub mod sync;
pub mod synth;
