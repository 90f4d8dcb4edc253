//! Lighting-aware digital twins for camera simulation.
//!
//! The crate reconstructs scene geometry as signed distance fields, extracts
//! and decimates meshes, estimates HDR sky domes from multi-camera panoramas,
//! renders G-buffers and shadow-ratio maps under those domes, and relights
//! frames after scene or lighting edits.
//!
//! Every stage is deterministic: randomized work draws from counter-based
//! streams keyed by seed and pixel, so results do not depend on the number of
//! worker threads.

pub mod camera;
pub mod envlight;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod panorama;
pub mod parallel;
pub mod raster;
pub mod recon;
pub mod relight;
pub mod render;
pub mod rng;
pub mod scene;

pub use camera::{CameraModel, RigidTransform};
pub use error::{Error, Result};
pub use raster::Image;

pub use glam::{DQuat, DVec3};
