//! Geometric kernel: triangle meshes, rays, BVH traversal, isosurface
//! extraction and quadric decimation.
//!
//! World frame is right-handed with +z up, +x east and +y north.

mod aabb;
mod bvh;
mod decimate;
mod marching_cubes;
mod mc_tables;
mod mesh;
pub mod ply;
pub mod primitives;
mod ray;
mod sdf;

pub use aabb::Aabb;
#[doc(hidden)]
pub use bvh::brute_force_nearest;
pub use bvh::{intersect, occluded, Bvh, Hit};
pub use decimate::{decimate, DEFAULT_DECIMATE_FRACTION};
pub use marching_cubes::{marching_cubes, marching_cubes_at};
pub use mesh::TriangleMesh;
pub use ray::Ray;
pub use sdf::{SdfGrid, DEFAULT_GRID_RESOLUTION};
