//! Deterministic synthetic inputs with known answers.

use std::f64::consts::PI;

use glam::DVec3;

use crate::camera::CameraModel;
use crate::envlight::{decode_sky, EnvMap, SkyParams, SKY_LATENT_DIM};
use crate::error::Result;
use crate::geometry::{primitives, Aabb, TriangleMesh};
use crate::recon::RangeSample;
use crate::rng::{sample_rng, uniform, Purpose};

/// Range samples of a sphere seen from a ring of sensors.
///
/// Sensor origins sit at `3 · radius` from the center, at random azimuths
/// and elevations within ±50°. Each ray aims at a random point on the
/// hemisphere facing its origin, so every ray hits and its depth is exact.
pub fn sphere_samples(center: DVec3, radius: f64, count: usize, seed: u64) -> Vec<RangeSample> {
    (0..count as u64)
        .map(|i| {
            let mut r = sample_rng(seed, Purpose::Fixture, i, 0);
            let az = 2.0 * PI * uniform(&mut r);
            let el = (uniform(&mut r) * 2.0 - 1.0) * 50f64.to_radians();
            let origin = center + 3.0 * radius * DVec3::new(az.cos() * el.cos(), az.sin() * el.cos(), el.sin());
            let toward = (origin - center).normalize();
            // Uniform point on the sphere, mirrored into the visible hemisphere
            // and kept away from grazing incidence.
            let z = 2.0 * uniform(&mut r) - 1.0;
            let phi = 2.0 * PI * uniform(&mut r);
            let s = (1.0 - z * z).sqrt();
            let mut n = DVec3::new(s * phi.cos(), s * phi.sin(), z);
            if n.dot(toward) < 0.0 {
                n = -n;
            }
            if n.dot(toward) < 0.4 {
                n = (n + toward).normalize();
            }
            let p = center + radius * n;
            let d = p - origin;
            RangeSample::hit(origin, d, d.length())
        })
        .collect()
}

/// Unit-height box standing on a large ground plane, and the box bounds.
pub fn box_on_plane() -> (TriangleMesh, Aabb) {
    let bounds = Aabb::new(DVec3::new(-0.5, -0.5, 0.0), DVec3::new(0.5, 0.5, 1.0));
    let mut mesh = primitives::plane_grid(DVec3::ZERO, 8.0, 4, DVec3::splat(0.6));
    mesh.append(&primitives::cuboid(bounds.min, bounds.max, DVec3::new(0.7, 0.4, 0.3)));
    (mesh, bounds)
}

/// Camera high above the origin looking straight down, covering about
/// `±half_extent` meters of ground.
pub fn overhead_camera(size: usize, half_extent: f64) -> CameraModel {
    let height = 20.0;
    let fov = 2.0 * (half_extent / height).atan();
    CameraModel::look_at(DVec3::new(0.0, 0.0, height), DVec3::ZERO, DVec3::Y, size, size, fov).expect("valid camera")
}

/// Unit direction for a compass azimuth (clockwise from north, +y) and an
/// elevation, both in degrees.
pub fn compass_direction(azimuth_deg: f64, elevation_deg: f64) -> DVec3 {
    let (a, e) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    DVec3::new(a.sin() * e.cos(), a.cos() * e.cos(), e.sin())
}

/// Neutral decoded sky with a sun of the given peak intensity.
pub fn sun_dome(sun: DVec3, f_int: f64, height: usize) -> Result<EnvMap> {
    decode_sky(&SkyParams::new([0.0; SKY_LATENT_DIM], f_int, sun)?, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_samples_hit_the_surface_first() {
        for s in sphere_samples(DVec3::ZERO, 1.0, 500, 0) {
            let p = s.hit_point().unwrap();
            assert!((p.length() - 1.0).abs() < 1e-12);
            // Analytic first intersection.
            let o = s.ray.origin;
            let d = s.ray.direction;
            let b = o.dot(d);
            let t = -b - (b * b - (o.length_squared() - 1.0)).sqrt();
            assert!((t - s.depth.unwrap()).abs() < 1e-9);
        }
    }
}
