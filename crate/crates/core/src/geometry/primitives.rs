//! Procedural meshes used for fixtures, inserted props and tests.

use std::f64::consts::PI;

use glam::DVec3;

use super::TriangleMesh;

/// Horizontal square at height `center.z` facing +z.
pub fn quad(center: DVec3, half_size: f64, albedo: DVec3) -> TriangleMesh {
    plane_grid(center, half_size, 1, albedo)
}

/// Horizontal `n × n` grid of quads facing +z, spanning
/// `center ± half_size` in x and y.
pub fn plane_grid(center: DVec3, half_size: f64, n: usize, albedo: DVec3) -> TriangleMesh {
    let n = n.max(1);
    let mut positions = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = -half_size + 2.0 * half_size * i as f64 / n as f64;
            let y = -half_size + 2.0 * half_size * j as f64 / n as f64;
            positions.push(center + DVec3::new(x, y, 0.0));
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    let idx = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let count = positions.len();
    TriangleMesh {
        positions,
        normals: vec![DVec3::Z; count],
        albedo: vec![albedo; count],
        triangles,
    }
}

/// Vertical rectangle in the plane `x = x0`, spanning the given y and z
/// ranges, facing `facing` (+x or −x).
pub fn wall_x(x0: f64, y: (f64, f64), z: (f64, f64), facing: f64, albedo: DVec3) -> TriangleMesh {
    let p = [
        DVec3::new(x0, y.0, z.0),
        DVec3::new(x0, y.1, z.0),
        DVec3::new(x0, y.1, z.1),
        DVec3::new(x0, y.0, z.1),
    ];
    let tris = if facing > 0.0 {
        vec![[0, 1, 2], [0, 2, 3]]
    } else {
        vec![[0, 2, 1], [0, 3, 2]]
    };
    let n = DVec3::new(facing.signum(), 0.0, 0.0);
    TriangleMesh {
        positions: p.to_vec(),
        normals: vec![n; 4],
        albedo: vec![albedo; 4],
        triangles: tris,
    }
}

/// Closed axis-aligned box with outward faces. Each face has its own four
/// vertices so normals stay flat.
pub fn cuboid(min: DVec3, max: DVec3, albedo: DVec3) -> TriangleMesh {
    let c = |x: bool, y: bool, z: bool| {
        DVec3::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    // Corners listed counter-clockwise seen from outside.
    let faces: [([DVec3; 4], DVec3); 6] = [
        (
            [
                c(true, false, false),
                c(true, true, false),
                c(true, true, true),
                c(true, false, true),
            ],
            DVec3::X,
        ),
        (
            [
                c(false, true, false),
                c(false, false, false),
                c(false, false, true),
                c(false, true, true),
            ],
            DVec3::NEG_X,
        ),
        (
            [
                c(true, true, false),
                c(false, true, false),
                c(false, true, true),
                c(true, true, true),
            ],
            DVec3::Y,
        ),
        (
            [
                c(false, false, false),
                c(true, false, false),
                c(true, false, true),
                c(false, false, true),
            ],
            DVec3::NEG_Y,
        ),
        (
            [
                c(false, false, true),
                c(true, false, true),
                c(true, true, true),
                c(false, true, true),
            ],
            DVec3::Z,
        ),
        (
            [
                c(false, true, false),
                c(true, true, false),
                c(true, false, false),
                c(false, false, false),
            ],
            DVec3::NEG_Z,
        ),
    ];
    let mut mesh = TriangleMesh::empty();
    for (corners, n) in faces {
        let base = mesh.positions.len() as u32;
        mesh.positions.extend_from_slice(&corners);
        mesh.normals.extend_from_slice(&[n; 4]);
        mesh.albedo.extend_from_slice(&[albedo; 4]);
        mesh.triangles.push([base, base + 1, base + 2]);
        mesh.triangles.push([base, base + 2, base + 3]);
    }
    mesh
}

/// Latitude-longitude sphere with exact radial normals. `inward` flips the
/// winding and normals, which turns it into a dome seen from inside.
pub fn uv_sphere(
    center: DVec3,
    radius: f64,
    segments: usize,
    rings: usize,
    inward: bool,
    albedo: DVec3,
) -> TriangleMesh {
    let segments = segments.max(3);
    let rings = rings.max(2);
    let mut positions = vec![center + DVec3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let theta = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            positions.push(center + radius * DVec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
        }
    }
    positions.push(center - DVec3::new(0.0, 0.0, radius));
    let south = (positions.len() - 1) as u32;
    let ring = |r: usize, s: usize| (1 + (r - 1) * segments + s % segments) as u32;
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b) = (ring(r, s), ring(r, s + 1));
            let (c, d) = (ring(r + 1, s), ring(r + 1, s + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    for s in 0..segments {
        triangles.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    if inward {
        for t in &mut triangles {
            t.swap(1, 2);
        }
    }
    let sign = if inward { -1.0 } else { 1.0 };
    let normals = positions.iter().map(|&p| sign * (p - center).normalize()).collect();
    let n = positions.len();
    TriangleMesh {
        positions,
        normals,
        albedo: vec![albedo; n],
        triangles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outward(mesh: &TriangleMesh, center: DVec3) -> bool {
        (0..mesh.triangle_count()).all(|t| {
            let [a, b, c] = mesh.triangle_positions(t);
            mesh.face_normal(t).dot((a + b + c) / 3.0 - center) > 0.0
        })
    }

    #[test]
    fn cuboid_faces_point_outward() {
        let m = cuboid(DVec3::ZERO, DVec3::new(1.0, 2.0, 3.0), DVec3::splat(0.3));
        m.validate().unwrap();
        assert_eq!(m.triangle_count(), 12);
        assert!(outward(&m, DVec3::new(0.5, 1.0, 1.5)));
        for t in 0..12 {
            let n = m.face_normal(t).normalize();
            assert!((n - m.normals[m.triangles[t][0] as usize]).length() < 1e-12);
        }
    }

    #[test]
    fn sphere_winding_matches_normals() {
        let m = uv_sphere(DVec3::ZERO, 2.0, 16, 8, false, DVec3::ONE * 0.5);
        m.validate().unwrap();
        assert!(outward(&m, DVec3::ZERO));
        let dome = uv_sphere(DVec3::ZERO, 2.0, 16, 8, true, DVec3::ONE * 0.5);
        assert!(!outward(&dome, DVec3::ZERO));
    }

    #[test]
    fn plane_grid_counts() {
        let m = plane_grid(DVec3::ZERO, 1.0, 4, DVec3::ONE * 0.5);
        assert_eq!(m.vertex_count(), 25);
        assert_eq!(m.triangle_count(), 32);
        assert!((0..32).all(|t| m.face_normal(t).z > 0.0));
    }
}
