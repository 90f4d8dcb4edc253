use glam::DVec3;

use super::Aabb;
use crate::camera::RigidTransform;
use crate::error::{Error, Result};

/// Indexed triangle mesh with per-vertex normal and diffuse albedo `k_d`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub positions: Vec<DVec3>,
    pub normals: Vec<DVec3>,
    /// Linear RGB in `[0, 1]`.
    pub albedo: Vec<DVec3>,
    pub triangles: Vec<[u32; 3]>,
}

pub const DEFAULT_ALBEDO: DVec3 = DVec3::splat(0.5);

impl TriangleMesh {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Mesh with area-weighted vertex normals and uniform albedo.
    pub fn from_triangles(positions: Vec<DVec3>, triangles: Vec<[u32; 3]>, albedo: DVec3) -> Self {
        let n = positions.len();
        let mut mesh = TriangleMesh {
            positions,
            normals: vec![DVec3::Z; n],
            albedo: vec![albedo; n],
            triangles,
        };
        mesh.recompute_normals();
        mesh
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle_positions(&self, t: usize) -> [DVec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.positions[a as usize],
            self.positions[b as usize],
            self.positions[c as usize],
        ]
    }

    /// Unnormalized face normal (twice the area vector).
    pub fn face_normal(&self, t: usize) -> DVec3 {
        let [a, b, c] = self.triangle_positions(t);
        (b - a).cross(c - a)
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.positions)
    }

    /// Diagonal of the bounding box; zero for an empty mesh.
    pub fn diameter(&self) -> f64 {
        self.bounds().diagonal()
    }

    pub fn recompute_normals(&mut self) {
        let mut acc = vec![DVec3::ZERO; self.positions.len()];
        for t in 0..self.triangles.len() {
            let n = self.face_normal(t);
            for &v in &self.triangles[t] {
                acc[v as usize] += n;
            }
        }
        self.normals = acc.into_iter().map(|n| n.try_normalize().unwrap_or(DVec3::Z)).collect();
    }

    pub fn transformed(&self, pose: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            positions: self.positions.iter().map(|&p| pose.transform_point(p)).collect(),
            normals: self
                .normals
                .iter()
                .map(|&n| pose.transform_vector(n).normalize())
                .collect(),
            albedo: self.albedo.clone(),
            triangles: self.triangles.clone(),
        }
    }

    /// Appends `other`, returning the index of its first triangle.
    pub fn append(&mut self, other: &TriangleMesh) -> usize {
        let base = self.positions.len() as u32;
        let first = self.triangles.len();
        self.positions.extend_from_slice(&other.positions);
        self.normals.extend_from_slice(&other.normals);
        self.albedo.extend_from_slice(&other.albedo);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        first
    }

    pub fn with_albedo(mut self, albedo: DVec3) -> Self {
        self.albedo = vec![albedo; self.positions.len()];
        self
    }

    /// Checks the structural invariants: finite coordinates, in-range
    /// indices, unit normals and albedo inside the unit cube.
    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if self.normals.len() != n || self.albedo.len() != n {
            return Err(Error::precondition(format!(
                "mesh attribute lengths differ: {} positions, {} normals, {} albedo",
                n,
                self.normals.len(),
                self.albedo.len()
            )));
        }
        if let Some(i) = self.positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::precondition(format!("vertex {i} is not finite")));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v as usize >= n) {
                return Err(Error::precondition(format!(
                    "triangle {t} references a vertex out of range ({tri:?}, {n} vertices)"
                )));
            }
        }
        if let Some(i) = self.normals.iter().position(|v| (v.length() - 1.0).abs() > 1e-4) {
            return Err(Error::precondition(format!("normal {i} is not unit length")));
        }
        if let Some(i) = self
            .albedo
            .iter()
            .position(|a| !(a.cmpge(DVec3::ZERO).all() && a.cmple(DVec3::ONE).all()))
        {
            return Err(Error::precondition(format!("albedo {i} outside [0, 1]")));
        }
        Ok(())
    }
}
