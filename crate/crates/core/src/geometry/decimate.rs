//! Quadric error metric decimation by greedy edge collapse.
//!
//! Each vertex accumulates the area-weighted plane quadrics of its faces;
//! open boundaries get extra constraint planes perpendicular to the boundary
//! face so outlines are kept. Collapses are taken cheapest first. A collapse
//! is skipped when it would break the link condition, pinch two boundary
//! vertices across an interior edge, or flip a surrounding face.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use glam::{DMat3, DVec3};

use super::TriangleMesh;
use crate::error::{Error, Result};

/// Default decimation target as a fraction of the input triangle count.
pub const DEFAULT_DECIMATE_FRACTION: f64 = 0.10;

const BOUNDARY_WEIGHT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn plane(n: DVec3, d: f64, weight: f64) -> Quadric {
        let (a, b, c) = (n.x, n.y, n.z);
        Quadric([a * a, a * b, a * c, a * d, b * b, b * c, b * d, c * c, c * d, d * d].map(|v| v * weight))
    }

    fn add(&self, o: &Quadric) -> Quadric {
        let mut out = self.0;
        for (a, b) in out.iter_mut().zip(o.0) {
            *a += b;
        }
        Quadric(out)
    }

    fn error(&self, p: DVec3) -> f64 {
        let q = &self.0;
        let (x, y, z) = (p.x, p.y, p.z);
        let e = q[0] * x * x
            + 2.0 * q[1] * x * y
            + 2.0 * q[2] * x * z
            + 2.0 * q[3] * x
            + q[4] * y * y
            + 2.0 * q[5] * y * z
            + 2.0 * q[6] * y
            + q[7] * z * z
            + 2.0 * q[8] * z
            + q[9];
        e.max(0.0)
    }

    /// Minimizer of the quadric when its 3×3 block is well conditioned.
    fn optimum(&self) -> Option<DVec3> {
        let q = &self.0;
        let a = DMat3::from_cols(
            DVec3::new(q[0], q[1], q[2]),
            DVec3::new(q[1], q[4], q[5]),
            DVec3::new(q[2], q[5], q[7]),
        );
        let det = a.determinant();
        let scale = q[0].abs().max(q[4].abs()).max(q[7].abs());
        if !(det.abs() > 1e-10 * scale.powi(3)) {
            return None;
        }
        let p = a.inverse() * DVec3::new(-q[3], -q[6], -q[8]);
        p.is_finite().then_some(p)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    v0: u32,
    v1: u32,
    stamp0: u32,
    stamp1: u32,
    target: DVec3,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    /// Reversed so `BinaryHeap` pops the cheapest collapse; ties resolve on
    /// the vertex pair to keep the order deterministic.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.v0.cmp(&self.v0))
            .then_with(|| other.v1.cmp(&self.v1))
    }
}

struct Decimator {
    positions: Vec<DVec3>,
    triangles: Vec<[u32; 3]>,
    tri_alive: Vec<bool>,
    vert_tris: Vec<Vec<u32>>,
    quadrics: Vec<Quadric>,
    stamps: Vec<u32>,
    live_triangles: usize,
}

impl Decimator {
    fn new(mesh: &TriangleMesh) -> Decimator {
        let n = mesh.vertex_count();
        let mut vert_tris = vec![Vec::new(); n];
        let mut quadrics = vec![Quadric::default(); n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for &v in tri {
                vert_tris[v as usize].push(t as u32);
            }
            let [a, b, c] = mesh.triangle_positions(t);
            let cross = (b - a).cross(c - a);
            let area = 0.5 * cross.length();
            if let Some(nrm) = cross.try_normalize() {
                let q = Quadric::plane(nrm, -nrm.dot(a), area);
                for &v in tri {
                    quadrics[v as usize] = quadrics[v as usize].add(&q);
                }
            }
        }
        let mut d = Decimator {
            positions: mesh.positions.clone(),
            triangles: mesh.triangles.clone(),
            tri_alive: vec![true; mesh.triangle_count()],
            vert_tris,
            quadrics,
            stamps: vec![0; n],
            live_triangles: mesh.triangle_count(),
        };
        d.add_boundary_constraints();
        d
    }

    fn add_boundary_constraints(&mut self) {
        for t in 0..self.triangles.len() {
            let tri = self.triangles[t];
            let [a, b, c] = tri.map(|v| self.positions[v as usize]);
            let Some(n) = (b - a).cross(c - a).try_normalize() else {
                continue;
            };
            for e in 0..3 {
                let (u, v) = (tri[e], tri[(e + 1) % 3]);
                if self.edge_triangles(u, v).len() != 1 {
                    continue;
                }
                let (pu, pv) = (self.positions[u as usize], self.positions[v as usize]);
                let dir = pv - pu;
                let Some(m) = dir.cross(n).try_normalize() else {
                    continue;
                };
                let q = Quadric::plane(m, -m.dot(pu), BOUNDARY_WEIGHT * dir.length_squared());
                self.quadrics[u as usize] = self.quadrics[u as usize].add(&q);
                self.quadrics[v as usize] = self.quadrics[v as usize].add(&q);
            }
        }
    }

    fn edge_triangles(&self, u: u32, v: u32) -> Vec<u32> {
        self.vert_tris[u as usize]
            .iter()
            .copied()
            .filter(|&t| self.tri_alive[t as usize] && self.triangles[t as usize].contains(&v))
            .collect()
    }

    fn neighbors(&self, v: u32) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for &t in &self.vert_tris[v as usize] {
            if self.tri_alive[t as usize] {
                out.extend(self.triangles[t as usize].iter().copied().filter(|&w| w != v));
            }
        }
        out
    }

    fn is_boundary_vertex(&self, v: u32) -> bool {
        self.neighbors(v)
            .into_iter()
            .any(|w| self.edge_triangles(v, w).len() == 1)
    }

    fn candidate(&self, a: u32, b: u32) -> Candidate {
        let (v0, v1) = (a.min(b), a.max(b));
        let q = self.quadrics[v0 as usize].add(&self.quadrics[v1 as usize]);
        let p0 = self.positions[v0 as usize];
        let p1 = self.positions[v1 as usize];
        let mut best = (q.error(p0), p0);
        let mut options = vec![p1, 0.5 * (p0 + p1)];
        options.extend(q.optimum());
        for p in options {
            let e = q.error(p);
            if e < best.0 {
                best = (e, p);
            }
        }
        Candidate {
            cost: best.0,
            v0,
            v1,
            stamp0: self.stamps[v0 as usize],
            stamp1: self.stamps[v1 as usize],
            target: best.1,
        }
    }

    fn is_current(&self, c: &Candidate) -> bool {
        !self.vert_tris[c.v0 as usize].is_empty()
            && !self.vert_tris[c.v1 as usize].is_empty()
            && self.stamps[c.v0 as usize] == c.stamp0
            && self.stamps[c.v1 as usize] == c.stamp1
    }

    fn collapse_allowed(&self, c: &Candidate) -> bool {
        let shared = self.edge_triangles(c.v0, c.v1);
        if shared.is_empty() {
            return false;
        }
        // Link condition: the only common neighbours are the apexes of the
        // faces on the edge.
        let common: Vec<u32> = self
            .neighbors(c.v0)
            .intersection(&self.neighbors(c.v1))
            .copied()
            .collect();
        if common.len() != shared.len() {
            return false;
        }
        if shared.len() == 2 && self.is_boundary_vertex(c.v0) && self.is_boundary_vertex(c.v1) {
            return false;
        }
        if self.live_triangles - shared.len() < 1 {
            return false;
        }
        // Reject face flips around both endpoints.
        for v in [c.v0, c.v1] {
            for &t in &self.vert_tris[v as usize] {
                let tri = self.triangles[t as usize];
                if !self.tri_alive[t as usize] || (tri.contains(&c.v0) && tri.contains(&c.v1)) {
                    continue;
                }
                let old = tri.map(|w| self.positions[w as usize]);
                let new = tri.map(|w| {
                    if w == c.v0 || w == c.v1 {
                        c.target
                    } else {
                        self.positions[w as usize]
                    }
                });
                let n_old = (old[1] - old[0]).cross(old[2] - old[0]);
                let n_new = (new[1] - new[0]).cross(new[2] - new[0]);
                if n_old.length_squared() <= f64::MIN_POSITIVE {
                    continue;
                }
                if n_new.dot(n_old) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// Collapses the edge into whichever endpoint lies closer to the target
    /// position; that endpoint keeps its normal and albedo.
    fn collapse(&mut self, c: &Candidate) -> u32 {
        let d0 = self.positions[c.v0 as usize].distance_squared(c.target);
        let d1 = self.positions[c.v1 as usize].distance_squared(c.target);
        let (keep, gone) = if d1 < d0 { (c.v1, c.v0) } else { (c.v0, c.v1) };
        self.positions[keep as usize] = c.target;
        self.quadrics[keep as usize] = self.quadrics[keep as usize].add(&self.quadrics[gone as usize]);
        let moved = std::mem::take(&mut self.vert_tris[gone as usize]);
        for t in moved {
            if !self.tri_alive[t as usize] {
                continue;
            }
            let tri = &mut self.triangles[t as usize];
            if tri.contains(&keep) {
                self.tri_alive[t as usize] = false;
                self.live_triangles -= 1;
                let tri = *tri;
                for w in tri {
                    if w != gone {
                        self.vert_tris[w as usize].retain(|&x| x != t);
                    }
                }
            } else {
                for w in tri.iter_mut() {
                    if *w == gone {
                        *w = keep;
                    }
                }
                self.vert_tris[keep as usize].push(t);
            }
        }
        self.stamps[keep as usize] += 1;
        keep
    }
}

/// Reduces `mesh` to at most `target_triangles` triangles, or as far as the
/// topology allows. Vertex normals and albedo travel with the surviving
/// endpoint of every collapse.
pub fn decimate(mesh: &TriangleMesh, target_triangles: usize) -> Result<TriangleMesh> {
    if target_triangles < 4 {
        return Err(Error::precondition(format!(
            "decimation target must be at least 4 triangles, got {target_triangles}"
        )));
    }
    if mesh.triangle_count() <= target_triangles {
        return Ok(mesh.clone());
    }
    let mut dec = Decimator::new(mesh);

    let mut edges: Vec<(u32, u32)> = mesh
        .triangles
        .iter()
        .flat_map(|t| (0..3).map(move |e| (t[e].min(t[(e + 1) % 3]), t[e].max(t[(e + 1) % 3]))))
        .filter(|(a, b)| a != b)
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let mut heap: BinaryHeap<Candidate> = edges.iter().map(|&(a, b)| dec.candidate(a, b)).collect();

    while dec.live_triangles > target_triangles {
        let Some(c) = heap.pop() else { break };
        if !dec.is_current(&c) || !dec.collapse_allowed(&c) {
            continue;
        }
        let keep = dec.collapse(&c);
        for w in dec.neighbors(keep) {
            heap.push(dec.candidate(keep, w));
        }
    }

    // Compact the surviving vertices in their original order.
    let mut remap = vec![u32::MAX; mesh.vertex_count()];
    let mut out = TriangleMesh::empty();
    for (t, tri) in dec.triangles.iter().enumerate() {
        if !dec.tri_alive[t] {
            continue;
        }
        for &v in tri {
            remap[v as usize] = 0;
        }
    }
    for v in 0..mesh.vertex_count() {
        if remap[v] == 0 {
            remap[v] = out.positions.len() as u32;
            out.positions.push(dec.positions[v]);
            out.normals.push(mesh.normals[v]);
            out.albedo.push(mesh.albedo[v]);
        }
    }
    for (t, tri) in dec.triangles.iter().enumerate() {
        if dec.tri_alive[t] {
            out.triangles.push(tri.map(|v| remap[v as usize]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{marching_cubes, primitives, Aabb, SdfGrid};

    #[test]
    fn small_target_is_rejected() {
        let m = primitives::plane_grid(DVec3::ZERO, 1.0, 4, DVec3::splat(0.5));
        assert!(decimate(&m, 3).is_err());
    }

    #[test]
    fn four_triangles_to_four_is_noop() {
        let m = primitives::plane_grid(DVec3::ZERO, 1.0, 2, DVec3::splat(0.5));
        let m = TriangleMesh {
            triangles: m.triangles[..4].to_vec(),
            ..m
        };
        assert_eq!(decimate(&m, 4).unwrap(), m);
    }

    #[test]
    fn planar_grid_collapses_to_corners_exactly() {
        let m = primitives::plane_grid(DVec3::new(0.0, 0.0, 0.25), 1.0, 8, DVec3::splat(0.5));
        // Target below what a square can reach: the corners lock it at 2.
        let out = decimate(&m, 4).unwrap();
        let out = decimate(&out, 4).unwrap();
        out.validate().unwrap();
        assert!(out.triangle_count() <= 4);
        for p in &out.positions {
            assert_eq!(p.z, 0.25);
        }
        // Area is preserved because the boundary is locked.
        let area: f64 = (0..out.triangle_count())
            .map(|t| 0.5 * out.face_normal(t).length())
            .sum();
        assert!((area - 4.0).abs() < 1e-9, "area {area}");
    }

    #[test]
    fn never_increases_triangle_count_and_keeps_invariants() {
        let grid = SdfGrid::from_fn(Aabb::new(DVec3::splat(-1.5), DVec3::splat(1.5)), [24; 3], |p| {
            (p - DVec3::new(0.2, 0.0, 0.0)).length() - 1.0
        })
        .unwrap();
        let mesh = marching_cubes(&grid);
        for frac in [0.9, 0.5, 0.1] {
            let target = ((mesh.triangle_count() as f64 * frac) as usize).max(4);
            let out = decimate(&mesh, target).unwrap();
            out.validate().unwrap();
            assert!(out.triangle_count() <= mesh.triangle_count());
            assert!(out.triangle_count() <= target);
        }
    }

    #[test]
    fn surviving_vertices_keep_their_attributes() {
        let grid = SdfGrid::from_fn(Aabb::new(DVec3::splat(-1.5), DVec3::splat(1.5)), [16; 3], |p| {
            p.length() - 1.0
        })
        .unwrap();
        let mut mesh = marching_cubes(&grid);
        for (i, a) in mesh.albedo.iter_mut().enumerate() {
            *a = DVec3::new((i % 7) as f64 / 7.0, 0.5, 0.25);
        }
        let out = decimate(&mesh, mesh.triangle_count() / 4).unwrap();
        for (n, a) in out.normals.iter().zip(&out.albedo) {
            let found = mesh.normals.iter().zip(&mesh.albedo).any(|(m, b)| m == n && b == a);
            assert!(found, "attributes must come from an input vertex");
        }
    }
}
