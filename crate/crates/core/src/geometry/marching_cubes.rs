use std::collections::HashMap;

use glam::DVec3;

use super::mc_tables::TRIANGLES;
use super::mesh::DEFAULT_ALBEDO;
use super::{SdfGrid, TriangleMesh};

const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Extracts the zero level set. Nodes with `s ≤ 0` count as inside, so a
/// node sitting exactly on zero never produces ambiguous tie handling.
///
/// Vertices are shared between neighbouring cells (one per crossed lattice
/// edge), triangles wind counter-clockwise seen from outside, and normals
/// come from the normalized central-difference gradient interpolated along
/// each edge. A grid without a sign change yields an empty mesh.
pub fn marching_cubes(grid: &SdfGrid) -> TriangleMesh {
    marching_cubes_at(grid, 0.0)
}

/// [`marching_cubes`] for the `s = iso` level set.
pub fn marching_cubes_at(grid: &SdfGrid, iso: f64) -> TriangleMesh {
    let [nx, ny, nz] = grid.resolution();
    let mut mesh = TriangleMesh::empty();
    let inside = |v: f64| v <= iso;

    let any_in = grid.values().iter().any(|&v| inside(v));
    let any_out = grid.values().iter().any(|&v| !inside(v));
    if !(any_in && any_out) {
        return mesh;
    }

    // Keyed by (lower node index, axis).
    let mut edge_vertex: HashMap<(usize, u8), u32> = HashMap::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut case = 0usize;
                let mut vals = [0.0; 8];
                for (c, off) in CORNERS.iter().enumerate() {
                    vals[c] = grid.value(i + off[0], j + off[1], k + off[2]);
                    if inside(vals[c]) {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRIANGLES[case];
                for tri in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
                    let mut ids = [0u32; 3];
                    for (slot, &e) in ids.iter_mut().zip(tri) {
                        let (a, b) = EDGES[e as usize];
                        let na = [i + CORNERS[a][0], j + CORNERS[a][1], k + CORNERS[a][2]];
                        let nb = [i + CORNERS[b][0], j + CORNERS[b][1], k + CORNERS[b][2]];
                        let axis = (0..3).find(|&x| na[x] != nb[x]).unwrap() as u8;
                        let (lo, hi, slo, shi) = if na[axis as usize] < nb[axis as usize] {
                            (na, nb, vals[a], vals[b])
                        } else {
                            (nb, na, vals[b], vals[a])
                        };
                        let key = (grid.index(lo[0], lo[1], lo[2]), axis);
                        *slot = *edge_vertex.entry(key).or_insert_with(|| {
                            let t = ((iso - slo) / (shi - slo)).clamp(0.0, 1.0);
                            let plo = grid.node_position(lo[0], lo[1], lo[2]);
                            let phi = grid.node_position(hi[0], hi[1], hi[2]);
                            let glo = grid.node_gradient(lo[0], lo[1], lo[2]);
                            let ghi = grid.node_gradient(hi[0], hi[1], hi[2]);
                            let n = (glo + t * (ghi - glo)).try_normalize().unwrap_or(DVec3::Z);
                            mesh.positions.push(plo + t * (phi - plo));
                            mesh.normals.push(n);
                            mesh.albedo.push(DEFAULT_ALBEDO);
                            (mesh.positions.len() - 1) as u32
                        });
                    }
                    // The table winds toward the inside; flip to face outward.
                    mesh.triangles.push([ids[0], ids[2], ids[1]]);
                }
            }
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;

    fn sphere_grid(n: usize) -> SdfGrid {
        SdfGrid::from_fn(Aabb::new(DVec3::splat(-2.0), DVec3::splat(2.0)), [n; 3], |p| {
            p.length() - 1.0
        })
        .unwrap()
    }

    #[test]
    fn sphere_vertices_lie_near_unit_radius() {
        let grid = sphere_grid(64);
        let h = grid.spacing().x;
        let mesh = marching_cubes(&grid);
        mesh.validate().unwrap();
        assert!(mesh.triangle_count() > 1000);
        for p in &mesh.positions {
            let r = p.length();
            assert!(r >= 1.0 - 2.0 * h && r <= 1.0 + 2.0 * h, "radius {r}");
        }
    }

    #[test]
    fn triangles_face_outward_and_agree_with_normals() {
        let mesh = marching_cubes(&sphere_grid(24));
        let mut agree = 0;
        for t in 0..mesh.triangle_count() {
            let f = mesh.face_normal(t);
            let [a, b, c] = mesh.triangle_positions(t);
            if f.length() < 1e-12 {
                continue;
            }
            assert!(f.dot(a + b + c) > 0.0, "triangle {t} faces inward");
            if f.dot(mesh.normals[mesh.triangles[t][0] as usize]) > 0.0 {
                agree += 1;
            }
        }
        assert!(agree as f64 > 0.99 * mesh.triangle_count() as f64);
    }

    #[test]
    fn uniform_grids_give_empty_meshes() {
        let b = Aabb::new(DVec3::ZERO, DVec3::ONE);
        let pos = SdfGrid::from_fn(b, [8; 3], |_| 1.0).unwrap();
        assert!(marching_cubes(&pos).is_empty());
        let neg = SdfGrid::from_fn(b, [8; 3], |_| -1.0).unwrap();
        assert!(marching_cubes(&neg).is_empty());
    }

    #[test]
    fn plane_vertices_satisfy_plane_equation() {
        let n = DVec3::new(0.3, -0.5, 0.8).normalize();
        let d = 0.17;
        let grid = SdfGrid::from_fn(Aabb::new(DVec3::splat(-1.0), DVec3::splat(1.0)), [32; 3], |p| {
            p.dot(n) - d
        })
        .unwrap();
        let h = grid.spacing().x;
        let mesh = marching_cubes(&grid);
        assert!(!mesh.is_empty());
        for p in &mesh.positions {
            assert!((p.dot(n) - d).abs() < h);
        }
        for v in &mesh.normals {
            assert!((*v - n).length() < 1e-9);
        }
    }

    #[test]
    fn sphere_mesh_is_closed() {
        // Every edge of a closed surface is shared by exactly two triangles.
        let mesh = marching_cubes(&sphere_grid(20));
        let mut edges: HashMap<(u32, u32), i32> = HashMap::new();
        for t in &mesh.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(edges.values().all(|&c| c == 2));
    }

    #[test]
    fn vertices_lie_on_lattice_edges() {
        let grid = sphere_grid(16);
        let h = grid.spacing();
        let mesh = marching_cubes(&grid);
        for p in &mesh.positions {
            let g = (*p - grid.bounds().min) / h;
            let on_lattice = (0..3).filter(|&a| (g[a] - g[a].round()).abs() < 1e-9).count();
            assert!(on_lattice >= 2, "{p} is not on a lattice edge");
        }
    }
}
