//! Bounding volume hierarchy over mesh triangles.
//!
//! Built top-down with a 32-bin surface area heuristic. The build is a single
//! deterministic pass; traversal returns the nearest hit with ties broken by
//! the lower triangle index, so results never depend on tree layout.

use glam::DVec3;

use super::{Aabb, Ray, TriangleMesh};

const BINS: usize = 32;
const MAX_LEAF: usize = 4;
const TRAVERSAL_COST: f64 = 1.0;
const TRIANGLE_COST: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first entry in `order`. Interior: index of the left child; the
    /// right child follows it.
    first: u32,
    /// Triangle count for leaves, zero for interior nodes.
    count: u32,
}

#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices permuted so every leaf owns a contiguous range.
    order: Vec<u32>,
}

/// Nearest ray–triangle intersection with interpolated vertex attributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: usize,
    /// Weights of the triangle's three vertices.
    pub barycentrics: [f64; 3],
    /// Interpolated unit shading normal.
    pub normal: DVec3,
    pub albedo: DVec3,
}

struct BuildRef {
    bounds: Aabb,
    centroid: DVec3,
    index: u32,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let mut refs: Vec<BuildRef> = (0..mesh.triangle_count())
            .map(|t| {
                let [a, b, c] = mesh.triangle_positions(t);
                let bounds = Aabb::EMPTY.grow(a).grow(b).grow(c);
                BuildRef {
                    bounds,
                    centroid: (a + b + c) / 3.0,
                    index: t as u32,
                }
            })
            .collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * refs.len().max(1)),
            order: Vec::with_capacity(refs.len()),
        };
        if refs.is_empty() {
            return bvh;
        }
        bvh.nodes.push(Node {
            bounds: Aabb::EMPTY,
            first: 0,
            count: 0,
        });
        bvh.build_node(0, &mut refs);
        bvh
    }

    fn build_node(&mut self, node: usize, refs: &mut [BuildRef]) {
        let bounds = refs.iter().fold(Aabb::EMPTY, |b, r| b.union(r.bounds));
        self.nodes[node].bounds = bounds;

        let split = if refs.len() > MAX_LEAF {
            find_split(refs, &bounds)
        } else {
            None
        };
        let Some((axis, pivot)) = split else {
            self.nodes[node].first = self.order.len() as u32;
            self.nodes[node].count = refs.len() as u32;
            // Stable ordering inside the leaf.
            let mut ids: Vec<u32> = refs.iter().map(|r| r.index).collect();
            ids.sort_unstable();
            self.order.extend(ids);
            return;
        };

        // Deterministic partition: stable sort by bin side, then index.
        refs.sort_by(|a, b| {
            let sa = a.centroid[axis] >= pivot;
            let sb = b.centroid[axis] >= pivot;
            sa.cmp(&sb).then(a.index.cmp(&b.index))
        });
        let mut mid = refs.partition_point(|r| r.centroid[axis] < pivot);
        if mid == 0 || mid == refs.len() {
            // Bin boundaries can round onto a centroid; split at the median.
            refs.sort_by(|a, b| {
                a.centroid[axis]
                    .total_cmp(&b.centroid[axis])
                    .then(a.index.cmp(&b.index))
            });
            mid = refs.len() / 2;
        }
        let left = self.nodes.len();
        self.nodes[node].first = left as u32;
        self.nodes[node].count = 0;
        let empty = Node {
            bounds: Aabb::EMPTY,
            first: 0,
            count: 0,
        };
        self.nodes.push(empty);
        self.nodes.push(empty);
        let (l, r) = refs.split_at_mut(mid);
        self.build_node(left, l);
        self.build_node(left + 1, r);
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes.first().map(|n| n.bounds).unwrap_or(Aabb::EMPTY)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nearest hit with `t` in `[ray.t_min, ray.t_max]`.
    pub fn intersect(&self, mesh: &TriangleMesh, ray: &Ray) -> Option<Hit> {
        let (t, tri, u, v) = self.traverse(mesh, ray, false)?;
        let w = 1.0 - u - v;
        let [a, b, c] = mesh.triangles[tri];
        let (a, b, c) = (a as usize, b as usize, c as usize);
        let normal = (w * mesh.normals[a] + u * mesh.normals[b] + v * mesh.normals[c])
            .try_normalize()
            .unwrap_or_else(|| mesh.face_normal(tri).normalize_or_zero());
        let albedo = w * mesh.albedo[a] + u * mesh.albedo[b] + v * mesh.albedo[c];
        Some(Hit {
            t,
            triangle: tri,
            barycentrics: [w, u, v],
            normal,
            albedo,
        })
    }

    /// True when any triangle is hit within `[ray.t_min, ray.t_max]`. Uses
    /// the same triangle predicate as [`Bvh::intersect`], so the two always
    /// agree.
    pub fn occluded(&self, mesh: &TriangleMesh, ray: &Ray) -> bool {
        self.traverse(mesh, ray, true).is_some()
    }

    fn traverse(&self, mesh: &TriangleMesh, ray: &Ray, any: bool) -> Option<(f64, usize, f64, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = ray.direction.recip();
        let mut best: Option<(f64, usize, f64, f64)> = None;
        let mut t_far = ray.t_max;
        let mut stack = [0u32; 128];
        let mut sp = 0usize;
        self.nodes[0].bounds.intersect_ray(ray.origin, inv, ray.t_min, t_far)?;
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.intersect_ray(ray.origin, inv, ray.t_min, t_far).is_none() {
                continue;
            }
            if node.count > 0 {
                let range = node.first as usize..(node.first + node.count) as usize;
                for &tri in &self.order[range] {
                    let tri = tri as usize;
                    if let Some((t, u, v)) = intersect_triangle(mesh, tri, ray) {
                        if t > t_far {
                            continue;
                        }
                        let better = match best {
                            None => true,
                            Some((bt, bi, _, _)) => t < bt || (t == bt && tri < bi),
                        };
                        if better {
                            best = Some((t, tri, u, v));
                            t_far = t;
                            if any {
                                return best;
                            }
                        }
                    }
                }
                continue;
            }
            let l = node.first as usize;
            let r = l + 1;
            let dl = self.nodes[l].bounds.intersect_ray(ray.origin, inv, ray.t_min, t_far);
            let dr = self.nodes[r].bounds.intersect_ray(ray.origin, inv, ray.t_min, t_far);
            // Push the farther child first so the nearer one is visited next.
            match (dl, dr) {
                (Some((el, _)), Some((er, _))) => {
                    let (near, far) = if er < el { (r, l) } else { (l, r) };
                    stack[sp] = far as u32;
                    stack[sp + 1] = near as u32;
                    sp += 2;
                }
                (Some(_), None) => {
                    stack[sp] = l as u32;
                    sp += 1;
                }
                (None, Some(_)) => {
                    stack[sp] = r as u32;
                    sp += 1;
                }
                (None, None) => {}
            }
        }
        best
    }

    /// Structural self-check used by tests: every triangle appears in
    /// exactly one leaf and children nest inside their parents.
    pub fn check_invariants(&self, triangle_count: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return if triangle_count == 0 {
                Ok(())
            } else {
                Err("empty hierarchy for non-empty mesh".into())
            };
        }
        let mut seen = vec![0u32; triangle_count];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            if n.count > 0 {
                for &t in &self.order[n.first as usize..(n.first + n.count) as usize] {
                    seen[t as usize] += 1;
                }
            } else {
                for c in [n.first as usize, n.first as usize + 1] {
                    if !n.bounds.contains_box(&self.nodes[c].bounds) {
                        return Err(format!("node {c} escapes parent {i}"));
                    }
                    stack.push(c);
                }
            }
        }
        match seen.iter().position(|&c| c != 1) {
            Some(t) => Err(format!("triangle {t} referenced {} times", seen[t])),
            None => Ok(()),
        }
    }
}

/// Chooses a split plane with the binned surface area heuristic. Returns
/// `None` when keeping the node as a leaf is cheaper or the centroids are
/// coincident.
fn find_split(refs: &[BuildRef], bounds: &Aabb) -> Option<(usize, f64)> {
    let cbounds = refs.iter().fold(Aabb::EMPTY, |b, r| b.grow(r.centroid));
    let extent = cbounds.extent();
    let parent_area = bounds.surface_area().max(f64::MIN_POSITIVE);
    let leaf_cost = TRIANGLE_COST * refs.len() as f64;
    let mut best: Option<(f64, usize, f64)> = None;

    for axis in 0..3 {
        if extent[axis] <= 0.0 {
            continue;
        }
        let lo = cbounds.min[axis];
        let scale = BINS as f64 / extent[axis];
        let mut counts = [0usize; BINS];
        let mut boxes = [Aabb::EMPTY; BINS];
        for r in refs {
            let b = (((r.centroid[axis] - lo) * scale) as usize).min(BINS - 1);
            counts[b] += 1;
            boxes[b] = boxes[b].union(r.bounds);
        }
        // Sweep from the right to get suffix areas.
        let mut right_area = [0.0; BINS];
        let mut right_count = [0usize; BINS];
        let mut acc = Aabb::EMPTY;
        let mut n = 0;
        for b in (1..BINS).rev() {
            acc = acc.union(boxes[b]);
            n += counts[b];
            right_area[b] = if acc.is_empty() { 0.0 } else { acc.surface_area() };
            right_count[b] = n;
        }
        let mut acc = Aabb::EMPTY;
        let mut n = 0;
        for b in 0..BINS - 1 {
            acc = acc.union(boxes[b]);
            n += counts[b];
            let rc = right_count[b + 1];
            if n == 0 || rc == 0 {
                continue;
            }
            let cost = TRAVERSAL_COST
                + TRIANGLE_COST * (acc.surface_area() * n as f64 + right_area[b + 1] * rc as f64) / parent_area;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, lo + (b + 1) as f64 / scale));
            }
        }
    }

    match best {
        Some((cost, axis, pivot)) if cost < leaf_cost || refs.len() > 4 * MAX_LEAF => Some((axis, pivot)),
        _ => None,
    }
}

/// Möller–Trumbore test, inclusive on edges. Returns `(t, u, v)` with
/// barycentric weights `(1 − u − v, u, v)`.
#[inline]
fn intersect_triangle(mesh: &TriangleMesh, tri: usize, ray: &Ray) -> Option<(f64, f64, f64)> {
    let [a, b, c] = mesh.triangle_positions(tri);
    let e1 = b - a;
    let e2 = c - a;
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 * e1.length_squared().max(e2.length_squared()) {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = ray.origin - a;
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv_det;
    (t >= ray.t_min && t <= ray.t_max).then_some((t, u, v))
}

/// Free-function form of [`Bvh::intersect`].
pub fn intersect(bvh: &Bvh, mesh: &TriangleMesh, ray: &Ray) -> Option<Hit> {
    bvh.intersect(mesh, ray)
}

/// Free-function form of [`Bvh::occluded`].
pub fn occluded(bvh: &Bvh, mesh: &TriangleMesh, ray: &Ray) -> bool {
    bvh.occluded(mesh, ray)
}

/// Brute-force nearest hit over all triangles; the reference the hierarchy
/// is checked against.
#[doc(hidden)]
pub fn brute_force_nearest(mesh: &TriangleMesh, ray: &Ray) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for t in 0..mesh.triangle_count() {
        if let Some((d, _, _)) = intersect_triangle(mesh, t, ray) {
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, t));
            }
        }
    }
    best
}
