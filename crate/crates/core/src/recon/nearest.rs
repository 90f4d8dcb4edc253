//! Nearest-point queries over a fixed point set using a uniform bucket grid.

use glam::DVec3;

use crate::geometry::Aabb;

pub(super) struct PointGrid<'a> {
    points: &'a [DVec3],
    origin: DVec3,
    cell: f64,
    dims: [usize; 3],
    /// Point indices sorted by bucket; `starts[b]..starts[b + 1]`.
    order: Vec<u32>,
    starts: Vec<u32>,
}

impl<'a> PointGrid<'a> {
    pub fn new(points: &'a [DVec3]) -> Self {
        let bounds = Aabb::from_points(points);
        let e = bounds.extent().max(DVec3::splat(1e-9));
        // About two points per bucket on a surface-like set.
        let target = (points.len() as f64 / 2.0).max(1.0);
        let area = e.x * e.y + e.y * e.z + e.z * e.x;
        let cell = (area / target).sqrt().max(e.max_element() / 256.0);
        let dims = [
            (e.x / cell).floor() as usize + 1,
            (e.y / cell).floor() as usize + 1,
            (e.z / cell).floor() as usize + 1,
        ];
        let mut grid = PointGrid {
            points,
            origin: bounds.min,
            cell,
            dims,
            order: Vec::new(),
            starts: Vec::new(),
        };
        let n_buckets = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0u32; n_buckets + 1];
        let keys: Vec<usize> = points.iter().map(|&p| grid.bucket_of(p)).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for b in 0..n_buckets {
            counts[b + 1] += counts[b];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            order[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        grid.order = order;
        grid.starts = counts;
        grid
    }

    fn coords(&self, p: DVec3) -> [i64; 3] {
        let g = (p - self.origin) / self.cell;
        [g.x.floor() as i64, g.y.floor() as i64, g.z.floor() as i64]
    }

    fn bucket_of(&self, p: DVec3) -> usize {
        let c = self.coords(p);
        let ci = |a: usize| c[a].clamp(0, self.dims[a] as i64 - 1) as usize;
        (ci(2) * self.dims[1] + ci(1)) * self.dims[0] + ci(0)
    }

    /// Index and distance of the nearest point; ties go to the lower index.
    pub fn nearest(&self, q: DVec3) -> (usize, f64) {
        self.k_nearest(q, 1)[0]
    }

    /// Up to `k` nearest points sorted by distance, ties by index.
    pub fn k_nearest(&self, q: DVec3, k: usize) -> Vec<(usize, f64)> {
        let k = k.max(1);
        let c = self.coords(q);
        let clamped: [i64; 3] = [0, 1, 2].map(|a| c[a].clamp(0, self.dims[a] as i64 - 1));
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        let max_r = *self.dims.iter().max().unwrap() as i64;
        let mut r = 0i64;
        loop {
            let lo = |a: usize| (clamped[a] - r).max(0);
            let hi = |a: usize| (clamped[a] + r).min(self.dims[a] as i64 - 1);
            for kz in lo(2)..=hi(2) {
                for j in lo(1)..=hi(1) {
                    let face = (kz - clamped[2]).abs() == r || (j - clamped[1]).abs() == r;
                    // Off the z and y faces only the two x caps lie on the shell.
                    let xs: &mut dyn Iterator<Item = i64> = if face {
                        &mut (lo(0)..=hi(0))
                    } else {
                        &mut [clamped[0] - r, clamped[0] + r]
                            .into_iter()
                            .filter(|&i| i >= 0 && i < self.dims[0] as i64)
                    };
                    for i in xs {
                        let b = ((kz as usize) * self.dims[1] + j as usize) * self.dims[0] + i as usize;
                        for &pi in &self.order[self.starts[b] as usize..self.starts[b + 1] as usize] {
                            let cand = (pi as usize, (self.points[pi as usize] - q).length());
                            let pos = best.partition_point(|e| e.1 < cand.1 || (e.1 == cand.1 && e.0 < cand.0));
                            if pos < k {
                                best.insert(pos, cand);
                                best.truncate(k);
                            }
                        }
                    }
                }
            }
            // Buckets beyond ring r are at least `r · cell` from the query's
            // (clamped) bucket, and a query outside the grid is farther still.
            let full = best.len() == k.min(self.points.len());
            if (full && best[best.len() - 1].1 < r as f64 * self.cell) || r > max_r {
                return best;
            }
            r += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{sample_rng, uniform, Purpose};

    #[test]
    fn matches_brute_force() {
        let pts: Vec<DVec3> = (0..500)
            .map(|i| {
                let mut r = sample_rng(2, Purpose::Fixture, i, 0);
                DVec3::new(uniform(&mut r), uniform(&mut r) * 3.0, uniform(&mut r) * 0.1)
            })
            .collect();
        let grid = PointGrid::new(&pts);
        for i in 0..300 {
            let mut r = sample_rng(5, Purpose::Fixture, i, 0);
            let q = DVec3::new(
                uniform(&mut r) * 6.0 - 2.0,
                uniform(&mut r) * 6.0 - 2.0,
                uniform(&mut r) * 4.0 - 2.0,
            );
            let (bi, bd) = grid.nearest(q);
            let brute = pts
                .iter()
                .enumerate()
                .map(|(k, p)| (k, (*p - q).length()))
                .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            assert_eq!(bd, brute.1);
            assert_eq!(bi, brute.0);
            let mut all: Vec<(usize, f64)> = pts.iter().enumerate().map(|(k, p)| (k, (*p - q).length())).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            assert_eq!(grid.k_nearest(q, 7), all[..7].to_vec());
        }
    }
}
