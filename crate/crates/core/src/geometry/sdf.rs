use glam::DVec3;

use super::Aabb;
use crate::error::{Error, Result};

/// Default node count per axis for mesh extraction grids.
pub const DEFAULT_GRID_RESOLUTION: usize = 256;

/// Signed distance samples on a regular lattice of nodes spanning `bounds`
/// (both faces included). Negative inside, positive outside.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid {
    bounds: Aabb,
    /// Nodes per axis.
    resolution: [usize; 3],
    values: Vec<f64>,
}

impl SdfGrid {
    pub fn new(bounds: Aabb, resolution: [usize; 3], values: Vec<f64>) -> Result<Self> {
        if resolution.iter().any(|&r| r < 2) {
            return Err(Error::precondition(format!(
                "grid resolution must be at least 2 per axis, got {resolution:?}"
            )));
        }
        let e = bounds.extent();
        if bounds.is_empty() || e.x <= 0.0 || e.y <= 0.0 || e.z <= 0.0 || !e.is_finite() {
            return Err(Error::precondition("grid bounds must have positive finite extent"));
        }
        let n = resolution.iter().product::<usize>();
        if values.len() != n {
            return Err(Error::precondition(format!(
                "grid needs {n} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("grid values must be finite"));
        }
        Ok(SdfGrid {
            bounds,
            resolution,
            values,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(bounds: Aabb, resolution: [usize; 3], f: impl Fn(DVec3) -> f64) -> Result<Self> {
        let mut grid = SdfGrid::new(bounds, resolution, vec![0.0; resolution.iter().product()])?;
        for k in 0..resolution[2] {
            for j in 0..resolution[1] {
                for i in 0..resolution[0] {
                    let idx = grid.index(i, j, k);
                    grid.values[idx] = f(grid.node_position(i, j, k));
                }
            }
        }
        if grid.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("grid values must be finite"));
        }
        Ok(grid)
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable node values. Callers must keep them finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    /// Node spacing per axis.
    pub fn spacing(&self) -> DVec3 {
        let e = self.bounds.extent();
        DVec3::new(
            e.x / (self.resolution[0] - 1) as f64,
            e.y / (self.resolution[1] - 1) as f64,
            e.z / (self.resolution[2] - 1) as f64,
        )
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution[1] + j) * self.resolution[0] + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.resolution[0];
        let j = (idx / self.resolution[0]) % self.resolution[1];
        let k = idx / (self.resolution[0] * self.resolution[1]);
        [i, j, k]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    #[inline]
    pub fn node_position(&self, i: usize, j: usize, k: usize) -> DVec3 {
        let h = self.spacing();
        self.bounds.min + DVec3::new(i as f64 * h.x, j as f64 * h.y, k as f64 * h.z)
    }

    /// Cell containing `p` and the fractional position inside it. Points
    /// outside the bounds are clamped onto them.
    #[inline]
    pub fn locate(&self, p: DVec3) -> ([usize; 3], DVec3) {
        let g = (p - self.bounds.min) / self.spacing();
        let mut cell = [0usize; 3];
        let mut frac = DVec3::ZERO;
        for a in 0..3 {
            let max_cell = (self.resolution[a] - 2) as f64;
            let x = g[a].clamp(0.0, (self.resolution[a] - 1) as f64);
            let c = x.floor().min(max_cell);
            cell[a] = c as usize;
            frac[a] = x - c;
        }
        (cell, frac)
    }

    /// The eight node indices of a cell with their trilinear weights at
    /// `frac`, in corner order `(dx, dy, dz)` binary.
    #[inline]
    pub fn trilinear_weights(&self, cell: [usize; 3], frac: DVec3) -> [(usize, f64); 8] {
        let mut out = [(0usize, 0.0f64); 8];
        for (n, o) in out.iter_mut().enumerate() {
            let (dx, dy, dz) = (n & 1, (n >> 1) & 1, n >> 2);
            let w = if dx == 1 { frac.x } else { 1.0 - frac.x }
                * if dy == 1 { frac.y } else { 1.0 - frac.y }
                * if dz == 1 { frac.z } else { 1.0 - frac.z };
            *o = (self.index(cell[0] + dx, cell[1] + dy, cell[2] + dz), w);
        }
        out
    }

    /// Trilinear interpolation, exact on the closed bounds.
    pub fn sample(&self, p: DVec3) -> f64 {
        let (cell, frac) = self.locate(p);
        self.trilinear_weights(cell, frac)
            .iter()
            .map(|&(i, w)| w * self.values[i])
            .sum()
    }

    /// Analytic gradient of the trilinear interpolant.
    pub fn gradient(&self, p: DVec3) -> DVec3 {
        let (cell, f) = self.locate(p);
        let h = self.spacing();
        let v = |dx: usize, dy: usize, dz: usize| self.value(cell[0] + dx, cell[1] + dy, cell[2] + dz);
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let gx = lerp(
            lerp(v(1, 0, 0) - v(0, 0, 0), v(1, 1, 0) - v(0, 1, 0), f.y),
            lerp(v(1, 0, 1) - v(0, 0, 1), v(1, 1, 1) - v(0, 1, 1), f.y),
            f.z,
        );
        let gy = lerp(
            lerp(v(0, 1, 0) - v(0, 0, 0), v(1, 1, 0) - v(1, 0, 0), f.x),
            lerp(v(0, 1, 1) - v(0, 0, 1), v(1, 1, 1) - v(1, 0, 1), f.x),
            f.z,
        );
        let gz = lerp(
            lerp(v(0, 0, 1) - v(0, 0, 0), v(1, 0, 1) - v(1, 0, 0), f.x),
            lerp(v(0, 1, 1) - v(0, 1, 0), v(1, 1, 1) - v(1, 1, 0), f.x),
            f.y,
        );
        DVec3::new(gx / h.x, gy / h.y, gz / h.z)
    }

    /// Finite-difference gradient at a node: central inside, one-sided on
    /// the boundary faces.
    pub fn node_gradient(&self, i: usize, j: usize, k: usize) -> DVec3 {
        let h = self.spacing();
        let idx = [i, j, k];
        let mut g = DVec3::ZERO;
        for a in 0..3 {
            let n = self.resolution[a];
            let (lo, hi) = (idx[a].saturating_sub(1), (idx[a] + 1).min(n - 1));
            let mut p = idx;
            let mut q = idx;
            p[a] = lo;
            q[a] = hi;
            g[a] = (self.value(q[0], q[1], q[2]) - self.value(p[0], p[1], p[2])) / ((hi - lo) as f64 * h[a]);
        }
        g
    }

    pub fn is_interior(&self, i: usize, j: usize, k: usize) -> bool {
        let r = self.resolution;
        i > 0 && j > 0 && k > 0 && i + 1 < r[0] && j + 1 < r[1] && k + 1 < r[2]
    }
}
