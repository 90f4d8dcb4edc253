use glam::DVec3;
use rayon::prelude::*;

use crate::geometry::SdfGrid;
use crate::parallel::pairwise_sum;

/// Distribution of `|‖∇s‖ − 1|` over interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EikonalStats {
    pub mean: f64,
    /// Nearest-rank 95th percentile.
    pub p95: f64,
    /// Interior nodes measured.
    pub count: usize,
}

fn interior_nodes(grid: &SdfGrid) -> impl IndexedParallelIterator<Item = [usize; 3]> + '_ {
    let [nx, ny, nz] = grid.resolution();
    let (ix, iy, iz) = (nx.saturating_sub(2), ny.saturating_sub(2), nz.saturating_sub(2));
    (0..ix * iy * iz)
        .into_par_iter()
        .map(move |n| [n % ix + 1, (n / ix) % iy + 1, n / (ix * iy) + 1])
}

/// Central-difference gradients at interior nodes; boundary nodes are
/// excluded. A grid without interior nodes reports zeros.
pub fn eikonal_residual(grid: &SdfGrid) -> EikonalStats {
    let mut r: Vec<f64> = interior_nodes(grid)
        .map(|[i, j, k]| (grid.node_gradient(i, j, k).length() - 1.0).abs())
        .collect();
    if r.is_empty() {
        return EikonalStats {
            mean: 0.0,
            p95: 0.0,
            count: 0,
        };
    }
    let mean = pairwise_sum(&r) / r.len() as f64;
    r.sort_by(f64::total_cmp);
    let rank = ((0.95 * r.len() as f64).ceil() as usize).clamp(1, r.len());
    EikonalStats {
        mean,
        p95: r[rank - 1],
        count: r.len(),
    }
}

/// Mean of `(‖∇s‖ − 1)²` over interior nodes and, when `grad` is given, its
/// derivative with respect to every node value added into `grad` scaled by
/// `weight`.
pub fn eikonal_penalty(grid: &SdfGrid, grad: Option<(&mut [f64], f64)>) -> f64 {
    let terms: Vec<(f64, DVec3)> = interior_nodes(grid)
        .map(|[i, j, k]| {
            let g = grid.node_gradient(i, j, k);
            let len = g.length();
            let r = len - 1.0;
            // d(r²)/dg; the kink at g = 0 gets a zero subgradient.
            let dg = if len > 0.0 { 2.0 * r * g / len } else { DVec3::ZERO };
            (r * r, dg)
        })
        .collect();
    let n = terms.len();
    if n == 0 {
        return 0.0;
    }
    let loss = pairwise_sum(&terms.iter().map(|t| t.0).collect::<Vec<_>>()) / n as f64;
    if let Some((grad, weight)) = grad {
        let [nx, ny, _] = grid.resolution();
        let h = grid.spacing();
        let stride = [1, nx, nx * ny];
        let scale = weight / n as f64;
        let (ix, iy) = (nx - 2, ny - 2);
        for (m, (_, dg)) in terms.iter().enumerate() {
            let (i, j, k) = (m % ix + 1, (m / ix) % iy + 1, m / (ix * iy) + 1);
            let idx = grid.index(i, j, k);
            for a in 0..3 {
                let c = scale * dg[a] / (2.0 * h[a]);
                grad[idx + stride[a]] += c;
                grad[idx - stride[a]] -= c;
            }
        }
    }
    loss
}
