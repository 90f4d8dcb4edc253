use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use glam::DVec3;
use rayon::prelude::*;

use super::eikonal::eikonal_penalty;
use super::nearest::PointGrid;
use super::{RangeSample, ReconConfig};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Ray, SdfGrid};
use crate::parallel::pairwise_sum;
use crate::rng::{sample_rng, uniform, Purpose};

/// Unweighted loss terms (each a mean over its own population).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub lidar: f64,
    pub eikonal: f64,
    pub freespace: f64,
}

impl LossTerms {
    pub fn total(&self, c: &ReconConfig) -> f64 {
        c.lambda_lidar * self.lidar + c.lambda_eikonal * self.eikonal + c.lambda_freespace * self.freespace
    }
}

#[derive(Debug, Clone)]
pub struct SdfFit {
    pub grid: SdfGrid,
    /// Terms at the initialization followed by one entry per iteration.
    pub trace: Vec<LossTerms>,
    /// Step size after the last iteration.
    pub final_step: f64,
}

/// Writes `iter,loss_lidar,loss_eik,loss_free` rows; row 0 is the
/// initialization.
pub fn write_loss_trace(path: &Path, trace: &[LossTerms]) -> Result<()> {
    let mut s = String::from("iter,loss_lidar,loss_eik,loss_free\n");
    for (i, t) in trace.iter().enumerate() {
        writeln!(s, "{i},{},{},{}", t.lidar, t.eikonal, t.freespace).unwrap();
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Gradient floor on `∂s/∂t` at a crossing; keeps grazing hits from
/// producing huge depth derivatives.
const MIN_SLOPE: f64 = 0.1;
/// Regula falsi refinements after a sign change is bracketed.
const SECANT_STEPS: usize = 6;
/// Halvings tried before an iteration gives up on finding a decrease.
const MAX_HALVINGS: usize = 40;

fn check_inputs(samples: &[RangeSample], bounds: Aabb) -> Result<()> {
    if !samples.iter().any(|s| s.depth.is_some()) {
        return Err(Error::precondition(
            "fitting needs at least one sample with a finite depth",
        ));
    }
    let slack = 1e-9 * bounds.diagonal();
    for (i, s) in samples.iter().enumerate() {
        if let Some(p) = s.hit_point() {
            let inside = p.cmpge(bounds.min - slack).all() && p.cmple(bounds.max + slack).all();
            if !inside {
                return Err(Error::precondition(format!(
                    "sample {i} hits {p}, outside the grid bounds"
                )));
            }
        }
    }
    Ok(())
}

/// Neighbors used to fit a tangent plane at each hit point.
const NORMAL_NEIGHBORS: usize = 12;

/// Signed distance to the nearest observed hit point. The sign comes from a
/// tangent plane fitted to neighboring hits and oriented against the rays
/// that saw them; a node in front of that plane is positive.
pub fn initial_sdf(samples: &[RangeSample], bounds: Aabb, resolution: [usize; 3]) -> Result<SdfGrid> {
    check_inputs(samples, bounds)?;
    let hits: Vec<(DVec3, DVec3)> = samples
        .iter()
        .filter_map(|s| s.hit_point().map(|p| (p, s.ray.direction)))
        .collect();
    let points: Vec<DVec3> = hits.iter().map(|h| h.0).collect();
    let index = PointGrid::new(&points);
    let normals: Vec<DVec3> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let nbrs = index.k_nearest(points[i], NORMAL_NEIGHBORS);
            let facing: DVec3 = nbrs.iter().map(|&(j, _)| hits[j].1).sum();
            let n = plane_normal(nbrs.iter().map(|&(j, _)| points[j])).unwrap_or(hits[i].1);
            if n.dot(facing) > 0.0 {
                -n
            } else {
                n
            }
        })
        .collect();
    let mut grid = SdfGrid::new(bounds, resolution, vec![0.0; resolution.iter().product()])?;
    let values: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|n| {
            let [i, j, k] = grid.coords(n);
            let x = grid.node_position(i, j, k);
            let (nearest, d) = index.nearest(x);
            if (x - points[nearest]).dot(normals[nearest]) < 0.0 {
                -d
            } else {
                d
            }
        })
        .collect();
    grid.values_mut().copy_from_slice(&values);
    Ok(grid)
}

/// Least-variance direction of a point set, or `None` when it is too small
/// or collinear.
fn plane_normal(pts: impl Iterator<Item = DVec3> + Clone) -> Option<DVec3> {
    let n = pts.clone().count();
    if n < 3 {
        return None;
    }
    let mean = pts.clone().sum::<DVec3>() / n as f64;
    let mut c = glam::DMat3::ZERO;
    for p in pts {
        let d = p - mean;
        c += glam::DMat3::from_cols(d * d.x, d * d.y, d * d.z);
    }
    // Power iteration on tr(C)·I − C finds the smallest eigenvector of C.
    let tr = c.x_axis.x + c.y_axis.y + c.z_axis.z;
    if tr <= 0.0 {
        return None;
    }
    let m = glam::DMat3::from_diagonal(DVec3::splat(tr)) - c;
    let mut v = DVec3::new(0.577, 0.578, 0.579);
    for _ in 0..64 {
        let w = m * v;
        let len = w.length();
        if len < 1e-300 {
            return None;
        }
        v = w / len;
    }
    // Neighbors with no dominant plane give no usable normal.
    let lam = (c * v).length() / tr;
    (lam < 0.2).then_some(v)
}

/// A ray prepared for the depth term.
struct DepthRay {
    ray: Ray,
    depth: f64,
    t_enter: f64,
    t_exit: f64,
}

/// Fixed free-space points with their trilinear stencils.
type Stencil = [(usize, f64); 8];

struct Problem<'a> {
    config: &'a ReconConfig,
    depth_rays: Vec<DepthRay>,
    free: Vec<Stencil>,
    step_len: f64,
}

impl<'a> Problem<'a> {
    fn new(samples: &[RangeSample], template: &SdfGrid, config: &'a ReconConfig) -> Self {
        let bounds = template.bounds();
        let mut depth_rays = Vec::new();
        let mut spans = Vec::new();
        for s in samples {
            let span = bounds.ray_span(&Ray::new(s.ray.origin, s.ray.direction, 0.0, f64::INFINITY));
            if let (Some(depth), Some((t0, t1))) = (s.depth, span) {
                depth_rays.push(DepthRay {
                    ray: s.ray,
                    depth,
                    t_enter: t0,
                    t_exit: t1,
                });
            }
            spans.push(span);
        }

        // Stratified points strictly before each hit (minus the margin), or
        // along the whole in-bounds extent of sky rays.
        let per_ray = config.freespace_samples;
        let free: Vec<Stencil> = samples
            .par_iter()
            .zip(spans.par_iter())
            .enumerate()
            .flat_map_iter(|(ri, (s, span))| {
                let mut pts = Vec::new();
                if let Some((t0, t1)) = *span {
                    let end = match s.depth {
                        Some(d) => (d - config.margin).min(t1),
                        None => t1,
                    };
                    if end > t0 {
                        for j in 0..per_ray {
                            let mut r = sample_rng(config.seed, Purpose::FreeSpace, ri as u64, j as u64);
                            let t = t0 + (j as f64 + uniform(&mut r)) / per_ray as f64 * (end - t0);
                            let (cell, frac) = template.locate(s.ray.at(t));
                            pts.push(template.trilinear_weights(cell, frac));
                        }
                    }
                }
                pts
            })
            .collect();

        let h = template.spacing();
        Problem {
            config,
            depth_rays,
            free,
            step_len: h.min_element(),
        }
    }

    /// First `s = 0` crossing in `[t_enter, t_exit]`, bracketed by marching
    /// with steps of at most one cell and refined by regula falsi.
    fn first_crossing(&self, grid: &SdfGrid, r: &DepthRay) -> Option<f64> {
        let h = self.step_len;
        let mut t = r.t_enter;
        let mut s = grid.sample(r.ray.at(t));
        if s <= 0.0 {
            return None;
        }
        loop {
            let tn = (t + s.clamp(0.2 * h, h)).min(r.t_exit);
            let sn = grid.sample(r.ray.at(tn));
            if sn <= 0.0 {
                let (mut a, mut fa, mut b, mut fb) = (t, s, tn, sn);
                for _ in 0..SECANT_STEPS {
                    let m = a + fa * (b - a) / (fa - fb);
                    let fm = grid.sample(r.ray.at(m));
                    if fm > 0.0 {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                        fb = fm;
                    }
                }
                return Some(if fa - fb > 0.0 { a + fa * (b - a) / (fa - fb) } else { b });
            }
            if tn >= r.t_exit {
                return None;
            }
            t = tn;
            s = sn;
        }
    }

    /// Loss of one depth ray and its node derivatives.
    fn depth_term(&self, grid: &SdfGrid, r: &DepthRay) -> (f64, Stencil) {
        match self.first_crossing(grid, r) {
            Some(t) => {
                let x = r.ray.at(t);
                let err = t - r.depth;
                let slope = grid.gradient(x).dot(r.ray.direction).min(-MIN_SLOPE);
                let (cell, frac) = grid.locate(x);
                let mut st = grid.trilinear_weights(cell, frac);
                // t moves by −w_k / slope per unit change of node k.
                for e in &mut st {
                    e.1 *= 2.0 * err * (-1.0 / slope);
                }
                (err * err, st)
            }
            None => {
                // No crossing: pull the field at the observed hit to zero.
                let x = r.ray.at(r.depth);
                let (cell, frac) = grid.locate(x);
                let mut st = grid.trilinear_weights(cell, frac);
                let s: f64 = st.iter().map(|&(i, w)| w * grid.values()[i]).sum();
                for e in &mut st {
                    e.1 *= 2.0 * s;
                }
                (s * s, st)
            }
        }
    }

    fn evaluate(&self, grid: &SdfGrid, mut grad: Option<&mut Vec<f64>>) -> LossTerms {
        let c = self.config;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }

        let depth: Vec<(f64, Stencil)> = self.depth_rays.par_iter().map(|r| self.depth_term(grid, r)).collect();
        let lidar = if depth.is_empty() {
            0.0
        } else {
            pairwise_sum(&depth.iter().map(|d| d.0).collect::<Vec<_>>()) / depth.len() as f64
        };

        let margin = c.margin;
        let values = grid.values();
        let free: Vec<(f64, f64)> = self
            .free
            .par_iter()
            .map(|st| {
                let s: f64 = st.iter().map(|&(i, w)| w * values[i]).sum();
                let v = (margin - s).max(0.0);
                (v * v, -2.0 * v)
            })
            .collect();
        let freespace = if free.is_empty() {
            0.0
        } else {
            pairwise_sum(&free.iter().map(|f| f.0).collect::<Vec<_>>()) / free.len() as f64
        };

        let eikonal = match grad {
            Some(g) => {
                let nd = depth.len().max(1) as f64;
                for (_, st) in &depth {
                    for &(i, w) in st {
                        g[i] += c.lambda_lidar * w / nd;
                    }
                }
                let nf = free.len().max(1) as f64;
                for (st, &(_, d)) in self.free.iter().zip(&free) {
                    if d != 0.0 {
                        for &(i, w) in st {
                            g[i] += c.lambda_freespace * d * w / nf;
                        }
                    }
                }
                eikonal_penalty(grid, Some((g.as_mut_slice(), c.lambda_eikonal)))
            }
            None => eikonal_penalty(grid, None),
        };

        LossTerms {
            lidar,
            eikonal,
            freespace,
        }
    }
}

/// Fits node values by gradient descent on the weighted sum of the depth,
/// Eikonal and free-space terms, starting from [`initial_sdf`]. A step that
/// would increase the loss is retried at half the step size, so the loss
/// trace never increases.
pub fn fit_sdf(samples: &[RangeSample], bounds: Aabb, resolution: [usize; 3], config: &ReconConfig) -> Result<SdfFit> {
    config.validate()?;
    let mut grid = initial_sdf(samples, bounds, resolution)?;
    let problem = Problem::new(samples, &grid, config);
    let mut grad = vec![0.0; grid.node_count()];
    let mut terms = problem.evaluate(&grid, Some(&mut grad));
    let mut loss = terms.total(config);
    if !loss.is_finite() {
        return Err(Error::Numerical("initial loss is not finite".into()));
    }
    let mut trace = vec![terms];
    let mut step = config.step_size;
    let mut trial = grid.clone();

    for iter in 1..=config.iterations {
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            for ((t, &v), &g) in trial.values_mut().iter_mut().zip(grid.values()).zip(&grad) {
                *t = v - step * g;
            }
            let t_terms = problem.evaluate(&trial, None);
            let t_loss = t_terms.total(config);
            if !t_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss became non-finite at iteration {iter} (step {step}); lower the step size"
                )));
            }
            if t_loss <= loss {
                std::mem::swap(&mut grid, &mut trial);
                terms = t_terms;
                loss = t_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if accepted {
            terms = problem.evaluate(&grid, Some(&mut grad));
        }
        trace.push(terms);
    }
    Ok(SdfFit {
        grid,
        trace,
        final_step: step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::marching_cubes;
    use crate::recon::eikonal_residual;

    fn plane_samples() -> Vec<RangeSample> {
        let mut out = Vec::new();
        for i in 0..24 {
            for j in 0..24 {
                let target = DVec3::new(-1.15 + 0.1 * i as f64, -1.15 + 0.1 * j as f64, 0.0);
                let origin = DVec3::new(0.3 * (i % 3) as f64, -0.2 * (j % 4) as f64, 2.5);
                let d = target - origin;
                out.push(RangeSample::hit(origin, d, d.length()));
            }
        }
        out
    }

    fn plane_bounds() -> Aabb {
        Aabb::new(DVec3::new(-1.2, -1.2, -0.8), DVec3::new(1.2, 1.2, 0.8))
    }

    #[test]
    fn zero_iterations_return_the_initialization() {
        let s = plane_samples();
        let cfg = ReconConfig {
            iterations: 0,
            ..ReconConfig::default()
        };
        let fit = fit_sdf(&s, plane_bounds(), [12; 3], &cfg).unwrap();
        assert_eq!(fit.grid, initial_sdf(&s, plane_bounds(), [12; 3]).unwrap());
        assert_eq!(fit.trace.len(), 1);
    }

    #[test]
    fn plane_signs_follow_height() {
        let s = plane_samples();
        let fit = fit_sdf(&s, plane_bounds(), [16; 3], &ReconConfig::default()).unwrap();
        let g = &fit.grid;
        let h = g.spacing().z;
        let [nx, ny, nz] = g.resolution();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let z = g.node_position(i, j, k).z;
                    if z.abs() > 2.0 * h {
                        assert_eq!(g.value(i, j, k) > 0.0, z > 0.0, "node {i} {j} {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn loss_never_increases() {
        let s = plane_samples();
        let cfg = ReconConfig {
            iterations: 15,
            step_size: 50.0,
            ..ReconConfig::default()
        };
        let fit = fit_sdf(&s, plane_bounds(), [14; 3], &cfg).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1].total(&cfg) <= w[0].total(&cfg));
        }
        assert!(eikonal_residual(&fit.grid).p95 < 0.5);
        assert!(!marching_cubes(&fit.grid).is_empty());
    }

    #[test]
    fn rejects_bad_inputs() {
        let sky = vec![RangeSample::sky(DVec3::ZERO, DVec3::Z)];
        assert!(fit_sdf(&sky, plane_bounds(), [8; 3], &ReconConfig::default()).is_err());
        let far = vec![RangeSample::hit(DVec3::ZERO, DVec3::X, 10.0)];
        assert!(fit_sdf(&far, plane_bounds(), [8; 3], &ReconConfig::default()).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        write_loss_trace(&p, &[LossTerms::default(); 2]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "iter,loss_lidar,loss_eik,loss_free");
        assert_eq!(text.lines().count(), 3);
    }
}
