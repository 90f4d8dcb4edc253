use std::time::Instant;

use twinlight::geometry::{marching_cubes, Aabb};
use twinlight::recon::{eikonal_residual, fit_sdf, ReconConfig};
use twinlight::{fixtures, DVec3};

#[test]
fn sphere_fit_recovers_the_surface() {
    let start = Instant::now();
    let samples = fixtures::sphere_samples(DVec3::ZERO, 1.0, 4096, 0);
    let bounds = Aabb::new(DVec3::splat(-1.5), DVec3::splat(1.5));
    let fit = fit_sdf(&samples, bounds, [48; 3], &ReconConfig::default()).unwrap();

    let mesh = marching_cubes(&fit.grid);
    let close = mesh
        .positions
        .iter()
        .filter(|p| (p.length() - 1.0).abs() < 0.02)
        .count();
    let frac = close as f64 / mesh.positions.len() as f64;
    assert!(frac >= 0.95, "only {frac:.3} of vertices within 2%");

    let eik = eikonal_residual(&fit.grid);
    assert!(eik.p95 < 0.2, "eikonal p95 {}", eik.p95);

    let cfg = ReconConfig::default();
    let totals: Vec<f64> = fit.trace.iter().map(|t| t.total(&cfg)).collect();
    assert!(totals.windows(2).all(|w| w[1] <= w[0]), "{totals:?}");
    assert!(start.elapsed().as_secs() < 60);
}
