//! Geometry reconstruction: fitting a signed distance grid to range
//! observations and baking per-vertex albedo from posed images.

mod bake;
mod eikonal;
mod fit;
mod nearest;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use glam::DVec3;

use crate::error::{Error, Result};
use crate::geometry::Ray;

pub use bake::{bake_vertex_albedo, BakedAlbedo, UNSEEN_ALBEDO};
pub use eikonal::{eikonal_penalty, eikonal_residual, EikonalStats};
pub use fit::{fit_sdf, initial_sdf, write_loss_trace, LossTerms, SdfFit};

/// One range observation. `depth` is the distance along the unit ray
/// direction to the first return, or `None` when the ray saw only sky.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSample {
    pub ray: Ray,
    pub depth: Option<f64>,
}

impl RangeSample {
    pub fn hit(origin: DVec3, direction: DVec3, depth: f64) -> Self {
        RangeSample {
            ray: Ray::new(origin, direction, 0.0, f64::INFINITY),
            depth: Some(depth),
        }
    }

    pub fn sky(origin: DVec3, direction: DVec3) -> Self {
        RangeSample {
            ray: Ray::new(origin, direction, 0.0, f64::INFINITY),
            depth: None,
        }
    }

    pub fn hit_point(&self) -> Option<DVec3> {
        self.depth.map(|d| self.ray.at(d))
    }
}

/// Parses `ox oy oz dx dy dz depth|sky` lines. Blank lines and `#`
/// comments are skipped; `path` only labels diagnostics.
pub fn parse_samples(text: &str, path: &Path) -> Result<Vec<RangeSample>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: String| Error::format(path, i + 1, m);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(bad(format!("expected 7 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 6];
        for (k, f) in fields[..6].iter().enumerate() {
            v[k] = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("field {} is not a finite number: '{f}'", k + 1)))?;
        }
        let origin = DVec3::new(v[0], v[1], v[2]);
        let dir = DVec3::new(v[3], v[4], v[5]);
        if dir.length_squared() == 0.0 {
            return Err(bad("ray direction is zero".into()));
        }
        let sample = if fields[6].eq_ignore_ascii_case("sky") {
            RangeSample::sky(origin, dir)
        } else {
            let d = fields[6]
                .parse::<f64>()
                .ok()
                .filter(|d| d.is_finite() && *d > 0.0)
                .ok_or_else(|| bad(format!("depth must be positive or 'sky', found '{}'", fields[6])))?;
            RangeSample::hit(origin, dir, d)
        };
        out.push(sample);
    }
    Ok(out)
}

pub fn read_samples(path: &Path) -> Result<Vec<RangeSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_samples(&text, path)
}

pub fn format_samples(samples: &[RangeSample]) -> String {
    let mut s = String::new();
    for r in samples {
        let (o, d) = (r.ray.origin, r.ray.direction);
        write!(s, "{} {} {} {} {} {} ", o.x, o.y, o.z, d.x, d.y, d.z).unwrap();
        match r.depth {
            Some(depth) => writeln!(s, "{depth}").unwrap(),
            None => writeln!(s, "sky").unwrap(),
        }
    }
    s
}

pub fn write_samples(path: &Path, samples: &[RangeSample]) -> Result<()> {
    fs::write(path, format_samples(samples)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconConfig {
    pub lambda_lidar: f64,
    pub lambda_eikonal: f64,
    pub lambda_freespace: f64,
    /// Zero returns the initialization.
    pub iterations: usize,
    /// Initial gradient-descent step; halved whenever a step would raise
    /// the loss.
    pub step_size: f64,
    /// Required clearance (meters) at free-space points.
    pub margin: f64,
    /// Stratified free-space points per ray.
    pub freespace_samples: usize,
    pub seed: u64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            lambda_lidar: 1.0,
            lambda_eikonal: 0.1,
            lambda_freespace: 0.1,
            iterations: 50,
            step_size: 1000.0,
            margin: 0.1,
            freespace_samples: 8,
            seed: 0,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        let w = [self.lambda_lidar, self.lambda_eikonal, self.lambda_freespace];
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::precondition(format!("loss weights must be >= 0, got {w:?}")));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::precondition("step size must be positive"));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::precondition("free-space margin must be >= 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_text_round_trip() {
        let s = vec![
            RangeSample::hit(DVec3::new(0.0, 0.0, 3.0), -DVec3::Z, 2.0),
            RangeSample::sky(DVec3::ZERO, DVec3::new(1.0, 1.0, 0.0)),
        ];
        let back = parse_samples(&format_samples(&s), Path::new("s.txt")).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&s) {
            assert_eq!(a.ray.origin, b.ray.origin);
            assert!((a.ray.direction - b.ray.direction).length() < 1e-15);
            assert_eq!(a.depth, b.depth);
        }
    }

    #[test]
    fn sample_errors_name_the_line() {
        let text = "# header\n0 0 0 0 0 1 2\n0 0 0 0 0 1 -4\n";
        let msg = parse_samples(text, Path::new("r.txt")).unwrap_err().to_string();
        assert!(msg.starts_with("r.txt:3:"), "{msg}");
        assert!(parse_samples("0 0 0 0 0 0 1\n", Path::new("z")).is_err());
        assert!(parse_samples("0 0 0 0 1\n", Path::new("z")).is_err());
    }
}
