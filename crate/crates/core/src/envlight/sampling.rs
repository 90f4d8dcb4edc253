use std::f64::consts::PI;

use glam::DVec3;

use super::{dir_to_pixel, luminance, pixel_to_dir, EnvMap};

/// Importance distribution over texels, proportional to luminance times the
/// texel's solid angle. Directions are uniform inside the chosen texel.
#[derive(Debug, Clone)]
pub struct EnvDistribution {
    width: usize,
    height: usize,
    cdf: Vec<f64>,
    pmf: Vec<f64>,
}

impl EnvDistribution {
    /// `None` for a black map.
    pub fn new(env: &EnvMap) -> Option<Self> {
        let (w, h) = (env.width(), env.height());
        let mut pmf = Vec::with_capacity(w * h);
        for y in 0..h {
            let s = ((y as f64 + 0.5) / h as f64 * PI).sin();
            for x in 0..w {
                pmf.push(luminance(env.texel(x, y)).max(0.0) * s);
            }
        }
        let total: f64 = pmf.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return None;
        }
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(pmf.len());
        for p in &mut pmf {
            *p /= total;
            acc += *p;
            cdf.push(acc);
        }
        Some(EnvDistribution {
            width: w,
            height: h,
            cdf,
            pmf,
        })
    }

    /// Direction for three uniforms in `[0, 1)` and its solid-angle density.
    pub fn sample(&self, u_texel: f64, u: f64, v: f64) -> (DVec3, f64) {
        let target = u_texel * self.cdf[self.cdf.len() - 1];
        let mut i = self.cdf.partition_point(|&c| c <= target).min(self.cdf.len() - 1);
        // Skip zero-probability texels that share a cumulative value.
        while self.pmf[i] == 0.0 && i + 1 < self.pmf.len() {
            i += 1;
        }
        let (x, y) = (i % self.width, i / self.width);
        let d = pixel_to_dir(x as f64 + u, y as f64 + v, self.width, self.height);
        (d, self.density(i, d))
    }

    /// Solid-angle density of drawing `d`.
    pub fn pdf(&self, d: DVec3) -> f64 {
        let (u, v) = dir_to_pixel(d, self.width, self.height);
        let x = (u.floor() as i64).clamp(0, self.width as i64 - 1) as usize;
        let y = (v.floor() as i64).clamp(0, self.height as i64 - 1) as usize;
        self.density(y * self.width + x, d)
    }

    fn density(&self, texel: usize, d: DVec3) -> f64 {
        let sin_theta = (1.0 - d.z * d.z).max(0.0).sqrt();
        if sin_theta <= 0.0 {
            return 0.0;
        }
        self.pmf[texel] * (self.width * self.height) as f64 / (2.0 * PI * PI * sin_theta)
    }
}
