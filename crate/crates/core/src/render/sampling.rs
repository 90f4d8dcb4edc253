use std::f64::consts::PI;

use glam::DVec3;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::uniform;

/// How shading directions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingStrategy {
    /// Cosine-weighted hemisphere about the normal.
    #[default]
    Cosine,
    /// Even one-sample mixture of cosine and environment-luminance sampling,
    /// weighted by the mixture density. Resolves small bright suns that
    /// cosine sampling rarely finds.
    EnvMixture,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Samples per pixel.
    pub spp: usize,
    pub seed: u64,
    /// Jittered-grid dimensions over the 2D sample domain; sample `j` falls
    /// in cell `j mod (sx · sy)`.
    pub strata: [usize; 2],
    pub strategy: SamplingStrategy,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            spp: 64,
            seed: 0,
            strata: [1, 1],
            strategy: SamplingStrategy::Cosine,
        }
    }
}

impl SamplerConfig {
    pub fn new(spp: usize, seed: u64) -> Self {
        SamplerConfig {
            spp,
            seed,
            ..Default::default()
        }
    }

    pub fn with_strategy(self, strategy: SamplingStrategy) -> Self {
        SamplerConfig { strategy, ..self }
    }

    pub fn with_strata(self, sx: usize, sy: usize) -> Self {
        SamplerConfig {
            strata: [sx, sy],
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spp == 0 {
            return Err(Error::precondition("samples per pixel must be >= 1"));
        }
        if self.strata.contains(&0) {
            return Err(Error::precondition("stratification dimensions must be >= 1"));
        }
        Ok(())
    }

    /// Jittered point in `[0, 1)²` for sample `j`.
    pub(crate) fn square(&self, j: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let [sx, sy] = self.strata;
        let cell = j % (sx * sy);
        let (cx, cy) = (cell % sx, cell / sx);
        let u = (cx as f64 + uniform(rng)) / sx as f64;
        let v = (cy as f64 + uniform(rng)) / sy as f64;
        (u, v)
    }
}

/// Cosine-weighted direction about the unit normal `n` (density `cos θ / π`).
pub fn cosine_hemisphere(n: DVec3, u: f64, v: f64) -> DVec3 {
    let r = u.sqrt();
    let phi = 2.0 * PI * v;
    let (t, b) = n.any_orthonormal_pair();
    let z = (1.0 - u).max(0.0).sqrt();
    (t * (r * phi.cos()) + b * (r * phi.sin()) + n * z).normalize()
}
