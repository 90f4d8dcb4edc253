//! Parametric sky: a zenith-to-horizon gradient with a constant ground and a
//! von Mises-Fisher sun lobe.
//!
//! Latent layout (components beyond index 7 are ignored):
//!
//! | index | meaning                 | mapping                                  |
//! |-------|-------------------------|------------------------------------------|
//! | 0..3  | zenith RGB              | `max(0, (0.25, 0.35, 0.60) + 0.1·z)`     |
//! | 3..6  | horizon RGB             | `max(0, (0.70, 0.75, 0.80) + 0.1·z)`     |
//! | 6     | falloff exponent `k`    | `max(0.05, 2 + 0.5·z)`                   |
//! | 7     | ground gray level       | `max(0, 0.15 + 0.05·z)`                  |
//!
//! Above the horizon `base(ω) = zenith + (horizon − zenith)·(1 − ω_z)^k`;
//! below it `base = ground`. The sun adds `f_int · exp(κ(ω·f_dir − 1))`
//! everywhere, a lobe with peak 1 at the sun direction.

use std::fmt::Write as _;

use glam::DVec3;

use super::{extract_sun_plateau, inverse_tonemap, luminance, EnvMap};
use crate::error::{Error, Result};
use crate::raster::Image;

pub const SKY_LATENT_DIM: usize = 64;
/// Lobe concentration; about 1.5° angular radius.
pub const DEFAULT_SUN_KAPPA: f64 = 2000.0;

const ZENITH0: DVec3 = DVec3::new(0.25, 0.35, 0.6);
const HORIZON0: DVec3 = DVec3::new(0.7, 0.75, 0.8);
const COLOR_STEP: f64 = 0.1;
const FALLOFF0: f64 = 2.0;
const FALLOFF_STEP: f64 = 0.5;
const FALLOFF_MIN: f64 = 0.05;
const GROUND0: f64 = 0.15;
const GROUND_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SkyParams {
    pub z_sky: [f64; SKY_LATENT_DIM],
    /// Peak sun radiance added on top of the base sky.
    pub f_int: f64,
    /// Unit vector toward the sun.
    pub f_dir: DVec3,
}

impl SkyParams {
    /// Normalizes `f_dir`.
    pub fn new(z_sky: [f64; SKY_LATENT_DIM], f_int: f64, f_dir: DVec3) -> Result<Self> {
        if z_sky.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("sky latent must be finite"));
        }
        if !(f_int >= 0.0 && f_int.is_finite()) {
            return Err(Error::precondition(format!("sun intensity must be >= 0, got {f_int}")));
        }
        let f_dir = f_dir
            .try_normalize()
            .ok_or_else(|| Error::precondition("sun direction must be non-zero"))?;
        Ok(SkyParams { z_sky, f_int, f_dir })
    }

    pub fn zenith(&self) -> DVec3 {
        (ZENITH0 + COLOR_STEP * DVec3::from_slice(&self.z_sky[0..3])).max(DVec3::ZERO)
    }

    pub fn horizon(&self) -> DVec3 {
        (HORIZON0 + COLOR_STEP * DVec3::from_slice(&self.z_sky[3..6])).max(DVec3::ZERO)
    }

    pub fn falloff(&self) -> f64 {
        (FALLOFF0 + FALLOFF_STEP * self.z_sky[6]).max(FALLOFF_MIN)
    }

    pub fn ground(&self) -> f64 {
        (GROUND0 + GROUND_STEP * self.z_sky[7]).max(0.0)
    }

    /// Sky radiance without the sun.
    pub fn base(&self, d: DVec3) -> DVec3 {
        if d.z >= 0.0 {
            let z = self.zenith();
            z + (self.horizon() - z) * (1.0 - d.z).max(0.0).powf(self.falloff())
        } else {
            DVec3::splat(self.ground())
        }
    }

    pub fn radiance(&self, d: DVec3, kappa: f64) -> DVec3 {
        self.base(d) + DVec3::splat(self.f_int * (kappa * (d.dot(self.f_dir) - 1.0)).exp())
    }

    /// `key=value` text: `f_int`, `f_dir` (three numbers) and `z_sky`
    /// (64 numbers).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "f_int={}", self.f_int).unwrap();
        writeln!(s, "f_dir={} {} {}", self.f_dir.x, self.f_dir.y, self.f_dir.z).unwrap();
        let z: Vec<String> = self.z_sky.iter().map(|v| v.to_string()).collect();
        writeln!(s, "z_sky={}", z.join(" ")).unwrap();
        s
    }

    /// Parses [`SkyParams::to_text`]. Missing latent components are zero.
    pub fn from_text(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut f_int = None;
        let mut f_dir = None;
        let mut z = [0.0; SKY_LATENT_DIM];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| (i + 1, format!("expected key=value, found '{line}'")))?;
            let nums: Vec<f64> = v
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| (i + 1, format!("bad number in '{line}'")))?;
            match (k.trim(), nums.as_slice()) {
                ("f_int", [x]) => f_int = Some(*x),
                ("f_dir", [x, y, w]) => f_dir = Some(DVec3::new(*x, *y, *w)),
                ("z_sky", vals) if vals.len() <= SKY_LATENT_DIM => z[..vals.len()].copy_from_slice(vals),
                (key, _) => return Err((i + 1, format!("unexpected entry '{key}'"))),
            }
        }
        let f_int = f_int.ok_or((0, "missing f_int".to_string()))?;
        let f_dir = f_dir.ok_or((0, "missing f_dir".to_string()))?;
        SkyParams::new(z, f_int, f_dir).map_err(|e| (0, e.to_string()))
    }
}

pub fn decode_sky(params: &SkyParams, height: usize) -> Result<EnvMap> {
    decode_sky_with_kappa(params, height, DEFAULT_SUN_KAPPA)
}

pub fn decode_sky_with_kappa(params: &SkyParams, height: usize, kappa: f64) -> Result<EnvMap> {
    if height == 0 || !(kappa > 0.0) {
        return Err(Error::precondition(
            "sky height and lobe concentration must be positive",
        ));
    }
    EnvMap::from_fn(height, |d| params.radiance(d, kappa))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkyEstimateConfig {
    /// Exposure the panorama was tone mapped with.
    pub exposure: f64,
    /// Known sun direction; otherwise it is taken from the brightest texels.
    pub sun: Option<DVec3>,
    /// Known sun peak radiance; otherwise the lifted peak above the fitted base.
    pub sun_intensity: Option<f64>,
    /// Texels this close to the sun (degrees) are left out of the base fit.
    pub sun_exclusion_deg: f64,
}

impl Default for SkyEstimateConfig {
    fn default() -> Self {
        SkyEstimateConfig {
            exposure: 1.0,
            sun: None,
            sun_intensity: None,
            sun_exclusion_deg: 10.0,
        }
    }
}

/// Fits sky parameters to a completed LDR panorama. `mask` marks the texels
/// that were actually observed; only those drive the base-gradient fit.
pub fn estimate_sky(ldr: &Image, mask: &[bool], config: &SkyEstimateConfig) -> Result<SkyParams> {
    if mask.len() != ldr.pixel_count() {
        return Err(Error::precondition("panorama mask does not match the panorama"));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::precondition("panorama has no observed texels"));
    }
    let lifted = EnvMap::new(inverse_tonemap(ldr, config.exposure)?)?;
    let (w, h) = (lifted.width(), lifted.height());
    let f_dir = match config.sun {
        Some(d) => d
            .try_normalize()
            .ok_or_else(|| Error::precondition("sun direction must be non-zero"))?,
        None => extract_sun_plateau(&lifted).0,
    };
    let cos_excl = config.sun_exclusion_deg.to_radians().cos();

    let mut sky = Vec::new();
    let mut ground = Vec::new();
    let mut peak = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let d = lifted.texel_direction(x, y);
            let c = lifted.texel(x, y);
            let near_sun = d.dot(f_dir) >= cos_excl;
            if near_sun {
                peak = peak.max(luminance(c));
            }
            if !mask[y * w + x] || near_sun {
                continue;
            }
            if d.z >= 0.0 {
                sky.push((d.z, c));
            } else {
                ground.push(luminance(c));
            }
        }
    }

    let mut z = [0.0; SKY_LATENT_DIM];
    if let Some((k, zen, hor)) = fit_gradient(&sky) {
        let zl = (zen - ZENITH0) / COLOR_STEP;
        let hl = (hor - HORIZON0) / COLOR_STEP;
        z[0..3].copy_from_slice(&zl.to_array());
        z[3..6].copy_from_slice(&hl.to_array());
        z[6] = (k - FALLOFF0) / FALLOFF_STEP;
    }
    if !ground.is_empty() {
        let g = ground.iter().sum::<f64>() / ground.len() as f64;
        z[7] = (g - GROUND0) / GROUND_STEP;
    }
    let base = SkyParams::new(z, 0.0, f_dir)?;
    let f_int = match config.sun_intensity {
        Some(v) => v,
        None => (peak - luminance(base.base(f_dir))).max(0.0),
    };
    SkyParams::new(z, f_int, f_dir)
}

/// Least-squares zenith and horizon colors for each falloff exponent on a
/// grid of latent steps; returns the best `(k, zenith, horizon)`.
fn fit_gradient(samples: &[(f64, DVec3)]) -> Option<(f64, DVec3, DVec3)> {
    if samples.len() < 2 {
        return None;
    }
    let mut best: Option<(f64, f64, DVec3, DVec3)> = None;
    for step in -39..=100 {
        let k = (FALLOFF0 + FALLOFF_STEP * step as f64 * 0.1).max(FALLOFF_MIN);
        let (mut aa, mut ab, mut bb) = (0.0, 0.0, 0.0);
        let (mut ya, mut yb) = (DVec3::ZERO, DVec3::ZERO);
        for &(dz, c) in samples {
            let wt = (1.0 - dz).max(0.0).powf(k);
            let a = 1.0 - wt;
            aa += a * a;
            ab += a * wt;
            bb += wt * wt;
            ya += a * c;
            yb += wt * c;
        }
        let det = aa * bb - ab * ab;
        if det.abs() < 1e-12 * (aa * bb).max(1e-300) {
            continue;
        }
        let zen = (ya * bb - yb * ab) / det;
        let hor = (yb * aa - ya * ab) / det;
        let err: f64 = samples
            .iter()
            .map(|&(dz, c)| {
                let wt = (1.0 - dz).max(0.0).powf(k);
                (zen + (hor - zen) * wt - c).length_squared()
            })
            .sum();
        if best.as_ref().is_none_or(|b| err < b.0) {
            best = Some((err, k, zen, hor));
        }
    }
    best.map(|(_, k, z, h)| (k, z, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envlight::{angle_between, extract_sun, pixel_to_dir, tonemap_ldr};

    fn latent(vals: &[f64]) -> [f64; SKY_LATENT_DIM] {
        let mut z = [0.0; SKY_LATENT_DIM];
        z[..vals.len()].copy_from_slice(vals);
        z
    }

    #[test]
    fn lobe_off_gives_base_alone() {
        let p = SkyParams::new(latent(&[0.3, -0.2]), 0.0, DVec3::Z).unwrap();
        let env = decode_sky(&p, 32).unwrap();
        for y in 0..32 {
            for x in 0..64 {
                let d = env.texel_direction(x, y);
                assert!((env.texel(x, y) - p.base(d)).length() < 1e-6);
            }
        }
        // Horizon is brighter than zenith, so the peak sits on the horizon row.
        let (d, _) = extract_sun(&env);
        assert!(d.z.abs() < 0.06);
    }

    #[test]
    fn zenith_sun_is_found_at_the_top() {
        let p = SkyParams::new([0.0; 64], 500.0, DVec3::Z).unwrap();
        let env = decode_sky(&p, 64).unwrap();
        let (d, _) = extract_sun(&env);
        assert!(angle_between(d, DVec3::Z) < std::f64::consts::PI / 64.0);
    }

    #[test]
    fn extractor_recovers_decoded_sun() {
        let height = 128;
        for i in 0..20 {
            let az = i as f64 * 0.7;
            let el = 0.05 + i as f64 * 0.07;
            let dir = DVec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            let p = SkyParams::new(latent(&[0.1 * i as f64, 0.0, -0.5]), 50.0, dir).unwrap();
            let env = decode_sky(&p, height).unwrap();
            assert_eq!(decode_sky(&p, height).unwrap(), env);
            let (d, _) = extract_sun(&env);
            assert!(angle_between(d, dir) < 2.0 * std::f64::consts::PI / (2 * height) as f64);
        }
    }

    #[test]
    fn output_is_non_negative_for_wild_latents() {
        let p = SkyParams::new(
            latent(&[-50.0, 40.0, -9.0, -30.0, 5.0, 2.0, -100.0, -70.0]),
            3.0,
            DVec3::X,
        )
        .unwrap();
        let env = decode_sky(&p, 16).unwrap();
        assert!(env.image().data().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn text_round_trip() {
        let p = SkyParams::new(
            latent(&[0.5, 1.25, -3.0, 0.0, 0.0, 0.0, 1.0, 2.0]),
            12.5,
            DVec3::new(0.0, 0.6, 0.8),
        )
        .unwrap();
        assert_eq!(SkyParams::from_text(&p.to_text()).unwrap(), p);
        assert!(SkyParams::from_text("f_int=1\nf_dir=0 0 1\nbogus=3\n").is_err());
    }

    #[test]
    fn estimate_recovers_base_latents() {
        let truth = SkyParams::new(
            latent(&[0.5, -0.3, 0.2, -1.0, 0.4, 0.1, 1.0, 1.0]),
            0.0,
            DVec3::new(0.3, 0.2, 0.9),
        )
        .unwrap();
        let env = decode_sky(&truth, 64).unwrap();
        let ldr = tonemap_ldr(env.image(), 1.0).unwrap();
        let mask = vec![true; ldr.pixel_count()];
        let cfg = SkyEstimateConfig {
            sun: Some(truth.f_dir),
            ..SkyEstimateConfig::default()
        };
        let est = estimate_sky(&ldr, &mask, &cfg).unwrap();
        assert!((est.zenith() - truth.zenith()).length() < 1e-3, "{:?}", est.zenith());
        assert!((est.horizon() - truth.horizon()).length() < 1e-3);
        assert!((est.falloff() - truth.falloff()).abs() < 1e-6);
        assert!((est.ground() - truth.ground()).abs() < 1e-4);
    }

    #[test]
    fn estimate_finds_a_clipped_sun() {
        let height = 64;
        let dir = pixel_to_dir(40.0, 20.0, 2 * height, height);
        let truth = SkyParams::new([0.0; 64], 200.0, dir).unwrap();
        let ldr = tonemap_ldr(decode_sky(&truth, height).unwrap().image(), 1.0).unwrap();
        let mask = vec![true; ldr.pixel_count()];
        let est = estimate_sky(&ldr, &mask, &SkyEstimateConfig::default()).unwrap();
        let texel = std::f64::consts::PI / height as f64;
        assert!(angle_between(est.f_dir, dir) < 2.0 * texel);
    }

    #[test]
    fn unobserved_panorama_is_rejected() {
        let ldr = Image::new(8, 4, 3);
        assert!(estimate_sky(&ldr, &[false; 32], &SkyEstimateConfig::default()).is_err());
    }
}
