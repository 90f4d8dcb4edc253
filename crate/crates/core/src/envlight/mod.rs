//! Equirectangular HDR sky domes.
//!
//! A dome of height `H` has width `W = 2H`. Polar angle from +z grows with
//! the row (`v = θ/π·H`) and azimuth measured from +x toward +y grows with the
//! column (`u = (φ/2π + 1/2)·W`), so +x sits in the middle of the image.

mod augment;
mod losses;
mod sampling;
mod sky;
mod solar;
mod tonemap;

use std::f64::consts::PI;
use std::path::Path;

use glam::DVec3;

use crate::error::{Error, Result};
use crate::io;
use crate::raster::Image;

pub use augment::{hdr_augment, Augmentation};
pub use losses::{sky_losses, SkyLosses};
pub use sampling::EnvDistribution;
pub use sky::{
    decode_sky, decode_sky_with_kappa, estimate_sky, SkyEstimateConfig, SkyParams, DEFAULT_SUN_KAPPA, SKY_LATENT_DIM,
};
pub use solar::{solar_angles, solar_direction, GeoTime};
pub use tonemap::{inverse_tonemap, tonemap_ldr, GAMMA};

/// Rec. 709 luminance.
#[inline]
pub fn luminance(c: DVec3) -> f64 {
    0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z
}

/// Continuous pixel coordinates of a unit direction.
pub fn dir_to_pixel(d: DVec3, width: usize, height: usize) -> (f64, f64) {
    let theta = d.z.clamp(-1.0, 1.0).acos();
    let phi = d.y.atan2(d.x);
    ((phi / (2.0 * PI) + 0.5) * width as f64, theta / PI * height as f64)
}

/// Inverse of [`dir_to_pixel`].
pub fn pixel_to_dir(u: f64, v: f64, width: usize, height: usize) -> DVec3 {
    let theta = v / height as f64 * PI;
    let phi = (u / width as f64 - 0.5) * 2.0 * PI;
    let s = theta.sin();
    DVec3::new(s * phi.cos(), s * phi.sin(), theta.cos())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvMap {
    image: Image,
}

impl EnvMap {
    pub fn new(image: Image) -> Result<Self> {
        if image.channels() != 3 {
            return Err(Error::precondition("environment maps have 3 channels"));
        }
        if image.height() == 0 || image.width() != 2 * image.height() {
            return Err(Error::precondition(format!(
                "environment map must be 2:1, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        if image.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::precondition(
                "environment radiance must be finite and non-negative",
            ));
        }
        Ok(EnvMap { image })
    }

    /// Evaluates `f` at every texel center.
    pub fn from_fn(height: usize, f: impl Fn(DVec3) -> DVec3) -> Result<Self> {
        let w = 2 * height;
        let mut image = Image::new(w, height, 3);
        for y in 0..height {
            for x in 0..w {
                let c = f(pixel_to_dir(x as f64 + 0.5, y as f64 + 0.5, w, height));
                image
                    .pixel_mut(x, y)
                    .copy_from_slice(&[c.x as f32, c.y as f32, c.z as f32]);
            }
        }
        EnvMap::new(image)
    }

    pub fn uniform(height: usize, radiance: DVec3) -> Result<Self> {
        EnvMap::from_fn(height, |_| radiance)
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn into_image(self) -> Image {
        self.image
    }

    #[inline]
    pub fn texel(&self, x: usize, y: usize) -> DVec3 {
        let p = self.image.pixel(x, y);
        DVec3::new(p[0] as f64, p[1] as f64, p[2] as f64)
    }

    /// Direction through the center of texel `(x, y)`.
    pub fn texel_direction(&self, x: usize, y: usize) -> DVec3 {
        pixel_to_dir(x as f64 + 0.5, y as f64 + 0.5, self.width(), self.height())
    }

    /// Bilinear radiance lookup; azimuth wraps, the poles clamp.
    pub fn radiance(&self, d: DVec3) -> DVec3 {
        let (w, h) = (self.width(), self.height());
        let (u, v) = dir_to_pixel(d, w, h);
        let fx = u - 0.5;
        let fy = (v - 0.5).clamp(0.0, (h - 1) as f64);
        let x0f = fx.floor();
        let tx = fx - x0f;
        let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
        let x1 = (x0 + 1) % w;
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        let top = self.texel(x0, y0) * (1.0 - tx) + self.texel(x1, y0) * tx;
        let bottom = self.texel(x0, y1) * (1.0 - tx) + self.texel(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    pub fn total_energy(&self) -> f64 {
        self.image.data().iter().map(|&v| v as f64).sum()
    }

    /// Multiplies every texel by `s ≥ 0`.
    pub fn scaled(&self, s: f64) -> EnvMap {
        EnvMap {
            image: self.image.map(|v| (v as f64 * s) as f32),
        }
    }

    pub fn read(path: &Path) -> Result<EnvMap> {
        let img = io::read_hdr(path)?;
        EnvMap::new(img).map_err(|e| Error::Codec {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_hdr(path, &self.image)
    }

    /// The map after an RGBE write and read.
    pub fn quantized(&self) -> Result<EnvMap> {
        EnvMap::new(io::quantize_rgbe(&self.image)?)
    }
}

/// Rotates the dome about +z by `yaw` radians (content at azimuth φ moves
/// to φ + yaw). Yaws that are whole multiples of the column width shift
/// columns exactly; other yaws blend the two nearest source columns.
pub fn rotate_env(env: &EnvMap, yaw: f64) -> EnvMap {
    let w = env.width();
    let shift = yaw / (2.0 * PI) * w as f64;
    let whole = shift.round();
    let src = &env.image;
    let mut out = Image::new(w, env.height(), 3);
    if (shift - whole).abs() <= 1e-9 * shift.abs().max(1.0) {
        let s = (whole as i64).rem_euclid(w as i64) as usize;
        for y in 0..env.height() {
            for x in 0..w {
                out.pixel_mut((x + s) % w, y).copy_from_slice(src.pixel(x, y));
            }
        }
    } else {
        let i = shift.floor();
        let f = (shift - i) as f32;
        let i = (i as i64).rem_euclid(w as i64) as usize;
        for y in 0..env.height() {
            for x in 0..w {
                let a = src.pixel((x + w - i) % w, y);
                let b = src.pixel((x + 2 * w - i - 1) % w, y);
                let o = out.pixel_mut(x, y);
                for c in 0..3 {
                    o[c] = (1.0 - f) * a[c] + f * b[c];
                }
            }
        }
    }
    EnvMap { image: out }
}

/// Direction and luminance of the brightest texel. Ties go to the smallest
/// row, then the smallest column.
pub fn extract_sun(env: &EnvMap) -> (DVec3, f64) {
    let (x, y, l) = brightest_texel(env);
    (env.texel_direction(x, y), l)
}

fn brightest_texel(env: &EnvMap) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for y in 0..env.height() {
        for x in 0..env.width() {
            let l = luminance(env.texel(x, y));
            if l > best.2 {
                best = (x, y, l);
            }
        }
    }
    best
}

/// Like [`extract_sun`], but when several texels share the maximum (a sun
/// clipped in LDR and lifted back) the direction is the normalized mean of
/// all tied texel directions.
pub fn extract_sun_plateau(env: &EnvMap) -> (DVec3, f64) {
    let (_, _, peak) = brightest_texel(env);
    let mut sum = DVec3::ZERO;
    for y in 0..env.height() {
        for x in 0..env.width() {
            if luminance(env.texel(x, y)) >= peak {
                sum += env.texel_direction(x, y);
            }
        }
    }
    match sum.try_normalize() {
        Some(d) => (d, peak),
        None => extract_sun(env),
    }
}

/// Angle between two directions in radians.
pub fn angle_between(a: DVec3, b: DVec3) -> f64 {
    a.normalize().dot(b.normalize()).clamp(-1.0, 1.0).acos()
}
