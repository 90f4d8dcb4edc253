use super::EnvMap;
use crate::raster::Image;
use crate::rng::{sample_rng, uniform, Purpose};

/// One draw of the HDR training augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Augmentation {
    /// Exposure multiplier, log-uniform in `[0.5, 2]`.
    pub scale: f64,
    /// Azimuthal rotation in whole columns.
    pub shift: usize,
    /// Mirror the azimuth (`φ → −φ`).
    pub flip: bool,
}

impl Augmentation {
    pub fn draw(seed: u64, width: usize) -> Augmentation {
        let mut r = sample_rng(seed, Purpose::Augment, 0, 0);
        let scale = 2f64.powf(2.0 * uniform(&mut r) - 1.0);
        let shift = ((uniform(&mut r) * width as f64) as usize).min(width - 1);
        let flip = uniform(&mut r) < 0.5;
        Augmentation { scale, shift, flip }
    }

    /// Scale, then column shift, then flip.
    pub fn apply(&self, env: &EnvMap) -> EnvMap {
        let (w, h) = (env.width(), env.height());
        let src = env.image();
        let mut out = Image::new(w, h, 3);
        for y in 0..h {
            for x in 0..w {
                let shifted = (x + self.shift) % w;
                let dst = if self.flip { w - 1 - shifted } else { shifted };
                let p = src.pixel(x, y);
                let o = out.pixel_mut(dst, y);
                for c in 0..3 {
                    o[c] = (p[c] as f64 * self.scale) as f32;
                }
            }
        }
        EnvMap::new(out).expect("augmentation keeps maps valid")
    }
}

/// Random exposure, yaw and mirror, reproducible per seed.
pub fn hdr_augment(env: &EnvMap, seed: u64) -> EnvMap {
    Augmentation::draw(seed, env.width()).apply(env)
}
