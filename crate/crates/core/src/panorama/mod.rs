//! Equirectangular panoramas from a calibrated camera rig: per-camera depth
//! rendering, forward reprojection into a shared panorama and diffusion hole
//! filling.

mod fill;

use rayon::prelude::*;

use crate::camera::CameraModel;
use crate::envlight::dir_to_pixel;
use crate::error::{Error, Result};
use crate::geometry::{Bvh, Hit, TriangleMesh};
use crate::raster::Image;

pub use fill::{fill_holes, FILL_TOLERANCE};

/// Per-pixel camera-ray distance in meters; `f32::INFINITY` marks sky.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::precondition(format!(
                "depth map {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::precondition(format!(
                "depth values must be > 0 or sky, found {v}"
            )));
        }
        Ok(DepthMap { width, height, values })
    }

    pub fn sky(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            values: vec![f32::INFINITY; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// Single-channel raster with sky stored as `-1`, the on-disk sentinel.
    pub fn to_image(&self) -> Image {
        let data = self
            .values
            .iter()
            .map(|&d| if d.is_finite() { d } else { -1.0 })
            .collect();
        Image::from_vec(self.width, self.height, 1, data).expect("shape matches")
    }

    /// Inverse of [`DepthMap::to_image`]: negative values become sky.
    pub fn from_image(img: &Image) -> Result<Self> {
        if img.channels() != 1 {
            return Err(Error::precondition(format!(
                "depth raster must have 1 channel, found {}",
                img.channels()
            )));
        }
        let values = img
            .data()
            .iter()
            .map(|&d| if d < 0.0 { f32::INFINITY } else { d })
            .collect();
        DepthMap::new(img.width(), img.height(), values)
    }
}

/// Nearest-hit distance along each pixel-center ray; misses are sky.
pub fn render_depth(mesh: &TriangleMesh, bvh: &Bvh, camera: &CameraModel) -> DepthMap {
    let (w, h) = (camera.width, camera.height);
    let values = (0..w * h)
        .into_par_iter()
        .map(|i| hit_depth(bvh.intersect(mesh, &camera.pixel_ray(i % w, i / w)).as_ref()))
        .collect();
    DepthMap {
        width: w,
        height: h,
        values,
    }
}

/// Depth of a primary hit as stored in depth maps and G-buffers.
pub(crate) fn hit_depth(hit: Option<&Hit>) -> f32 {
    hit.map_or(f32::INFINITY, |h| h.t as f32)
}

/// Fixed-point scale for panorama accumulation. Integer sums make the mean
/// independent of the order in which cameras and pixels arrive.
const ACC_SCALE: f64 = (1u64 << 32) as f64;

/// Reprojected LDR panorama with per-texel observation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Panorama {
    /// `H × 2H × 3`, values in `[0, 1]`; unobserved texels are zero.
    pub image: Image,
    /// True where at least one source pixel landed.
    pub mask: Vec<bool>,
    pub counts: Vec<u32>,
}

impl Panorama {
    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn observed(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Splats every source pixel into the nearest texel of a panorama centered
/// on the first camera. Pixels with finite depth are unprojected to 3D and
/// seen from the panorama center; sky pixels keep their ray direction.
/// Source values are clamped to `[0, 1]`.
pub fn stitch(images: &[Image], depths: &[DepthMap], cameras: &[CameraModel], pano_height: usize) -> Result<Panorama> {
    if images.len() != depths.len() || images.len() != cameras.len() {
        return Err(Error::precondition(format!(
            "stitch needs equal lists, got {} images, {} depth maps, {} cameras",
            images.len(),
            depths.len(),
            cameras.len()
        )));
    }
    if cameras.is_empty() {
        return Err(Error::precondition("stitch needs at least one camera"));
    }
    if pano_height == 0 {
        return Err(Error::precondition("panorama height must be positive"));
    }
    for (i, ((img, d), cam)) in images.iter().zip(depths).zip(cameras).enumerate() {
        if img.channels() != 3 || img.dims() != (d.width, d.height) || img.dims() != (cam.width, cam.height) {
            return Err(Error::precondition(format!(
                "camera {i}: image {}x{}x{}, depth {}x{}, camera {}x{} must agree (3 channels)",
                img.width(),
                img.height(),
                img.channels(),
                d.width,
                d.height,
                cam.width,
                cam.height
            )));
        }
    }
    let (w, h) = (2 * pano_height, pano_height);
    let origin = cameras[0].center();
    let mut sums = vec![0u64; w * h * 3];
    let mut counts = vec![0u32; w * h];
    for ((img, depth), cam) in images.iter().zip(depths).zip(cameras) {
        let splats: Vec<(usize, [u64; 3])> = (0..cam.height)
            .into_par_iter()
            .flat_map_iter(|y| {
                (0..cam.width).filter_map(move |x| {
                    let dir = cam.pixel_direction(x as f64 + 0.5, y as f64 + 0.5);
                    let dist = depth.get(x, y);
                    let d = if dist.is_finite() {
                        cam.center() + dir * dist as f64 - origin
                    } else {
                        dir
                    };
                    if d.length_squared() == 0.0 {
                        return None;
                    }
                    let (u, v) = dir_to_pixel(d, w, h);
                    let tx = (u.floor() as i64).rem_euclid(w as i64) as usize;
                    let ty = (v.floor() as i64).clamp(0, h as i64 - 1) as usize;
                    let px = img.pixel(x, y);
                    let fixed = |c: usize| (px[c].clamp(0.0, 1.0) as f64 * ACC_SCALE).round() as u64;
                    Some((ty * w + tx, [fixed(0), fixed(1), fixed(2)]))
                })
            })
            .collect();
        for (t, v) in splats {
            counts[t] += 1;
            for c in 0..3 {
                sums[3 * t + c] += v[c];
            }
        }
    }
    let mut image = Image::new(w, h, 3);
    for (t, &n) in counts.iter().enumerate() {
        if n > 0 {
            for c in 0..3 {
                image.data_mut()[3 * t + c] = (sums[3 * t + c] as f64 / ACC_SCALE / n as f64) as f32;
            }
        }
    }
    Ok(Panorama {
        image,
        mask: counts.iter().map(|&n| n > 0).collect(),
        counts,
    })
}

/// Peak signal-to-noise ratio in dB over the texels where `mask` is true,
/// for signals in `[0, 1]`.
pub fn masked_psnr(a: &Image, b: &Image, mask: &[bool]) -> f64 {
    let c = a.channels();
    let mut se = 0.0;
    let mut n = 0usize;
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        for k in 0..c {
            let d = (a.data()[i * c + k] - b.data()[i * c + k]) as f64;
            se += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return f64::NAN;
    }
    let mse = se / n as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}
