//! Deferred rendering of lighting data: G-buffers, ambient occlusion, and
//! Lambertian renders under an environment map with and without shadow
//! rays.

mod sampling;
mod shade;

use glam::DVec3;
use rayon::prelude::*;

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::geometry::{Bvh, TriangleMesh};
use crate::panorama::{hit_depth, DepthMap};
use crate::raster::Image;

pub use sampling::{cosine_hemisphere, SamplerConfig, SamplingStrategy};
pub use shade::{ambient_occlusion, shade, shadow_maps, ShadowMaps, SHADOW_EPS};

/// Channel layout of the 8-channel buffer.
pub const POSITION: usize = 0;
pub const DEPTH: usize = 3;
pub const NORMAL: usize = 4;
pub const AO: usize = 7;
pub const GBUFFER_CHANNELS: usize = 8;

/// Sky value of the depth channel on disk.
pub const SKY_DEPTH_SENTINEL: f32 = -1.0;

/// Per-pixel geometry for deferred shading.
///
/// Channels are position (3), depth (1), normal (3) and ambient occlusion
/// (1). Sky pixels hold infinite depth, a zero normal, `ao = 1`, and the unit
/// camera-ray direction in the position slot so that later passes can look
/// up the environment without the camera. Albedo travels alongside but is
/// not one of the eight channels.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    buffer: Image,
    albedo: Image,
}

impl GBuffer {
    pub fn width(&self) -> usize {
        self.buffer.width()
    }

    pub fn height(&self) -> usize {
        self.buffer.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.buffer.dims()
    }

    pub fn buffer(&self) -> &Image {
        &self.buffer
    }

    pub fn albedo(&self) -> &Image {
        &self.albedo
    }

    pub fn is_sky(&self, x: usize, y: usize) -> bool {
        !self.buffer.get(x, y, DEPTH).is_finite()
    }

    pub fn depth(&self, x: usize, y: usize) -> f32 {
        self.buffer.get(x, y, DEPTH)
    }

    pub fn position(&self, x: usize, y: usize) -> DVec3 {
        self.vec3(x, y, POSITION)
    }

    pub fn normal(&self, x: usize, y: usize) -> DVec3 {
        self.vec3(x, y, NORMAL)
    }

    /// Unit direction of the camera ray at a sky pixel.
    pub fn sky_direction(&self, x: usize, y: usize) -> DVec3 {
        self.vec3(x, y, POSITION).normalize_or_zero()
    }

    pub fn ao(&self, x: usize, y: usize) -> f32 {
        self.buffer.get(x, y, AO)
    }

    pub fn depth_map(&self) -> DepthMap {
        let d = (0..self.buffer.pixel_count()).map(|i| self.buffer.data()[i * GBUFFER_CHANNELS + DEPTH]);
        DepthMap::new(self.width(), self.height(), d.collect()).expect("gbuffer depths are valid")
    }

    /// Replaces the ambient-occlusion channel.
    pub fn set_ao(&mut self, ao: &Image) -> Result<()> {
        if ao.dims() != self.dims() || ao.channels() != 1 {
            return Err(Error::precondition(
                "ambient occlusion raster does not match the G-buffer",
            ));
        }
        for (px, &a) in self.buffer.data_mut().chunks_exact_mut(GBUFFER_CHANNELS).zip(ao.data()) {
            px[AO] = a;
        }
        Ok(())
    }

    fn vec3(&self, x: usize, y: usize, c: usize) -> DVec3 {
        let p = &self.buffer.pixel(x, y)[c..c + 3];
        DVec3::new(p[0] as f64, p[1] as f64, p[2] as f64)
    }

    /// The buffer with sky depth replaced by [`SKY_DEPTH_SENTINEL`], ready
    /// for a float container.
    pub fn to_storage(&self) -> Image {
        let mut out = self.buffer.clone();
        for px in out.data_mut().chunks_exact_mut(GBUFFER_CHANNELS) {
            if !px[DEPTH].is_finite() {
                px[DEPTH] = SKY_DEPTH_SENTINEL;
            }
        }
        out
    }

    /// Reads the stored 8-channel form. Albedo is not stored and comes back
    /// black, which is enough for relighting but not for shading.
    pub fn from_storage(img: &Image) -> Result<Self> {
        if img.channels() != GBUFFER_CHANNELS {
            return Err(Error::precondition(format!(
                "G-buffer needs {GBUFFER_CHANNELS} channels, found {}",
                img.channels()
            )));
        }
        let mut buffer = img.clone();
        for px in buffer.data_mut().chunks_exact_mut(GBUFFER_CHANNELS) {
            if px[DEPTH] < 0.0 {
                px[DEPTH] = f32::INFINITY;
            }
        }
        Ok(GBuffer {
            buffer,
            albedo: Image::new(img.width(), img.height(), 3),
        })
    }
}

/// Nearest-hit position, depth and interpolated normal for every pixel
/// center, with `ao = 1` until [`ambient_occlusion`] fills it in.
pub fn gbuffer(mesh: &TriangleMesh, bvh: &Bvh, camera: &CameraModel) -> GBuffer {
    let (w, h) = (camera.width, camera.height);
    let mut buffer = Image::new(w, h, GBUFFER_CHANNELS);
    let mut albedo = Image::new(w, h, 3);
    buffer
        .data_mut()
        .par_chunks_mut(w * GBUFFER_CHANNELS)
        .zip(albedo.data_mut().par_chunks_mut(w * 3))
        .enumerate()
        .for_each(|(y, (row, alb))| {
            for x in 0..w {
                let px = &mut row[x * GBUFFER_CHANNELS..(x + 1) * GBUFFER_CHANNELS];
                let ray = camera.pixel_ray(x, y);
                let hit = bvh.intersect(mesh, &ray);
                px[DEPTH] = hit_depth(hit.as_ref());
                px[AO] = 1.0;
                match hit {
                    Some(hit) => {
                        let p = ray.at(hit.t);
                        px[POSITION..POSITION + 3].copy_from_slice(&[p.x as f32, p.y as f32, p.z as f32]);
                        let n = hit.normal;
                        px[NORMAL..NORMAL + 3].copy_from_slice(&[n.x as f32, n.y as f32, n.z as f32]);
                        let a = hit.albedo;
                        alb[3 * x..3 * x + 3].copy_from_slice(&[a.x as f32, a.y as f32, a.z as f32]);
                    }
                    None => {
                        let d = ray.direction;
                        px[POSITION..POSITION + 3].copy_from_slice(&[d.x as f32, d.y as f32, d.z as f32]);
                    }
                }
            }
        });
    GBuffer { buffer, albedo }
}
