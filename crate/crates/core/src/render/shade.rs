use std::f64::consts::PI;

use glam::DVec3;
use rayon::prelude::*;

use super::sampling::{cosine_hemisphere, SamplerConfig, SamplingStrategy};
use super::GBuffer;
use crate::envlight::{EnvDistribution, EnvMap};
use crate::error::{Error, Result};
use crate::geometry::{Bvh, Ray, TriangleMesh};
use crate::raster::Image;
use crate::rng::{seek_sample, stream, uniform, Purpose};

/// Regularizer in the shadow ratio and the relighting gain.
pub const SHADOW_EPS: f64 = 1e-6;

/// Shadow-ray origin offset as a fraction of the scene diameter.
const GEO_EPS: f64 = 1e-4;

/// Shadowed and unshadowed renders from one shared sample set and their
/// per-channel ratio `S = (shadowed + ε) / (unshadowed + ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowMaps {
    pub shadowed: Image,
    pub unshadowed: Image,
    pub ratio: Image,
}

impl ShadowMaps {
    pub fn dims(&self) -> (usize, usize) {
        self.ratio.dims()
    }

    /// Nine channels per pixel: shadowed RGB, unshadowed RGB, ratio RGB.
    pub fn to_storage(&self) -> Image {
        let (w, h) = self.dims();
        let mut out = Image::new(w, h, 9);
        for (i, px) in out.data_mut().chunks_exact_mut(9).enumerate() {
            px[0..3].copy_from_slice(&self.shadowed.data()[3 * i..3 * i + 3]);
            px[3..6].copy_from_slice(&self.unshadowed.data()[3 * i..3 * i + 3]);
            px[6..9].copy_from_slice(&self.ratio.data()[3 * i..3 * i + 3]);
        }
        out
    }

    pub fn from_storage(img: &Image) -> Result<Self> {
        if img.channels() != 9 {
            return Err(Error::precondition(format!(
                "shadow maps need 9 channels, found {}",
                img.channels()
            )));
        }
        let (w, h) = img.dims();
        let part = |k: usize| {
            let data = img
                .data()
                .chunks_exact(9)
                .flat_map(|px| px[3 * k..3 * k + 3].to_vec())
                .collect();
            Image::from_vec(w, h, 3, data).expect("shape matches")
        };
        Ok(ShadowMaps {
            shadowed: part(0),
            unshadowed: part(1),
            ratio: part(2),
        })
    }
}

/// Read-only state shared by every pixel of one render.
struct Lighting<'a> {
    mesh: &'a TriangleMesh,
    bvh: &'a Bvh,
    env: &'a EnvMap,
    dist: Option<EnvDistribution>,
    sampler: &'a SamplerConfig,
    offset: f64,
}

impl Lighting<'_> {
    fn new<'a>(
        mesh: &'a TriangleMesh,
        bvh: &'a Bvh,
        env: &'a EnvMap,
        sampler: &'a SamplerConfig,
    ) -> Result<Lighting<'a>> {
        sampler.validate()?;
        let dist = match sampler.strategy {
            SamplingStrategy::Cosine => None,
            SamplingStrategy::EnvMixture => EnvDistribution::new(env),
        };
        Ok(Lighting {
            mesh,
            bvh,
            env,
            dist,
            sampler,
            offset: GEO_EPS * mesh.diameter(),
        })
    }

    /// Unshadowed and (optionally) shadowed radiance estimates at one
    /// surface point, before the albedo factor. Both sums see the same
    /// directions in the same order, so the shadowed one never exceeds the
    /// other.
    fn estimate(&self, p: DVec3, n: DVec3, pixel: u64, trace_shadows: bool) -> (DVec3, DVec3) {
        let s = self.sampler;
        let origin = p + n * self.offset;
        let mut unshadowed = DVec3::ZERO;
        let mut shadowed = DVec3::ZERO;
        let mut rng = stream(s.seed, Purpose::Shading, pixel);
        for j in 0..s.spp {
            seek_sample(&mut rng, j as u64);
            let (dir, weight) = match &self.dist {
                None => {
                    let (u, v) = s.square(j, &mut rng);
                    // cos/π over a cos/π density: the radiance weight is 1.
                    (cosine_hemisphere(n, u, v), 1.0)
                }
                Some(dist) => {
                    let pick = uniform(&mut rng);
                    let (u, v) = s.square(j, &mut rng);
                    let dir = if pick < 0.5 {
                        cosine_hemisphere(n, u, v)
                    } else {
                        dist.sample(uniform(&mut rng), u, v).0
                    };
                    let cos = n.dot(dir);
                    if cos <= 0.0 {
                        continue;
                    }
                    let pdf = 0.5 * cos / PI + 0.5 * dist.pdf(dir);
                    (dir, cos / PI / pdf)
                }
            };
            let contrib = self.env.radiance(dir) * weight;
            unshadowed += contrib;
            if trace_shadows {
                let ray = Ray::new(origin, dir, 0.0, f64::INFINITY);
                if !self.bvh.occluded(self.mesh, &ray) {
                    shadowed += contrib;
                }
            }
        }
        let inv = 1.0 / s.spp as f64;
        let unshadowed = unshadowed * inv;
        let shadowed = if trace_shadows { shadowed * inv } else { unshadowed };
        (shadowed, unshadowed)
    }
}

fn to_f32(v: DVec3) -> [f32; 3] {
    [v.x as f32, v.y as f32, v.z as f32]
}

/// Per-pixel `(shadowed, unshadowed)` linear RGB; sky pixels show the
/// environment along the camera ray in both.
fn render_pair(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    gbuffer: &GBuffer,
    env: &EnvMap,
    sampler: &SamplerConfig,
    trace_shadows: bool,
) -> Result<Vec<([f32; 3], [f32; 3])>> {
    let light = Lighting::new(mesh, bvh, env, sampler)?;
    let w = gbuffer.width();
    Ok((0..gbuffer.buffer().pixel_count())
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if gbuffer.is_sky(x, y) {
                let e = to_f32(env.radiance(gbuffer.sky_direction(x, y)));
                return (e, e);
            }
            let kd = gbuffer.albedo().pixel(x, y);
            let kd = DVec3::new(kd[0] as f64, kd[1] as f64, kd[2] as f64);
            let (sh, un) = light.estimate(gbuffer.position(x, y), gbuffer.normal(x, y), i as u64, trace_shadows);
            (to_f32(kd * sh), to_f32(kd * un))
        })
        .collect())
}

fn split(pairs: &[([f32; 3], [f32; 3])], w: usize, h: usize, first: bool) -> Image {
    let data = pairs.iter().flat_map(|p| if first { p.0 } else { p.1 }).collect();
    Image::from_vec(w, h, 3, data).expect("shape matches")
}

/// Single-bounce Lambertian render under `env`. With cosine sampling the
/// estimator is `k_d · mean(E(ω_j) · V(ω_j))`; `V ≡ 1` when shadows are off.
pub fn shade(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    gbuffer: &GBuffer,
    env: &EnvMap,
    with_shadows: bool,
    sampler: &SamplerConfig,
) -> Result<Image> {
    let pairs = render_pair(mesh, bvh, gbuffer, env, sampler, with_shadows)?;
    let (w, h) = gbuffer.dims();
    Ok(split(&pairs, w, h, with_shadows))
}

/// Shadowed and unshadowed renders sharing every sample, and their ratio.
/// Sky pixels have `S = 1`.
pub fn shadow_maps(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    gbuffer: &GBuffer,
    env: &EnvMap,
    sampler: &SamplerConfig,
) -> Result<ShadowMaps> {
    let pairs = render_pair(mesh, bvh, gbuffer, env, sampler, true)?;
    let (w, h) = gbuffer.dims();
    let shadowed = split(&pairs, w, h, true);
    let unshadowed = split(&pairs, w, h, false);
    let ratio = shadowed
        .data()
        .iter()
        .zip(unshadowed.data())
        .map(|(&s, &u)| ((s as f64 + SHADOW_EPS) / (u as f64 + SHADOW_EPS)) as f32)
        .collect();
    Ok(ShadowMaps {
        shadowed,
        unshadowed,
        ratio: Image::from_vec(w, h, 3, ratio).expect("shape matches"),
    })
}

/// Fraction of cosine-weighted hemisphere rays that escape within one scene
/// diameter. Sky pixels get 1.
pub fn ambient_occlusion(mesh: &TriangleMesh, bvh: &Bvh, gbuffer: &GBuffer, sampler: &SamplerConfig) -> Result<Image> {
    sampler.validate()?;
    let diameter = mesh.diameter();
    let offset = GEO_EPS * diameter;
    let w = gbuffer.width();
    let data = (0..gbuffer.buffer().pixel_count())
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if gbuffer.is_sky(x, y) {
                return 1.0;
            }
            let n = gbuffer.normal(x, y);
            let origin = gbuffer.position(x, y) + n * offset;
            let mut rng = stream(sampler.seed, Purpose::AmbientOcclusion, i as u64);
            let open = (0..sampler.spp)
                .filter(|&j| {
                    seek_sample(&mut rng, j as u64);
                    let (u, v) = sampler.square(j, &mut rng);
                    let ray = Ray::new(origin, cosine_hemisphere(n, u, v), 0.0, diameter);
                    !bvh.occluded(mesh, &ray)
                })
                .count();
            (open as f64 / sampler.spp as f64) as f32
        })
        .collect();
    let (w, h) = gbuffer.dims();
    Ok(Image::from_vec(w, h, 1, data).expect("shape matches"))
}
