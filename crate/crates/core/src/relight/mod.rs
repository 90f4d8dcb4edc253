//! Deferred relighting from precomputed buffers: the source frame is
//! rescaled per pixel by the change in unshadowed irradiance and in shadow
//! ratio between the source and target environments.

mod bundle;
mod losses;
mod pairs;

use glam::DVec3;
use rayon::prelude::*;

use crate::envlight::EnvMap;
use crate::error::{Error, Result};
use crate::raster::Image;
use crate::render::{GBuffer, ShadowMaps, SHADOW_EPS};

pub use bundle::{read_bundle, write_bundle, BundleMeta, PairKind, RelightBundle};
pub use losses::{relight_losses, sobel, LossWeights, RelightLosses};
pub use pairs::{make_training_pairs, TrainingPairs};

/// Everything the relighter sees for one frame.
#[derive(Debug, Clone, Copy)]
pub struct RelightInput<'a> {
    /// Linear RGB frame lit by `env_src`.
    pub source: &'a Image,
    pub gbuffer: &'a GBuffer,
    pub maps_src: &'a ShadowMaps,
    pub maps_tgt: &'a ShadowMaps,
    pub env_src: &'a EnvMap,
    pub env_tgt: &'a EnvMap,
}

impl RelightInput<'_> {
    fn check(&self) -> Result<()> {
        let dims = self.gbuffer.dims();
        let shapes = [
            ("source", self.source.dims(), self.source.channels()),
            (
                "source shadow maps",
                self.maps_src.dims(),
                self.maps_src.ratio.channels(),
            ),
            (
                "target shadow maps",
                self.maps_tgt.dims(),
                self.maps_tgt.ratio.channels(),
            ),
        ];
        for (name, d, c) in shapes {
            if d != dims || c != 3 {
                return Err(Error::precondition(format!(
                    "{name} is {}x{}x{c}, expected {}x{}x3 to match the G-buffer",
                    d.0, d.1, dims.0, dims.1
                )));
            }
        }
        Ok(())
    }
}

/// Relit frame. Surface pixels are multiplied by
/// `(u_tgt + ε)/(u_src + ε) · (S_tgt + ε)/(S_src + ε)` per channel and
/// clamped below at zero; sky pixels show the target environment along the
/// camera ray. Bitwise-equal source and target maps give a gain of exactly 1.
pub fn relight(input: &RelightInput) -> Result<Image> {
    input.check()?;
    let (w, h) = input.gbuffer.dims();
    let eps = SHADOW_EPS;
    let data: Vec<f32> = (0..w * h)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (x, y) = (i % w, i / w);
            let mut out = [0f32; 3];
            if input.gbuffer.is_sky(x, y) {
                let e: DVec3 = input.env_tgt.radiance(input.gbuffer.sky_direction(x, y));
                out = [e.x as f32, e.y as f32, e.z as f32];
            } else {
                let src = input.source.pixel(x, y);
                let (us, ut) = (
                    input.maps_src.unshadowed.pixel(x, y),
                    input.maps_tgt.unshadowed.pixel(x, y),
                );
                let (ss, st) = (input.maps_src.ratio.pixel(x, y), input.maps_tgt.ratio.pixel(x, y));
                for c in 0..3 {
                    let gain =
                        (ut[c] as f64 + eps) / (us[c] as f64 + eps) * ((st[c] as f64 + eps) / (ss[c] as f64 + eps));
                    out[c] = (src[c] as f64 * gain).max(0.0) as f32;
                }
            }
            out
        })
        .collect();
    Ok(Image::from_vec(w, h, 3, data).expect("shape matches"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraModel;
    use crate::envlight::rotate_env;
    use crate::fixtures::{compass_direction, sun_dome};
    use crate::geometry::{primitives, Bvh, TriangleMesh};
    use crate::render::{gbuffer, shade, shadow_maps, SamplerConfig, SamplingStrategy};

    struct Frame {
        mesh: TriangleMesh,
        bvh: Bvh,
        g: GBuffer,
    }

    fn frame() -> Frame {
        let mut mesh = primitives::plane_grid(DVec3::ZERO, 4.0, 2, DVec3::new(0.5, 0.4, 0.3));
        mesh.append(&primitives::cuboid(
            DVec3::new(-0.4, -0.3, 0.0),
            DVec3::new(0.3, 0.5, 0.9),
            DVec3::splat(0.6),
        ));
        let bvh = Bvh::build(&mesh);
        let cam = CameraModel::look_at(DVec3::new(1.0, -4.0, 2.5), DVec3::ZERO, DVec3::Z, 40, 30, 1.3).unwrap();
        let g = gbuffer(&mesh, &bvh, &cam);
        Frame { mesh, bvh, g }
    }

    #[test]
    fn identical_lighting_is_the_identity() {
        let f = frame();
        let env = sun_dome(compass_direction(120.0, 40.0), 500.0, 32).unwrap();
        let cfg = SamplerConfig::new(16, 0);
        let maps = shadow_maps(&f.mesh, &f.bvh, &f.g, &env, &cfg).unwrap();
        let input = RelightInput {
            source: &maps.shadowed,
            gbuffer: &f.g,
            maps_src: &maps,
            maps_tgt: &maps,
            env_src: &env,
            env_tgt: &env,
        };
        assert_eq!(relight(&input).unwrap(), maps.shadowed);
    }

    #[test]
    fn relighting_a_render_reproduces_the_target_render() {
        let f = frame();
        let src = sun_dome(compass_direction(120.0, 40.0), 800.0, 64).unwrap();
        let tgt = rotate_env(&sun_dome(compass_direction(250.0, 25.0), 300.0, 64).unwrap(), 0.3);
        let cfg = SamplerConfig::new(32, 4).with_strategy(SamplingStrategy::EnvMixture);
        let ms = shadow_maps(&f.mesh, &f.bvh, &f.g, &src, &cfg).unwrap();
        let mt = shadow_maps(&f.mesh, &f.bvh, &f.g, &tgt, &cfg).unwrap();
        let source = shade(&f.mesh, &f.bvh, &f.g, &src, true, &cfg).unwrap();
        let expect = shade(&f.mesh, &f.bvh, &f.g, &tgt, true, &cfg).unwrap();
        let out = relight(&RelightInput {
            source: &source,
            gbuffer: &f.g,
            maps_src: &ms,
            maps_tgt: &mt,
            env_src: &src,
            env_tgt: &tgt,
        })
        .unwrap();
        let mae = out
            .data()
            .iter()
            .zip(expect.data())
            .map(|(a, b)| (a - b).abs() as f64)
            .sum::<f64>()
            / out.data().len() as f64;
        assert!(mae < 1e-4, "mean abs error {mae}");
    }

    #[test]
    fn scaling_the_target_scales_the_output() {
        let f = frame();
        let env = sun_dome(compass_direction(80.0, 50.0), 200.0, 32).unwrap();
        let cfg = SamplerConfig::new(16, 2);
        let ms = shadow_maps(&f.mesh, &f.bvh, &f.g, &env, &cfg).unwrap();
        let bright = env.scaled(2.0);
        let mt = shadow_maps(&f.mesh, &f.bvh, &f.g, &bright, &cfg).unwrap();
        let out = relight(&RelightInput {
            source: &ms.shadowed,
            gbuffer: &f.g,
            maps_src: &ms,
            maps_tgt: &mt,
            env_src: &env,
            env_tgt: &bright,
        })
        .unwrap();
        for (o, s) in out.data().iter().zip(ms.shadowed.data()) {
            if *s > 1e-3 {
                assert!((*o as f64 / *s as f64 - 2.0).abs() < 2e-5, "{o} vs {s}");
            }
        }
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let f = frame();
        let env = EnvMap::uniform(8, DVec3::ONE).unwrap();
        let maps = shadow_maps(&f.mesh, &f.bvh, &f.g, &env, &SamplerConfig::new(1, 0)).unwrap();
        let small = Image::new(3, 3, 3);
        let input = RelightInput {
            source: &small,
            gbuffer: &f.g,
            maps_src: &maps,
            maps_tgt: &maps,
            env_src: &env,
            env_tgt: &env,
        };
        assert!(relight(&input).is_err());
    }
}
