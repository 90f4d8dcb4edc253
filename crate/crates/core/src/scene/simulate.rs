use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{frame_geometry, Scene};
use crate::envlight::{tonemap_ldr, EnvMap};
use crate::error::{Error, Result};
use crate::geometry::Bvh;
use crate::io::write_png;
use crate::raster::Image;
use crate::relight::{relight, write_bundle, BundleMeta, PairKind, RelightBundle, RelightInput};
use crate::render::{ambient_occlusion, gbuffer, shadow_maps, GBuffer, SamplerConfig, ShadowMaps};

/// Multiplier that spreads frame indices over the seed space.
const FRAME_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed used for one frame, so frames get independent noise while any frame
/// can be rendered on its own.
pub fn frame_seed(seed: u64, frame: usize) -> u64 {
    seed ^ (frame as u64 + 1).wrapping_mul(FRAME_SEED_STRIDE)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedFrame {
    pub frame: usize,
    pub gbuffer: GBuffer,
    pub maps_src: ShadowMaps,
    pub maps_tgt: ShadowMaps,
    /// Render under the scene lighting.
    pub source: Image,
    pub relit: Image,
    /// Quantized lighting actually used.
    pub env_src: EnvMap,
    pub env_tgt: EnvMap,
    pub seed: u64,
}

/// Renders and relights one frame. Without a target the scene lighting is
/// reused, which plays the reconstruction back unchanged. Both maps are
/// RGBE-quantized first so the written bundle reproduces the result.
pub fn simulate_frame(
    scene: &Scene,
    frame: usize,
    sampler: &SamplerConfig,
    env_tgt: Option<&EnvMap>,
) -> Result<SimulatedFrame> {
    let geo = frame_geometry(scene, frame)?;
    let bvh = Bvh::build(&geo.mesh);
    let camera = scene.camera(frame);
    let cfg = SamplerConfig {
        seed: frame_seed(sampler.seed, frame),
        ..*sampler
    };
    let env_src = scene.env.quantized()?;
    let env_tgt = match env_tgt {
        Some(e) => e.quantized()?,
        None => env_src.clone(),
    };
    let mut g = gbuffer(&geo.mesh, &bvh, &camera);
    g.set_ao(&ambient_occlusion(&geo.mesh, &bvh, &g, &cfg)?)?;
    let maps_src = shadow_maps(&geo.mesh, &bvh, &g, &env_src, &cfg)?;
    let maps_tgt = if env_tgt == env_src {
        maps_src.clone()
    } else {
        shadow_maps(&geo.mesh, &bvh, &g, &env_tgt, &cfg)?
    };
    let source = maps_src.shadowed.clone();
    let relit = relight(&RelightInput {
        source: &source,
        gbuffer: &g,
        maps_src: &maps_src,
        maps_tgt: &maps_tgt,
        env_src: &env_src,
        env_tgt: &env_tgt,
    })?;
    Ok(SimulatedFrame {
        frame,
        gbuffer: g,
        maps_src,
        maps_tgt,
        source,
        relit,
        env_src,
        env_tgt,
        seed: cfg.seed,
    })
}

#[derive(Debug, Default)]
pub struct SimulationReport {
    /// Frames whose artifacts were written, ascending.
    pub written: Vec<usize>,
    /// Frames that failed, ascending, with the reason.
    pub failures: Vec<(usize, Error)>,
    /// Every file and directory produced.
    pub outputs: Vec<PathBuf>,
}

impl SimulationReport {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

fn write_frame(out: &Path, f: SimulatedFrame, spp: usize) -> Result<Vec<PathBuf>> {
    let dir = out.join(format!("frame_{:04}", f.frame));
    let png = out.join(format!("frame_{:04}.png", f.frame));
    write_png(&png, &tonemap_ldr(&f.relit, 1.0)?)?;
    let bundle = RelightBundle {
        source: f.source,
        gbuffer: f.gbuffer,
        maps_src: f.maps_src,
        maps_tgt: f.maps_tgt,
        env_src: f.env_src,
        env_tgt: f.env_tgt,
        label: f.relit,
        meta: BundleMeta {
            kind: PairKind::Simulated,
            frame: f.frame,
            seed: f.seed,
            spp,
            approximate: false,
        },
    };
    write_bundle(&dir, &bundle)?;
    Ok(vec![dir, png])
}

/// Simulates the requested frames in parallel and writes a relight bundle
/// (`frame_NNNN/`, label = relit frame) and a tone-mapped preview
/// (`frame_NNNN.png`) for each. A failing frame is recorded and does not
/// stop the others; outputs of frames that succeeded are kept.
pub fn simulate(
    scene: &Scene,
    frames: &[usize],
    sampler: &SamplerConfig,
    env_tgt: Option<&EnvMap>,
    out_dir: &Path,
) -> Result<SimulationReport> {
    scene.validate()?;
    sampler.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut frames = frames.to_vec();
    frames.sort_unstable();
    frames.dedup();
    let results: Vec<(usize, Result<Vec<PathBuf>>)> = frames
        .par_iter()
        .map(|&t| {
            let r = simulate_frame(scene, t, sampler, env_tgt).and_then(|f| write_frame(out_dir, f, sampler.spp));
            (t, r)
        })
        .collect();
    let mut report = SimulationReport::default();
    for (t, r) in results {
        match r {
            Ok(paths) => {
                report.written.push(t);
                report.outputs.extend(paths);
            }
            Err(e) => report.failures.push((t, e)),
        }
    }
    Ok(report)
}
