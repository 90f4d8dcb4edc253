use super::bundle::{BundleMeta, PairKind, RelightBundle};
use crate::camera::CameraModel;
use crate::envlight::EnvMap;
use crate::error::{Error, Result};
use crate::geometry::{Bvh, TriangleMesh};
use crate::raster::Image;
use crate::render::{ambient_occlusion, gbuffer, shadow_maps, SamplerConfig};

#[derive(Debug, Clone)]
pub struct TrainingPairs {
    pub pairs: Vec<RelightBundle>,
    /// Pairs that could not be produced and why.
    pub notices: Vec<String>,
}

/// Renders one frame under both maps and packages the relighting pairs:
/// sim-sim (label rendered under the target), identity (target equals
/// source, label is the source) and, when a captured frame is supplied,
/// sim-real (label is the captured frame). Maps are RGBE-quantized first so
/// bundles survive a write and read unchanged.
pub fn make_training_pairs(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    camera: &CameraModel,
    env_src: &EnvMap,
    env_tgt: &EnvMap,
    sampler: &SamplerConfig,
    real: Option<&Image>,
    frame: usize,
) -> Result<TrainingPairs> {
    let env_src = env_src.quantized()?;
    let env_tgt = env_tgt.quantized()?;
    let mut g = gbuffer(mesh, bvh, camera);
    g.set_ao(&ambient_occlusion(mesh, bvh, &g, sampler)?)?;
    let maps_src = shadow_maps(mesh, bvh, &g, &env_src, sampler)?;
    let maps_tgt = shadow_maps(mesh, bvh, &g, &env_tgt, sampler)?;
    let source = maps_src.shadowed.clone();
    let meta = |kind, approximate| BundleMeta {
        kind,
        frame,
        seed: sampler.seed,
        spp: sampler.spp,
        approximate,
    };

    let mut pairs = vec![
        RelightBundle {
            source: source.clone(),
            gbuffer: g.clone(),
            maps_src: maps_src.clone(),
            label: maps_tgt.shadowed.clone(),
            maps_tgt,
            env_src: env_src.clone(),
            env_tgt,
            meta: meta(PairKind::SimSim, false),
        },
        RelightBundle {
            source: source.clone(),
            gbuffer: g.clone(),
            maps_src: maps_src.clone(),
            maps_tgt: maps_src.clone(),
            env_src: env_src.clone(),
            env_tgt: env_src.clone(),
            label: source.clone(),
            meta: meta(PairKind::Identity, false),
        },
    ];
    let mut notices = Vec::new();
    match real {
        Some(img) => {
            if img.dims() != g.dims() || img.channels() != 3 {
                return Err(Error::precondition(format!(
                    "captured frame is {}x{}x{}, camera renders {}x{}x3",
                    img.width(),
                    img.height(),
                    img.channels(),
                    camera.width,
                    camera.height
                )));
            }
            pairs.push(RelightBundle {
                source,
                gbuffer: g,
                maps_tgt: maps_src.clone(),
                maps_src,
                env_tgt: env_src.clone(),
                env_src,
                label: img.clone(),
                meta: meta(PairKind::SimReal, true),
            });
        }
        None => notices.push(format!(
            "frame {frame}: no captured image supplied, sim-real pair skipped"
        )),
    }
    Ok(TrainingPairs { pairs, notices })
}
