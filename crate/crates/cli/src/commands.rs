use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};
use serde_json::json;
use twinlight::envlight::{decode_sky, estimate_sky, solar_direction, EnvMap, GeoTime, SkyEstimateConfig};
use twinlight::geometry::{decimate, marching_cubes_at, ply, Aabb, Bvh, DEFAULT_DECIMATE_FRACTION};
use twinlight::io::{read_pgm, write_fb, write_pgm};
use twinlight::panorama::{fill_holes, stitch, DepthMap};
use twinlight::recon::{bake_vertex_albedo, fit_sdf, read_samples, write_loss_trace};
use twinlight::relight::{read_bundle, relight};
use twinlight::render::{ambient_occlusion, gbuffer, shadow_maps};
use twinlight::scene::{apply_edits, frame_geometry, frame_seed, parse_scene, read_edits, simulate, Document};
use twinlight::{DVec3, Error};

use crate::config::{recon_config, render_settings, ReconFlags, RenderFlags};
use crate::formats::{read_cameras, read_image, read_sdf, write_sdf};

/// What a command reports for its manifest.
#[derive(Debug, Default)]
pub struct Context {
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl Context {
    fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }
}

/// Comma- or space-separated numbers.
pub fn parse_numbers(s: &str) -> Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect()
}

pub fn parse_bounds(s: &str) -> Result<Aabb, String> {
    match parse_numbers(s)?.as_slice() {
        [a, b, c, d, e, f] => Ok(Aabb::new(DVec3::new(*a, *b, *c), DVec3::new(*d, *e, *f))),
        v => Err(format!(
            "bounds need 6 numbers (min x y z, max x y z), found {}",
            v.len()
        )),
    }
}

pub fn parse_resolution(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| format!("'{t}' is not a node count")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [n] => Ok([*n; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err("resolution is one node count or three".into()),
    }
}

/// `lat,lon` in degrees.
pub fn parse_geo(s: &str) -> Result<(f64, f64), String> {
    match parse_numbers(s)?.as_slice() {
        [lat, lon] => Ok((*lat, *lon)),
        _ => Err("--geo takes 'latitude,longitude' in degrees".into()),
    }
}

/// Unix seconds or an RFC 3339 timestamp.
pub fn parse_time(s: &str) -> Result<i64, String> {
    if let Ok(t) = s.parse::<i64>() {
        return Ok(t);
    }
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|t| t.timestamp())
        .map_err(|e| format!("'{s}' is neither Unix seconds nor an RFC 3339 time: {e}"))
}

/// `all`, `N`, `A-B` (inclusive) or a comma-separated mix.
pub fn parse_frames(s: &str, frame_count: usize) -> anyhow::Result<Vec<usize>> {
    if s.trim() == "all" {
        return Ok((0..frame_count).collect());
    }
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("'{t}' is not a frame index"))
        };
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                if a > b {
                    bail!("frame range {part} is reversed");
                }
                out.extend(a..=b);
            }
            None => out.push(parse(part)?),
        }
    }
    if out.is_empty() {
        bail!("no frames selected");
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn precondition(msg: impl Into<String>) -> anyhow::Error {
    Error::precondition(msg).into()
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn read_config(path: Option<&Path>, ctx: &mut Context) -> anyhow::Result<Option<Document>> {
    match path {
        Some(p) => {
            ctx.input(p);
            Ok(Some(Document::read(p)?))
        }
        None => Ok(None),
    }
}

pub struct FitSdf<'a> {
    pub samples: &'a Path,
    pub bounds: Aabb,
    pub resolution: [usize; 3],
    pub out: &'a Path,
    pub config: Option<&'a Path>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
}

pub fn fit_sdf_cmd(a: &FitSdf, ctx: &mut Context) -> anyhow::Result<()> {
    let doc = read_config(a.config, ctx)?;
    let cfg = recon_config(
        doc.as_ref(),
        ReconFlags {
            iterations: a.iterations,
            seed: a.seed,
        },
    )?;
    ctx.config = json!({
        "bounds": [a.bounds.min.to_array(), a.bounds.max.to_array()],
        "resolution": a.resolution,
        "iterations": cfg.iterations,
        "step_size": cfg.step_size,
        "lambda_lidar": cfg.lambda_lidar,
        "lambda_eikonal": cfg.lambda_eikonal,
        "lambda_freespace": cfg.lambda_freespace,
        "margin": cfg.margin,
        "freespace_samples": cfg.freespace_samples,
    });
    ctx.seeds.push(cfg.seed);
    ctx.input(a.samples);
    let samples = read_samples(a.samples)?;
    let fit = fit_sdf(&samples, a.bounds, a.resolution, &cfg)?;
    write_sdf(a.out, &fit.grid)?;
    ctx.output(a.out);
    let trace = a.out.with_extension("loss.csv");
    write_loss_trace(&trace, &fit.trace)?;
    ctx.output(&trace);
    Ok(())
}

pub fn extract_mesh_cmd(
    sdf: &Path,
    iso: f64,
    fraction: Option<f64>,
    out: &Path,
    ctx: &mut Context,
) -> anyhow::Result<()> {
    let fraction = fraction.unwrap_or(DEFAULT_DECIMATE_FRACTION);
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(precondition(format!("--decimate must be in (0, 1], got {fraction}")));
    }
    ctx.config = json!({ "iso": iso, "decimate": fraction });
    ctx.input(sdf);
    let grid = read_sdf(sdf)?;
    let mut mesh = marching_cubes_at(&grid, iso);
    if mesh.is_empty() {
        ctx.warnings.push(format!(
            "{}: the field never crosses {iso}; writing an empty mesh",
            display(sdf)
        ));
    } else if fraction < 1.0 {
        let target = ((mesh.triangle_count() as f64 * fraction).round() as usize).max(1);
        mesh = decimate(&mesh, target)?;
    }
    ply::write(out, &mesh)?;
    ctx.output(out);
    Ok(())
}

pub fn bake_albedo_cmd(
    mesh: &Path,
    images: &[PathBuf],
    cameras: &Path,
    out: &Path,
    ctx: &mut Context,
) -> anyhow::Result<()> {
    ctx.config = json!({ "images": images.len() });
    ctx.input(mesh);
    let m = ply::read(mesh)?;
    let mut imgs = Vec::new();
    for p in images {
        ctx.input(p);
        imgs.push(read_image(p)?);
    }
    ctx.input(cameras);
    let cams = read_cameras(cameras)?;
    let bvh = Bvh::build(&m);
    let baked = bake_vertex_albedo(&m, &imgs, &cams, &bvh)?;
    let unseen = baked.unseen.iter().filter(|u| **u).count();
    if unseen > 0 {
        ctx.warnings.push(format!(
            "{unseen} of {} vertices are not seen by any camera and keep the default albedo",
            baked.unseen.len()
        ));
    }
    ply::write(out, &baked.mesh)?;
    ctx.output(out);
    Ok(())
}

pub struct Stitch<'a> {
    pub images: &'a [PathBuf],
    pub depths: &'a [PathBuf],
    pub cameras: &'a Path,
    pub height: usize,
    pub fill_iterations: Option<usize>,
    pub out: &'a Path,
}

pub fn stitch_cmd(a: &Stitch, ctx: &mut Context) -> anyhow::Result<()> {
    ctx.config = json!({ "height": a.height, "fill_iterations": a.fill_iterations });
    if a.images.len() != a.depths.len() {
        return Err(precondition(format!(
            "{} images but {} depth maps",
            a.images.len(),
            a.depths.len()
        )));
    }
    let mut images = Vec::new();
    let mut depths = Vec::new();
    for (ip, dp) in a.images.iter().zip(a.depths) {
        ctx.input(ip);
        ctx.input(dp);
        images.push(read_image(ip)?);
        depths.push(DepthMap::from_image(&read_image(dp)?)?);
    }
    ctx.input(a.cameras);
    let cams = read_cameras(a.cameras)?;
    let pano = stitch(&images, &depths, &cams, a.height)?;
    let filled = fill_holes(&pano, a.fill_iterations)?;
    write_fb(a.out, &filled)?;
    ctx.output(a.out);
    let mask = a.out.with_extension("mask.pgm");
    write_pgm(&mask, pano.width(), pano.height(), &pano.mask)?;
    ctx.output(&mask);
    Ok(())
}

pub struct EstimateSky<'a> {
    pub pano: &'a Path,
    pub mask: Option<&'a Path>,
    pub geo: Option<(f64, f64)>,
    pub time: Option<i64>,
    pub exposure: f64,
    pub height: Option<usize>,
    pub out: &'a Path,
}

pub fn estimate_sky_cmd(a: &EstimateSky, ctx: &mut Context) -> anyhow::Result<()> {
    let sun = match (a.geo, a.time) {
        (Some((lat, lon)), Some(t)) => Some(solar_direction(&GeoTime::new(lat, lon, t)?)?),
        (None, None) => None,
        _ => return Err(precondition("--geo and --time must be given together")),
    };
    ctx.input(a.pano);
    let ldr = read_image(a.pano)?;
    if ldr.channels() != 3 || ldr.width() != 2 * ldr.height() {
        return Err(precondition(format!(
            "panorama must be 2H x H with 3 channels, found {}x{}x{}",
            ldr.width(),
            ldr.height(),
            ldr.channels()
        )));
    }
    let mask = match a.mask {
        Some(p) => {
            ctx.input(p);
            let (w, h, m) = read_pgm(p)?;
            if (w, h) != ldr.dims() {
                return Err(precondition(format!(
                    "mask is {w}x{h}, panorama is {}x{}",
                    ldr.width(),
                    ldr.height()
                )));
            }
            m
        }
        None => vec![true; ldr.pixel_count()],
    };
    let height = a.height.unwrap_or(ldr.height());
    ctx.config = json!({
        "geo": a.geo.map(|(lat, lon)| [lat, lon]),
        "time": a.time,
        "exposure": a.exposure,
        "height": height,
    });
    let cfg = SkyEstimateConfig {
        exposure: a.exposure,
        sun,
        ..SkyEstimateConfig::default()
    };
    let params = estimate_sky(&ldr, &mask, &cfg)?;
    decode_sky(&params, height)?.write(a.out)?;
    ctx.output(a.out);
    let text = a.out.with_extension("txt");
    std::fs::write(&text, params.to_text()).map_err(|e| Error::io(&text, e))?;
    ctx.output(&text);
    Ok(())
}

/// The scene file doubles as configuration unless `--config` names another.
fn scene_and_config(
    scene: &Path,
    config: Option<&Path>,
    ctx: &mut Context,
) -> anyhow::Result<(twinlight::scene::Scene, Document)> {
    ctx.input(scene);
    let scene_doc = Document::read(scene)?;
    let s = parse_scene(&scene_doc)?;
    let cfg = match config {
        Some(p) => {
            ctx.input(p);
            Document::read(p)?
        }
        None => scene_doc,
    };
    Ok((s, cfg))
}

pub struct Render<'a> {
    pub scene: &'a Path,
    pub frame: usize,
    pub flags: RenderFlags,
    pub config: Option<&'a Path>,
    pub out: &'a Path,
}

/// The frame under the scene lighting, with the same noise as the
/// corresponding simulated frame's source.
pub fn render_cmd(a: &Render, ctx: &mut Context) -> anyhow::Result<()> {
    let (scene, doc) = scene_and_config(a.scene, a.config, ctx)?;
    let settings = render_settings(Some(&doc), a.flags)?;
    ctx.config = json!({ "frame": a.frame, "render": settings });
    ctx.seeds.push(settings.seed);
    let geo = frame_geometry(&scene, a.frame)?;
    let bvh = Bvh::build(&geo.mesh);
    let mut sampler = settings.sampler();
    sampler.seed = frame_seed(sampler.seed, a.frame);
    let env = scene.env.quantized()?;
    let mut g = gbuffer(&geo.mesh, &bvh, &scene.camera(a.frame));
    g.set_ao(&ambient_occlusion(&geo.mesh, &bvh, &g, &sampler)?)?;
    let maps = shadow_maps(&geo.mesh, &bvh, &g, &env, &sampler)?;
    write_fb(a.out, &maps.shadowed)?;
    ctx.output(a.out);
    Ok(())
}

pub fn relight_cmd(bundle: &Path, out: &Path, ctx: &mut Context) -> anyhow::Result<()> {
    ctx.input(bundle);
    let b = read_bundle(bundle)?;
    ctx.config = json!({ "kind": b.meta.kind.to_string(), "frame": b.meta.frame });
    ctx.seeds.push(b.meta.seed);
    if b.meta.approximate {
        ctx.warnings
            .push("bundle source is a captured frame; the relit result is approximate".to_string());
    }
    write_fb(out, &relight(&b.input())?)?;
    ctx.output(out);
    Ok(())
}

pub struct Simulate<'a> {
    pub scene: &'a Path,
    pub edits: Option<&'a Path>,
    pub env_tgt: Option<&'a Path>,
    pub frames: &'a str,
    pub flags: RenderFlags,
    pub config: Option<&'a Path>,
    pub out: &'a Path,
}

pub fn simulate_cmd(a: &Simulate, ctx: &mut Context) -> anyhow::Result<()> {
    let (mut scene, doc) = scene_and_config(a.scene, a.config, ctx)?;
    let settings = render_settings(Some(&doc), a.flags)?;
    if let Some(p) = a.edits {
        ctx.input(p);
        scene = apply_edits(&scene, &read_edits(p)?).with_context(|| format!("applying {}", display(p)))?;
    }
    let env_tgt = match a.env_tgt {
        Some(p) => {
            ctx.input(p);
            Some(EnvMap::read(p)?)
        }
        None => None,
    };
    let frames = parse_frames(a.frames, scene.frame_count).map_err(|e| precondition(e.to_string()))?;
    ctx.config = json!({
        "frames": frames,
        "render": settings,
        "target_lighting": a.env_tgt.map(display),
    });
    ctx.seeds.push(settings.seed);
    let report = simulate(&scene, &frames, &settings.sampler(), env_tgt.as_ref(), a.out)?;
    ctx.outputs.extend(report.outputs.iter().cloned());
    if report.succeeded() {
        return Ok(());
    }
    let io = report.failures.iter().any(|(_, e)| e.is_io());
    let detail: Vec<String> = report.failures.iter().map(|(t, e)| format!("frame {t}: {e}")).collect();
    let msg = format!(
        "{} of {} frames failed (outputs of the others were kept)\n  {}",
        report.failures.len(),
        frames.len(),
        detail.join("\n  ")
    );
    Err(match io {
        true => Error::Codec {
            path: a.out.to_path_buf(),
            message: msg,
        }
        .into(),
        false => precondition(msg),
    })
}
