//! The `twinlight` command-line tool.
//!
//! Exit codes: 0 on success, 2 when inputs violate a precondition (including
//! bad arguments), 3 when a file cannot be read or written. Every invocation
//! leaves a JSON run manifest next to its output.

pub mod commands;
pub mod config;
pub mod formats;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use twinlight::parallel::{threads_from_env, with_threads};
use twinlight::render::SamplingStrategy;

use commands::Context;
use config::RenderFlags;
use manifest::{config_hash, manifest_path, write_manifest, RunManifest};

pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (float buffers FB01, scene grammar v1)");

#[derive(Debug, Parser)]
#[command(name = "twinlight", version = VERSION, about = "Lighting-aware digital twins for camera simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a signed distance grid to range samples.
    FitSdf {
        #[arg(long)]
        samples: PathBuf,
        /// min x y z, max x y z
        #[arg(long, value_parser = commands::parse_bounds, allow_hyphen_values = true)]
        bounds: twinlight::geometry::Aabb,
        /// Nodes per axis, one value or three.
        #[arg(long, value_parser = commands::parse_resolution)]
        res: [usize; 3],
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract and decimate the zero level set of a grid.
    ExtractMesh {
        #[arg(long)]
        sdf: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        iso: f64,
        /// Fraction of triangles to keep (1 keeps all).
        #[arg(long)]
        decimate: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project posed images onto mesh vertices.
    BakeAlbedo {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        images: Vec<PathBuf>,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stitch camera frames into a filled equirectangular panorama.
    Stitch {
        #[arg(long, num_args = 1.., required = true)]
        images: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        depths: Vec<PathBuf>,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        height: usize,
        /// Cap on relaxation sweeps at full resolution.
        #[arg(long)]
        fill_iterations: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an HDR sky dome to a panorama.
    EstimateSky {
        #[arg(long)]
        pano: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        /// latitude,longitude in degrees
        #[arg(long, value_parser = commands::parse_geo, allow_hyphen_values = true)]
        geo: Option<(f64, f64)>,
        /// Unix seconds or RFC 3339 (UTC offset required)
        #[arg(long, value_parser = commands::parse_time)]
        time: Option<i64>,
        #[arg(long, default_value_t = 1.0)]
        exposure: f64,
        /// Dome height; defaults to the panorama height.
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one frame of a scene under its own lighting.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long)]
        spp: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// cosine or env-mixture
        #[arg(long, value_parser = config::parse_strategy)]
        strategy: Option<SamplingStrategy>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relight a bundle to its target lighting.
    Relight {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Edit a scene and render relit frames with previews.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        edits: Option<PathBuf>,
        #[arg(long)]
        env_tgt: Option<PathBuf>,
        /// all, N, A-B or a comma-separated list
        #[arg(long, default_value = "all")]
        frames: String,
        #[arg(long)]
        spp: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = config::parse_strategy)]
        strategy: Option<SamplingStrategy>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::FitSdf { .. } => "fit-sdf",
            Command::ExtractMesh { .. } => "extract-mesh",
            Command::BakeAlbedo { .. } => "bake-albedo",
            Command::Stitch { .. } => "stitch",
            Command::EstimateSky { .. } => "estimate-sky",
            Command::Render { .. } => "render",
            Command::Relight { .. } => "relight",
            Command::Simulate { .. } => "simulate",
        }
    }

    /// Where the manifest goes.
    fn manifest(&self) -> PathBuf {
        match self {
            Command::Simulate { out, .. } => manifest_path(out, true),
            Command::FitSdf { out, .. }
            | Command::ExtractMesh { out, .. }
            | Command::BakeAlbedo { out, .. }
            | Command::Stitch { out, .. }
            | Command::EstimateSky { out, .. }
            | Command::Render { out, .. }
            | Command::Relight { out, .. } => manifest_path(out, false),
        }
    }

    fn execute(&self, ctx: &mut Context) -> anyhow::Result<()> {
        use commands::*;
        match self {
            Command::FitSdf {
                samples,
                bounds,
                res,
                out,
                config,
                iterations,
                seed,
            } => fit_sdf_cmd(
                &FitSdf {
                    samples,
                    bounds: *bounds,
                    resolution: *res,
                    out,
                    config: config.as_deref(),
                    iterations: *iterations,
                    seed: *seed,
                },
                ctx,
            ),
            Command::ExtractMesh {
                sdf,
                iso,
                decimate,
                out,
            } => extract_mesh_cmd(sdf, *iso, *decimate, out, ctx),
            Command::BakeAlbedo {
                mesh,
                images,
                cameras,
                out,
            } => bake_albedo_cmd(mesh, images, cameras, out, ctx),
            Command::Stitch {
                images,
                depths,
                cameras,
                height,
                fill_iterations,
                out,
            } => stitch_cmd(
                &Stitch {
                    images,
                    depths,
                    cameras,
                    height: *height,
                    fill_iterations: *fill_iterations,
                    out,
                },
                ctx,
            ),
            Command::EstimateSky {
                pano,
                mask,
                geo,
                time,
                exposure,
                height,
                out,
            } => estimate_sky_cmd(
                &EstimateSky {
                    pano,
                    mask: mask.as_deref(),
                    geo: *geo,
                    time: *time,
                    exposure: *exposure,
                    height: *height,
                    out,
                },
                ctx,
            ),
            Command::Render {
                scene,
                frame,
                spp,
                seed,
                strategy,
                config,
                out,
            } => render_cmd(
                &Render {
                    scene,
                    frame: *frame,
                    flags: RenderFlags {
                        spp: *spp,
                        seed: *seed,
                        strategy: *strategy,
                    },
                    config: config.as_deref(),
                    out,
                },
                ctx,
            ),
            Command::Relight { bundle, out } => relight_cmd(bundle, out, ctx),
            Command::Simulate {
                scene,
                edits,
                env_tgt,
                frames,
                spp,
                seed,
                strategy,
                config,
                out,
            } => simulate_cmd(
                &Simulate {
                    scene,
                    edits: edits.as_deref(),
                    env_tgt: env_tgt.as_deref(),
                    frames,
                    flags: RenderFlags {
                        spp: *spp,
                        seed: *seed,
                        strategy: *strategy,
                    },
                    config: config.as_deref(),
                    out,
                },
                ctx,
            ),
        }
    }
}

/// Exit code for a failed command: 3 for file problems, 2 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<twinlight::Error>() {
            return if e.is_io() { EXIT_IO } else { EXIT_PRECONDITION };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_PRECONDITION
}

/// The error and its causes on one line, skipping causes whose text the
/// previous message already includes.
pub fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn strings(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

/// Parses `args` (program name first), runs the command on a pool sized by
/// `THREADS`, writes the manifest and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let start = Instant::now();
    let mut ctx = Context::default();
    let result = with_threads(threads_from_env(), || cli.command.execute(&mut ctx));
    for w in &ctx.warnings {
        eprintln!("warning: {w}");
    }
    let mut code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", describe(e));
            exit_code(e)
        }
    };
    let manifest = RunManifest {
        version: VERSION.to_string(),
        command: cli.command.name().to_string(),
        command_line: args.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        config_hash: config_hash(&ctx.config),
        config: ctx.config,
        seeds: ctx.seeds,
        inputs: strings(&ctx.inputs),
        outputs: strings(&ctx.outputs),
        status: if result.is_ok() { "ok" } else { "failed" }.to_string(),
        error: result.as_ref().err().map(describe),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let path = cli.command.manifest();
    if let Err(e) = write_manifest(&path, &manifest) {
        eprintln!("error: cannot write run manifest {}: {e}", path.display());
        if code == 0 {
            code = EXIT_IO;
        }
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_names_the_formats() {
        assert!(VERSION.contains(std::str::from_utf8(twinlight::io::FB_MAGIC).unwrap()));
        assert!(VERSION.contains(&format!("scene grammar v{}", twinlight::scene::SCENE_GRAMMAR_VERSION)));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
