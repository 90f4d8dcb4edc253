//! `[render]` and `[recon]` sections of a configuration file, layered under
//! command-line flags.

use serde::Serialize;
use twinlight::recon::ReconConfig;
use twinlight::render::{SamplerConfig, SamplingStrategy};
use twinlight::scene::{Document, Section};
use twinlight::Result;

pub fn parse_strategy(s: &str) -> std::result::Result<SamplingStrategy, String> {
    match s {
        "cosine" => Ok(SamplingStrategy::Cosine),
        "env-mixture" => Ok(SamplingStrategy::EnvMixture),
        other => Err(format!(
            "unknown sampling strategy '{other}' (expected cosine or env-mixture)"
        )),
    }
}

pub fn strategy_name(s: SamplingStrategy) -> &'static str {
    match s {
        SamplingStrategy::Cosine => "cosine",
        SamplingStrategy::EnvMixture => "env-mixture",
    }
}

/// Render settings as recorded in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenderSettings {
    pub spp: usize,
    pub seed: u64,
    pub strategy: &'static str,
    pub strata: [usize; 2],
}

impl RenderSettings {
    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig::new(self.spp, self.seed)
            .with_strategy(parse_strategy(self.strategy).expect("validated"))
            .with_strata(self.strata[0], self.strata[1])
    }
}

/// Flag values; `None` falls through to the file and then the defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct RenderFlags {
    pub spp: Option<usize>,
    pub seed: Option<u64>,
    pub strategy: Option<SamplingStrategy>,
}

fn section<'a>(doc: Option<&'a Document>, name: &str) -> Result<Option<(&'a Document, &'a Section)>> {
    match doc {
        Some(d) => Ok(d.section(name)?.map(|s| (d, s))),
        None => Ok(None),
    }
}

pub fn render_settings(doc: Option<&Document>, flags: RenderFlags) -> Result<RenderSettings> {
    let base = SamplerConfig::default();
    let mut spp = base.spp;
    let mut seed = base.seed;
    let mut strategy = base.strategy;
    let mut strata = base.strata;
    if let Some((d, s)) = section(doc, "render")? {
        d.check_keys(s, &["spp", "seed", "strategy", "strata"])?;
        if let Some(e) = s.get("spp") {
            spp = d.value(e)?;
        }
        if let Some(e) = s.get("seed") {
            seed = d.value(e)?;
        }
        if let Some(e) = s.get("strategy") {
            strategy = parse_strategy(&e.value).map_err(|m| d.error(e.line, e.column, m))?;
        }
        if let Some(e) = s.get("strata") {
            let v = d.numbers(e, Some(2))?;
            if v.iter().any(|x| *x < 1.0 || x.fract() != 0.0) {
                return Err(d.error(e.line, e.column, "strata must be two positive integers"));
            }
            strata = [v[0] as usize, v[1] as usize];
        }
    }
    let settings = RenderSettings {
        spp: flags.spp.unwrap_or(spp),
        seed: flags.seed.unwrap_or(seed),
        strategy: strategy_name(flags.strategy.unwrap_or(strategy)),
        strata,
    };
    settings.sampler().validate()?;
    Ok(settings)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReconFlags {
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
}

pub fn recon_config(doc: Option<&Document>, flags: ReconFlags) -> Result<ReconConfig> {
    let mut c = ReconConfig::default();
    if let Some((d, s)) = section(doc, "recon")? {
        d.check_keys(
            s,
            &[
                "iterations",
                "step_size",
                "lambda_lidar",
                "lambda_eikonal",
                "lambda_freespace",
                "margin",
                "freespace_samples",
                "seed",
            ],
        )?;
        for e in &s.entries {
            match e.key.as_str() {
                "iterations" => c.iterations = d.value(e)?,
                "step_size" => c.step_size = d.value(e)?,
                "lambda_lidar" => c.lambda_lidar = d.value(e)?,
                "lambda_eikonal" => c.lambda_eikonal = d.value(e)?,
                "lambda_freespace" => c.lambda_freespace = d.value(e)?,
                "margin" => c.margin = d.value(e)?,
                "freespace_samples" => c.freespace_samples = d.value(e)?,
                "seed" => c.seed = d.value(e)?,
                _ => unreachable!("keys checked"),
            }
        }
    }
    if let Some(n) = flags.iterations {
        c.iterations = n;
    }
    if let Some(s) = flags.seed {
        c.seed = s;
    }
    c.validate()?;
    Ok(c)
}
