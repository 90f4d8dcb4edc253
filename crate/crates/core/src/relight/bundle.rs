use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::envlight::EnvMap;
use crate::error::{Error, Result};
use crate::io::{read_fb, write_fb};
use crate::raster::Image;
use crate::render::{GBuffer, ShadowMaps};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Render under the source map, labeled with the render under the target.
    SimSim,
    /// Source and target lighting equal; the label is the source.
    Identity,
    /// Render under the source map, labeled with a captured frame.
    SimReal,
    /// One frame of a simulated sequence; the label is the relit frame.
    Simulated,
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairKind::SimSim => "sim-sim",
            PairKind::Identity => "identity",
            PairKind::SimReal => "sim-real",
            PairKind::Simulated => "simulated",
        })
    }
}

impl FromStr for PairKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sim-sim" => Ok(PairKind::SimSim),
            "identity" => Ok(PairKind::Identity),
            "sim-real" => Ok(PairKind::SimReal),
            "simulated" => Ok(PairKind::Simulated),
            other => Err(format!("unknown pair kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleMeta {
    pub kind: PairKind,
    pub frame: usize,
    pub seed: u64,
    pub spp: usize,
    /// Set when the source is a captured frame rather than a render, so
    /// relit results inherit renderer-versus-reality mismatch.
    pub approximate: bool,
}

impl BundleMeta {
    pub fn to_text(&self) -> String {
        format!(
            "kind={}\nframe={}\nseed={}\nspp={}\napproximate={}\n",
            self.kind, self.frame, self.seed, self.spp, self.approximate
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let (mut kind, mut frame, mut seed, mut spp, mut approximate) = (None, None, None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| Error::format(path, i + 1, m);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, found '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |what: &str| bad(format!("{what} must be a non-negative integer, found '{value}'"));
            match key {
                "kind" => kind = Some(value.parse::<PairKind>().map_err(bad)?),
                "frame" => frame = Some(value.parse::<usize>().map_err(|_| num("frame"))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| num("seed"))?),
                "spp" => spp = Some(value.parse::<usize>().map_err(|_| num("spp"))?),
                "approximate" => {
                    approximate = Some(
                        value
                            .parse::<bool>()
                            .map_err(|_| bad(format!("approximate must be true or false, found '{value}'")))?,
                    )
                }
                // Unknown keys are kept for forward compatibility.
                _ => {}
            }
        }
        let missing = |k: &str| Error::Codec {
            path: path.to_path_buf(),
            message: format!("missing key '{k}'"),
        };
        Ok(BundleMeta {
            kind: kind.ok_or_else(|| missing("kind"))?,
            frame: frame.ok_or_else(|| missing("frame"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            spp: spp.ok_or_else(|| missing("spp"))?,
            approximate: approximate.unwrap_or(false),
        })
    }
}

/// One relighting example: inputs for the relighter plus its label.
#[derive(Debug, Clone, PartialEq)]
pub struct RelightBundle {
    pub source: Image,
    pub gbuffer: GBuffer,
    pub maps_src: ShadowMaps,
    pub maps_tgt: ShadowMaps,
    pub env_src: EnvMap,
    pub env_tgt: EnvMap,
    pub label: Image,
    pub meta: BundleMeta,
}

impl RelightBundle {
    pub fn input(&self) -> super::RelightInput<'_> {
        super::RelightInput {
            source: &self.source,
            gbuffer: &self.gbuffer,
            maps_src: &self.maps_src,
            maps_tgt: &self.maps_tgt,
            env_src: &self.env_src,
            env_tgt: &self.env_tgt,
        }
    }
}

/// Writes `source.fb`, `gbuffer.fb`, `s_src.fb`, `s_tgt.fb`, `env_src.hdr`,
/// `env_tgt.hdr`, `label.fb` and `meta` into `dir`, creating it if needed.
/// Environment maps are stored as RGBE, so bundles should be built from
/// maps that already went through [`EnvMap::quantized`].
pub fn write_bundle(dir: &Path, bundle: &RelightBundle) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_fb(&dir.join("source.fb"), &bundle.source)?;
    write_fb(&dir.join("gbuffer.fb"), &bundle.gbuffer.to_storage())?;
    write_fb(&dir.join("s_src.fb"), &bundle.maps_src.to_storage())?;
    write_fb(&dir.join("s_tgt.fb"), &bundle.maps_tgt.to_storage())?;
    bundle.env_src.write(&dir.join("env_src.hdr"))?;
    bundle.env_tgt.write(&dir.join("env_tgt.hdr"))?;
    write_fb(&dir.join("label.fb"), &bundle.label)?;
    let meta = dir.join("meta");
    fs::write(&meta, bundle.meta.to_text()).map_err(|e| Error::io(meta, e))
}

/// Reads a bundle written by [`write_bundle`]. The G-buffer comes back
/// without albedo.
pub fn read_bundle(dir: &Path) -> Result<RelightBundle> {
    let meta_path = dir.join("meta");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    Ok(RelightBundle {
        source: read_fb(&dir.join("source.fb"))?,
        gbuffer: GBuffer::from_storage(&read_fb(&dir.join("gbuffer.fb"))?)?,
        maps_src: ShadowMaps::from_storage(&read_fb(&dir.join("s_src.fb"))?)?,
        maps_tgt: ShadowMaps::from_storage(&read_fb(&dir.join("s_tgt.fb"))?)?,
        env_src: EnvMap::read(&dir.join("env_src.hdr"))?,
        env_tgt: EnvMap::read(&dir.join("env_tgt.hdr"))?,
        label: read_fb(&dir.join("label.fb"))?,
        meta: BundleMeta::parse(&meta_text, &meta_path)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_round_trip_and_errors() {
        let m = BundleMeta {
            kind: PairKind::SimReal,
            frame: 3,
            seed: 7,
            spp: 64,
            approximate: true,
        };
        assert_eq!(BundleMeta::parse(&m.to_text(), Path::new("meta")).unwrap(), m);
        let err = BundleMeta::parse("kind=sim-sim\nframe=x\n", Path::new("meta"))
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("meta:2:"), "{err}");
        assert!(BundleMeta::parse("kind=sim-sim\n", Path::new("meta")).is_err());
    }
}
