use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub command_line: Vec<String>,
    /// Effective configuration after flags, file and defaults are merged.
    pub config: serde_json::Value,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub status: String,
    pub error: Option<String>,
    pub wall_time_seconds: f64,
}

pub fn config_hash(config: &serde_json::Value) -> String {
    let digest = Sha256::digest(config.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `<dir>/manifest.json` for directory outputs, `<file>.manifest.json`
/// otherwise.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = serde_json::json!({"spp": 4, "seed": 1});
        let b = serde_json::json!({"spp": 4, "seed": 2});
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn manifest_locations() {
        assert_eq!(
            manifest_path(Path::new("out/r.fb"), false),
            Path::new("out/r.fb.manifest.json")
        );
        assert_eq!(
            manifest_path(Path::new("out/sim"), true),
            Path::new("out/sim/manifest.json")
        );
    }
}
