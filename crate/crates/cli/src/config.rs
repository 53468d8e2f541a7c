//! Optional TOML run configuration. Explicit flags override it.

use std::path::{Path, PathBuf};

use anyhow::Context;
use morph_core::augmenter::AugmentConfig;
use morph_core::resolver::ResolverConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub lexicon: Option<PathBuf>,
    pub resolver: Option<ResolverConfig>,
    pub augment: Option<AugmentConfig>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub serve: ServeSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub fp_on_bad_edit: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub file: Option<PathBuf>,
    pub url: Option<String>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<u32>,
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    pub host: Option<String>,
    pub port: Option<u16>,
    pub store: Option<PathBuf>,
    pub readonly: Option<bool>,
    pub token: Option<String>,
    pub ui_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Hex SHA-256 of the canonical JSON form of `value`.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
