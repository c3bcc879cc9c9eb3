use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::CliError;
use crate::providers::ProviderConfig;
use crate::shift::StatsMode;

pub const ENV_EMBED_URL: &str = "ACT_EMBED_URL";
pub const ENV_CAPTION_URL: &str = "ACT_CAPTION_URL";
pub const ENV_GENERATE_URL: &str = "ACT_GENERATE_URL";
pub const ENV_AUTH: &str = "ACT_AUTH";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    #[default]
    Http,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub dim: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { seed: 0, dim: 64 }
    }
}

/// Contents of a TOML or JSON config file. Every field is optional.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub embedder: Option<EmbedderKind>,
    pub synthetic: Option<SyntheticConfig>,
    pub embed: Option<ProviderConfig>,
    pub caption: Option<ProviderConfig>,
    pub generate: Option<ProviderConfig>,
    pub cache_dir: Option<PathBuf>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub ks: Option<Vec<usize>>,
    pub stats_mode: Option<StatsMode>,
}

impl CliConfig {
    /// `.json` files are parsed as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.extension().is_some_and(|e| e == "json"))
            .map_err(|m| CliError::input(format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        if json {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }
}

/// Values given on the command line; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub synthetic: bool,
    pub seed: Option<u64>,
    pub synthetic_dim: Option<usize>,
    pub embed_url: Option<String>,
    pub caption_url: Option<String>,
    pub generate_url: Option<String>,
    pub auth: Option<String>,
    pub cache_dir: Option<PathBuf>,
}

/// Effective settings after layering flags over environment over file.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub embedder: EmbedderKind,
    pub synthetic: SyntheticConfig,
    pub embed: Option<ProviderConfig>,
    pub caption: Option<ProviderConfig>,
    pub generate: Option<ProviderConfig>,
    pub cache_dir: Option<PathBuf>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub ks: Option<Vec<usize>>,
    pub stats_mode: Option<StatsMode>,
}

fn layer_endpoint(
    base: Option<ProviderConfig>,
    env_url: Option<String>,
    flag_url: Option<String>,
    auth: Option<&String>,
) -> Option<ProviderConfig> {
    let url = flag_url.or(env_url);
    let mut cfg = match (base, url) {
        (Some(mut c), Some(u)) => {
            c.endpoint_url = u;
            Some(c)
        }
        (None, Some(u)) => Some(ProviderConfig::with_endpoint(u)),
        (base, None) => base,
    };
    if let (Some(c), Some(a)) = (cfg.as_mut(), auth) {
        c.auth_header = Some(a.clone());
    }
    cfg
}

pub fn resolve(file: CliConfig, env: impl Fn(&str) -> Option<String>, flags: FlagOverrides) -> Settings {
    let auth = flags.auth.clone().or_else(|| env(ENV_AUTH));
    let mut synthetic = file.synthetic.clone().unwrap_or_default();
    if let Some(seed) = flags.seed {
        synthetic.seed = seed;
    }
    if let Some(dim) = flags.synthetic_dim {
        synthetic.dim = dim;
    }
    let embedder = if flags.synthetic {
        EmbedderKind::Synthetic
    } else {
        file.embedder.unwrap_or(if file.synthetic.is_some() {
            EmbedderKind::Synthetic
        } else {
            EmbedderKind::Http
        })
    };
    Settings {
        embedder,
        synthetic,
        embed: layer_endpoint(file.embed, env(ENV_EMBED_URL), flags.embed_url, auth.as_ref()),
        caption: layer_endpoint(file.caption, env(ENV_CAPTION_URL), flags.caption_url, auth.as_ref()),
        generate: layer_endpoint(file.generate, env(ENV_GENERATE_URL), flags.generate_url, auth.as_ref()),
        cache_dir: flags.cache_dir.or(file.cache_dir),
        k: file.k,
        epsilon: file.epsilon,
        ks: file.ks,
        stats_mode: file.stats_mode,
    }
}
