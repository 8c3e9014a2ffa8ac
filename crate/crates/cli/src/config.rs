//! Optional TOML config file: defaults for global and per-subcommand flags,
//! merged under anything passed explicitly on the command line.

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub threads: Option<usize>,
    pub format: Option<String>,
    pub strict: Option<bool>,
    #[serde(default)]
    pub eval: EvalDefaults,
    #[serde(default)]
    pub filter_undetected: FilterDefaults,
    #[serde(default)]
    pub dedup: DedupDefaults,
    #[serde(default)]
    pub br_loss: BrLossDefaults,
    #[serde(default)]
    pub merge: MergeDefaults,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalDefaults {
    pub mode: Option<String>,
    pub iou_thresh: Option<f64>,
    pub dontcare_thresh: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterDefaults {
    pub iou_thresh: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedupDefaults {
    pub threshold: Option<f64>,
    pub exact: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrLossDefaults {
    pub alpha: Option<f64>,
    pub threshold: Option<f64>,
    pub normalize: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeDefaults {
    pub shuffle_seed: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
    }
}
