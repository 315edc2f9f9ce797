//! Run configuration (TOML).
//!
//! ```toml
//! manifest = "data/manifest.json"
//! config = "c03"
//! output = "runs/c03"
//!
//! [model]
//! preset = "reduced"
//!
//! [train]
//! epochs = 30
//! batch_size = 4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{base_dir, resolve};
use crate::model::ModelSpec;
use crate::superwin::ConfigId;
use crate::traineval::TrainConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelPreset {
    #[default]
    Default,
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<ModelPreset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_filters: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_kernel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_window_feature_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tcn_kernel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tcn_filters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tcn_dilations: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tcn_stacks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    /// Subset of fold indices to run; all folds when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_folds: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    /// Directory of preprocessed grids; `grids/` beside the manifest when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_dir: Option<PathBuf>,
    pub config: ConfigId,
    pub output: PathBuf,
    #[serde(default)]
    pub model: ModelOverrides,
    #[serde(default)]
    pub train: TrainOverrides,
}

/// Everything a training run needs, with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub config: ConfigId,
    pub spec: ModelSpec,
    pub train: TrainConfig,
    pub run_folds: Vec<usize>,
    pub manifest: PathBuf,
    pub grid_dir: PathBuf,
    pub output: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let o = &self.model;
        let mut s = match o.preset.unwrap_or_default() {
            ModelPreset::Default => ModelSpec::default(),
            ModelPreset::Reduced => ModelSpec::reduced(),
        };
        if let Some(v) = &o.feature_filters {
            s.feature_filters = v.clone();
        }
        if let Some(v) = o.feature_kernel {
            s.feature_kernel = v;
        }
        if let Some(v) = o.per_window_feature_dim {
            s.per_window_feature_dim = v;
        }
        if let Some(v) = o.tcn_kernel {
            s.tcn.kernel = v;
        }
        if let Some(v) = o.tcn_filters {
            s.tcn.filters = v;
        }
        if let Some(v) = &o.tcn_dilations {
            s.tcn.dilations = v.clone();
        }
        if let Some(v) = o.tcn_stacks {
            s.tcn.stacks = v;
        }
        s.validate()?;
        Ok(s)
    }

    /// Batch size defaults to the configuration's own unless overridden.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let o = &self.train;
        let d = TrainConfig::for_config(self.config);
        let t = TrainConfig {
            epochs: o.epochs.unwrap_or(d.epochs),
            lr: o.lr.unwrap_or(d.lr),
            seed: o.seed.unwrap_or(d.seed),
            batch_size: o.batch_size.unwrap_or(d.batch_size),
            folds: o.folds.unwrap_or(d.folds),
        };
        t.validate()?;
        Ok(t)
    }

    /// Fills defaults and resolves relative paths against `base`.
    pub fn resolve(&self, base: &Path) -> Result<ResolvedRun> {
        let train = self.train_config()?;
        let run_folds = match &self.train.run_folds {
            Some(f) => {
                if f.is_empty() || f.iter().any(|&k| k >= train.folds) {
                    return Err(Error::Config(format!("run_folds {f:?} must index 0..{}", train.folds)));
                }
                f.clone()
            }
            None => (0..train.folds).collect(),
        };
        let manifest = resolve(base, &self.manifest);
        let grid_dir = match &self.grid_dir {
            Some(d) => resolve(base, d),
            None => base_dir(&manifest).join("grids"),
        };
        Ok(ResolvedRun {
            config: self.config,
            spec: self.model_spec()?,
            train,
            run_folds,
            manifest,
            grid_dir,
            output: resolve(base, &self.output),
        })
    }
}

/// Reads a run config; relative paths inside it are relative to its own
/// directory.
pub fn load_run_config(path: &Path) -> Result<(RunConfig, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = RunConfig::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, base_dir(path)))
}
