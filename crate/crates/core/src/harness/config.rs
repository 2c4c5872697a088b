use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsaga::Variant;

/// Directory that relative dataset paths are resolved against.
pub const DATA_ROOT_ENV: &str = "TSAGA_DATA_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Synthetic,
    Idx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionKind {
    Iid,
    Chi,
}

/// Flat experiment description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub rounds: usize,
    pub devices: usize,
    pub samples_per_device: usize,
    pub eta: f64,
    pub local_steps: usize,
    /// Sub-channels as a fraction of the model dimension.
    pub channel_ratio: f64,
    /// Retained entries as a fraction of the model dimension.
    pub sparsity_ratio: f64,
    pub p_bar: f64,
    pub sigma_e: f64,
    pub i_max: usize,
    pub tol: f64,
    pub damping: f64,
    pub t0_window: usize,
    pub em: bool,
    pub em_warmup: usize,
    pub epsilon: f64,
    pub variant: Variant,

    pub dataset: DatasetKind,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub synthetic_features: usize,
    pub synthetic_classes: usize,
    pub synthetic_test: usize,
    pub synthetic_separation: f64,
    pub partition: PartitionKind,
    pub chi: usize,

    pub metric_every: usize,
    pub trace: bool,
    pub out_dir: PathBuf,

    pub se_lambda: f64,
    pub se_p01: f64,
    pub se_beta: f64,
    pub se_noise: f64,
    pub se_rounds: usize,
    pub se_population: usize,
    pub se_samples: usize,

    pub bound_dim: usize,
    pub bound_devices: usize,
    pub bound_c: f64,
    pub bound_l: f64,
    pub bound_seeds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            rounds: 100,
            devices: 25,
            samples_per_device: 1000,
            eta: 0.01,
            local_steps: 1,
            channel_ratio: 0.1,
            sparsity_ratio: 0.2,
            p_bar: 500.0,
            sigma_e: 1.0,
            i_max: 25,
            tol: 1e-4,
            damping: 1.0,
            t0_window: 5,
            em: true,
            em_warmup: 10,
            epsilon: 1e-7,
            variant: Variant::TsaGa,
            dataset: DatasetKind::Synthetic,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            synthetic_features: 784,
            synthetic_classes: 10,
            synthetic_test: 10_000,
            synthetic_separation: 3.0,
            partition: PartitionKind::Iid,
            chi: 2,
            metric_every: 1,
            trace: false,
            out_dir: PathBuf::from("out"),
            se_lambda: 0.1,
            se_p01: 0.01,
            se_beta: 0.05,
            se_noise: 0.01,
            se_rounds: 5,
            se_population: 100_000,
            se_samples: 100_000,
            bound_dim: 512,
            bound_devices: 5,
            bound_c: 1.0,
            bound_l: 4.0,
            bound_seeds: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.rounds == 0 || self.devices == 0 || self.samples_per_device == 0 || self.local_steps == 0 {
            return bad("rounds, devices, samples_per_device and local_steps must be positive");
        }
        if !(self.channel_ratio > 0.0 && self.channel_ratio <= 1.0) {
            return bad("channel_ratio must lie in (0, 1]");
        }
        if !(self.sparsity_ratio > 0.0 && self.sparsity_ratio <= 1.0) {
            return bad("sparsity_ratio must lie in (0, 1]");
        }
        if !(self.p_bar > 0.0) || !(self.eta > 0.0) || !(self.sigma_e >= 0.0) {
            return bad("p_bar and eta must be positive and sigma_e nonnegative");
        }
        if self.i_max == 0 || !(self.damping > 0.0 && self.damping <= 1.0) || !(self.tol >= 0.0) {
            return bad("i_max >= 1, damping in (0, 1] and tol >= 0 are required");
        }
        if self.em && self.t0_window < 2 {
            return bad("t0_window must be at least 2 when EM is enabled");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return bad("epsilon must lie in (0, 1e-3]");
        }
        if self.partition == PartitionKind::Chi && self.chi == 0 {
            return bad("chi must be positive for a chi partition");
        }
        if self.metric_every == 0 {
            return bad("metric_every must be positive");
        }
        if self.dataset == DatasetKind::Idx {
            for p in self.idx_paths()? {
                if !p.is_file() {
                    return Err(Error::Config(format!("dataset file {} does not exist", p.display())));
                }
            }
        } else if self.synthetic_features == 0 || self.synthetic_classes < 2 || self.synthetic_test == 0 {
            return bad("synthetic data needs features, >= 2 classes and a test set");
        }
        Ok(())
    }

    /// Training and test IDX paths, resolved against the data root.
    pub fn idx_paths(&self) -> Result<[PathBuf; 4]> {
        let root = std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from);
        let resolve = |p: &Option<PathBuf>, name: &str| -> Result<PathBuf> {
            let p = p
                .as_ref()
                .ok_or_else(|| Error::Config(format!("{name} is required for an idx dataset")))?;
            Ok(match (&root, p.is_relative()) {
                (Some(r), true) => r.join(p),
                _ => p.clone(),
            })
        };
        Ok([
            resolve(&self.train_images, "train_images")?,
            resolve(&self.train_labels, "train_labels")?,
            resolve(&self.test_images, "test_images")?,
            resolve(&self.test_labels, "test_labels")?,
        ])
    }

    /// `(s, k)` for a model of dimension `n`.
    pub fn channel_dims(&self, n: usize) -> (usize, usize) {
        let s = ((self.channel_ratio * n as f64).round() as usize).clamp(1, n);
        let k = ((self.sparsity_ratio * n as f64).round() as usize).clamp(1, n);
        (s, k)
    }
}
