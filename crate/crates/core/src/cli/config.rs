//! Run configuration file.
//!
//! TOML with optional sections; every key falls back to its built-in
//! default and unknown keys are rejected:
//!
//! ```toml
//! [train]
//! epochs = 500
//! learning_rate = 0.0005
//! beta = 20.0
//! c = 1.0
//! batch_size = 128
//! seed = 0
//!
//! [data]
//! dir = "/data/ims/2nd_test"   # or: synthetic = true
//! channels = 4
//! window = 256
//! train_fraction = 0.75
//! train_files_per_class = 10
//! synthetic_files = 100
//! synthetic_windows_per_file = 20
//!
//! [labels]
//! normal = [100, 149]
//! degraded = [711, 900]
//! severe = [972, 981]
//! channel = 0
//!
//! [health]
//! metric = "euclidean"          # manhattan, minkowski3
//! aggregation = "mean"          # median
//!
//! [baselines]
//! knn_k = 5
//! kmeans_k = 2
//! kmeans_max_iters = 100
//!
//! [sweep]
//! snr_db = [-2.0, 1.0, 4.0, 7.0, 10.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::synth::SyntheticRun;
use crate::data::LabelPlan;
use crate::error::{Error, Result};
use crate::health::{Aggregation, Metric};
use crate::vae::{TrainConfig, WINDOW_LEN};

/// Environment variable naming the default data directory.
pub const DATA_ENV: &str = "LATENT_HEALTH_DATA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub synthetic: bool,
    pub channels: usize,
    pub window: usize,
    pub train_fraction: f64,
    pub train_files_per_class: usize,
    pub synthetic_files: usize,
    pub synthetic_windows_per_file: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dir: None,
            synthetic: false,
            channels: 4,
            window: WINDOW_LEN,
            train_fraction: 0.75,
            train_files_per_class: 10,
            synthetic_files: 100,
            synthetic_windows_per_file: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HealthSection {
    pub metric: Metric,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub knn_k: usize,
    pub kmeans_k: usize,
    pub kmeans_max_iters: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            knn_k: 5,
            kmeans_k: 2,
            kmeans_max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub snr_db: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            snr_db: vec![-2.0, 1.0, 4.0, 7.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub train: TrainConfig,
    pub data: DataSection,
    pub labels: LabelPlan,
    pub health: HealthSection,
    pub baselines: BaselineSection,
    pub sweep: SweepSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn synthetic_run(&self) -> SyntheticRun {
        SyntheticRun {
            files: self.data.synthetic_files,
            windows_per_file: self.data.synthetic_windows_per_file,
            seed: self.train.seed,
        }
    }

    /// Fills in the data source from the environment when none is set and
    /// pins the single channel and label plan of a synthetic run.
    pub fn resolve_source(&mut self, env_dir: Option<PathBuf>) -> Result<()> {
        if self.data.synthetic {
            self.data.dir = None;
            self.data.channels = 1;
            self.labels = self.synthetic_run().label_plan()?;
        } else if self.data.dir.is_none() {
            self.data.dir = env_dir;
            if self.data.dir.is_none() {
                return Err(Error::InvalidConfig(format!(
                    "no data source: pass --data DIR, --synthetic, or set {DATA_ENV}"
                )));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.labels.validate()?;
        let d = &self.data;
        if d.window != WINDOW_LEN {
            return Err(Error::InvalidConfig(format!(
                "window must be {WINDOW_LEN} for the standard network, got {}",
                d.window
            )));
        }
        if d.channels == 0 || self.labels.channel >= d.channels {
            return Err(Error::InvalidConfig(format!(
                "channel {} with {} channels per file",
                self.labels.channel, d.channels
            )));
        }
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("train_fraction {} outside (0, 1)", d.train_fraction)));
        }
        if d.train_files_per_class == 0 {
            return Err(Error::InvalidConfig("train_files_per_class must be >= 1".into()));
        }
        if self.baselines.knn_k == 0 || self.baselines.kmeans_k == 0 || self.baselines.kmeans_max_iters == 0 {
            return Err(Error::InvalidConfig("baseline k and iteration counts must be >= 1".into()));
        }
        if self.sweep.snr_db.is_empty() || self.sweep.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("sweep needs finite SNR levels".into()));
        }
        if d.synthetic {
            self.synthetic_run().validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = Config::from_toml("[train]\nepochs = 7\n[labels]\nnormal = [1, 2]\n").unwrap();
        assert_eq!(c.train.epochs, 7);
        assert_eq!(c.train.learning_rate, 5e-4);
        assert_eq!(c.labels.normal.start, 1);
        assert_eq!(c.labels.degraded, LabelPlan::default().degraded);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(Config::from_toml("[train]\nepoch = 3\n"), Err(Error::InvalidConfig(_))));
        assert!(Config::from_toml("[nope]\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = Config::default();
        c.data.dir = Some("/tmp/x".into());
        c.health.metric = Metric::Minkowski3;
        c.train.learning_rate = 1.0 / 3.0;
        let text = c.to_toml().unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn source_resolution() {
        let mut c = Config::default();
        assert!(matches!(c.resolve_source(None), Err(Error::InvalidConfig(_))));
        c.resolve_source(Some("/data".into())).unwrap();
        assert_eq!(c.data.dir.as_deref(), Some(Path::new("/data")));

        let mut s = Config::default();
        s.data.synthetic = true;
        s.resolve_source(Some("/data".into())).unwrap();
        assert_eq!(s.data.dir, None);
        assert_eq!(s.data.channels, 1);
        assert_eq!(s.labels, s.synthetic_run().label_plan().unwrap());
        s.validate().unwrap();
    }

    #[test]
    fn validation() {
        let mut c = Config::default();
        c.data.window = 128;
        assert!(c.validate().is_err());
        let mut c = Config::default();
        c.labels.channel = 4;
        assert!(c.validate().is_err());
        let mut c = Config::default();
        c.sweep.snr_db.clear();
        assert!(c.validate().is_err());
    }
}
