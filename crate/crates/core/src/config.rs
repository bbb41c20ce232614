//! Run configuration: one key=value (TOML) file plus overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::corpus::{Format, SplitSpec};
use crate::distinguish::{MiningParams, TokenChannel};
use crate::error::{Error, Result};
use crate::metrics::EmptyUnion;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub p_threshold: f64,
    pub theta: f64,
    pub min_support: usize,
    pub channel: TokenChannel,
    /// Types with fewer cases than this in any split are merged into `others`.
    pub group_below: Option<usize>,
    pub hamming_empty: EmptyUnion,
    pub dataset: Option<PathBuf>,
    pub workdir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mining = MiningParams::default();
        Self {
            seed: 0,
            ratios: [0.8, 0.1, 0.1],
            p_threshold: 0.05,
            theta: mining.theta,
            min_support: mining.min_support,
            channel: mining.channel,
            group_below: None,
            hamming_empty: EmptyUnion::One,
            dataset: None,
            workdir: PathBuf::from("run"),
        }
    }
}

impl RunConfig {
    /// Parses a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(d) = &cfg.dataset {
            cfg.dataset = Some(base.join(d));
        }
        cfg.workdir = base.join(&cfg.workdir);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.split_spec()?;
        if !(self.p_threshold > 0.0) || !self.p_threshold.is_finite() {
            return Err(Error::Config(format!(
                "p_threshold must be positive, got {}",
                self.p_threshold
            )));
        }
        self.mining().validate()?;
        if self.group_below == Some(0) {
            return Err(Error::Config("group_below must be >= 1".into()));
        }
        Ok(())
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(self.ratios, self.seed)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn mining(&self) -> MiningParams {
        MiningParams {
            theta: self.theta,
            min_support: self.min_support,
            channel: self.channel,
        }
    }

    pub fn dataset_format(&self) -> Option<Format> {
        self.dataset.as_deref().map(Format::from_path)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.workdir.join(name)
    }
}
