//! Pipeline configuration, read from TOML with dotted section keys:
//!
//! ```toml
//! input = "corpus"
//! output = "out"
//! jobs = 4
//! seed = 7
//! selection.pet_max = 5.0
//! metrics.mrct.headway_offset = 8.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assess::AnomalyConfig;
use crate::enhance::EnhanceConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::selection::SelectionConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub pet_bin: f64,
    pub psd_bin: f64,
    pub mrct_bin: f64,
    pub decel_bin: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { pet_bin: 0.5, psd_bin: 0.5, mrct_bin: 1.0, decel_bin: 0.5 }
    }
}

/// Synthetic corpus used when no input is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthCorpusConfig {
    pub scenarios: usize,
    pub speed_noise_sigma: f64,
    pub zero_fill_probability: f64,
    pub boundary_corruption: bool,
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        SynthCorpusConfig { scenarios: 50, speed_noise_sigma: 0.0, zero_fill_probability: 0.0, boundary_corruption: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub jobs: usize,
    pub seed: u64,
    pub selection: SelectionConfig,
    pub enhance: EnhanceConfig,
    pub anomaly: AnomalyConfig,
    pub metrics: MetricsConfig,
    pub report: ReportConfig,
    pub synth: SynthCorpusConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            output: None,
            jobs: 1,
            seed: 0,
            selection: SelectionConfig::default(),
            enhance: EnhanceConfig::default(),
            anomaly: AnomalyConfig::default(),
            metrics: MetricsConfig::default(),
            report: ReportConfig::default(),
            synth: SynthCorpusConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        if let (Some(i), Some(o)) = (&self.input, &self.output) {
            if i == o {
                return Err(Error::InvalidConfig("input and output must be different paths".into()));
            }
        }
        let bins = [self.report.pet_bin, self.report.psd_bin, self.report.mrct_bin, self.report.decel_bin];
        if bins.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidConfig("report bin widths must be positive".into()));
        }
        let s = &self.synth;
        if !(s.speed_noise_sigma >= 0.0 && (0.0..=1.0).contains(&s.zero_fill_probability)) {
            return Err(Error::InvalidConfig("synth noise settings out of range".into()));
        }
        self.selection.validate()?;
        self.enhance.validate()?;
        self.anomaly.validate()?;
        self.metrics.validate()
    }
}
