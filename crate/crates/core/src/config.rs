//! Declarative run configuration, read from TOML.
//!
//! Every section is optional and falls back to the library defaults; unknown
//! keys are rejected. A resolved configuration is echoed into each run's
//! manifest, which is itself a valid configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Property;
use crate::error::{Error, Result};
use crate::model::{PretrainConfig, FINETUNE_HEAD_WIDTHS};
use crate::pipeline::{SweepSettings, TrainSettings};
use crate::synth::{OracleConfig, SamplingPlan};

/// Pre-training grid: the cross product of the width lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainGrid {
    pub branch_widths: Vec<usize>,
    pub blocks_per_branch: Vec<usize>,
    pub head_widths: Vec<usize>,
    /// Template for everything the grid does not vary.
    pub base: PretrainConfig,
}

impl Default for PretrainGrid {
    fn default() -> Self {
        Self {
            branch_widths: vec![100],
            blocks_per_branch: vec![1],
            head_widths: vec![50],
            base: PretrainConfig::new(Property::Density),
        }
    }
}

impl PretrainGrid {
    /// The three width lists searched by the full hyperparameter grid.
    pub fn full() -> Self {
        let full = PretrainConfig::full_grid(Property::Density);
        let uniq = |f: fn(&PretrainConfig) -> usize| {
            let mut v: Vec<usize> = full.iter().map(f).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        Self {
            branch_widths: uniq(|c| c.branch_width),
            blocks_per_branch: uniq(|c| c.blocks_per_branch),
            head_widths: uniq(|c| c.head_width),
            base: PretrainConfig::new(Property::Density),
        }
    }

    pub fn configs(&self, property: Property) -> Vec<PretrainConfig> {
        let mut out = Vec::new();
        for &w in &self.branch_widths {
            for &b in &self.blocks_per_branch {
                for &h in &self.head_widths {
                    let mut c = self.base.with_widths(w, b, h);
                    c.property = property;
                    out.push(c);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneGrid {
    pub head_widths: Vec<usize>,
    pub targets: Vec<Property>,
}

impl Default for FinetuneGrid {
    fn default() -> Self {
        Self {
            head_widths: FINETUNE_HEAD_WIDTHS.to_vec(),
            targets: Property::ALL.to_vec(),
        }
    }
}

/// Input and output locations. Command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Directory holding `ions.csv`, `pretrain.csv` and `experimental.csv`.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Base seed; it overrides the oracle and training seeds when resolved.
    pub seed: u64,
    /// Subcommand the file is meant for. Informational in input files.
    pub command: Option<String>,
    pub paths: Paths,
    pub oracle: OracleConfig,
    pub plan: SamplingPlan,
    pub train: TrainSettings,
    pub pretrain: PretrainGrid,
    pub finetune: FinetuneGrid,
    pub sweep: SweepSettings,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
    }

    /// Applies `seed` everywhere a seed is consumed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.oracle.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.oracle.validate()?;
        self.plan.validate()?;
        self.train.validate()?;
        for c in self.pretrain.configs(Property::Density) {
            c.validate()?;
        }
        if self.pretrain.configs(Property::Density).is_empty() {
            return Err(Error::Config("pre-training grid is empty".into()));
        }
        if self.finetune.head_widths.is_empty() {
            return Err(Error::Config("fine-tuning grid is empty".into()));
        }
        Ok(())
    }
}
