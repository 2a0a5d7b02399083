//! Run configuration shared by every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{SyntheticSpec, DEFAULT_TEST_FRACTION};
use crate::error::{Error, Result};
use crate::model::{BaselineKind, ModelConfig};
use crate::train::{BenchConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Raw flow CSV read by `preprocess`.
    pub csv: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub test_fraction: f64,
    /// Preprocessed datasets used by `train`, `eval` and `bench`. When both
    /// are absent these commands generate the `[synth]` dataset instead.
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Checkpoint read by `eval`.
    pub checkpoint: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            csv: None,
            schema: None,
            test_fraction: DEFAULT_TEST_FRACTION,
            train: None,
            test: None,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthPreset {
    /// `counts` classes named class0.. with derived means.
    Separated,
    /// Nine TON_IoT attack classes at 1/10 of their published counts.
    TonIotScaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub preset: SynthPreset,
    pub n_features: usize,
    pub counts: Vec<usize>,
    pub margin: f64,
    pub spread: f64,
    /// Extra normal-traffic rows written to the CSV only.
    pub normal_rows: usize,
    pub seed: u64,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            preset: SynthPreset::Separated,
            n_features: 16,
            counts: vec![2000; 5],
            margin: 8.0,
            spread: 1.0,
            normal_rows: 500,
            seed: 42,
        }
    }
}

impl SynthSection {
    pub fn spec(&self) -> SyntheticSpec {
        let mut spec = match self.preset {
            SynthPreset::Separated => {
                SyntheticSpec::separated(self.n_features, &self.counts, self.margin, self.seed)
            }
            SynthPreset::TonIotScaled => {
                let mut s = SyntheticSpec::ton_iot_scaled(self.n_features, self.seed);
                s.margin = self.margin;
                s
            }
        };
        spec.spread = self.spread;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub seeds: Vec<u64>,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

/// Top-level TOML document. `n_features` and `n_classes` in `[model]` are
/// filled from the data when left at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, copied into every section's seed.
    pub seed: Option<u64>,
    pub model_kind: BaselineKind,
    pub data: DataSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub bench: BenchConfig,
    pub synth: SynthSection,
    pub gradcheck: GradcheckSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            model_kind: BaselineKind::HybridQrnn,
            data: DataSection::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            bench: BenchConfig::default(),
            synth: SynthSection::default(),
            gradcheck: GradcheckSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::from_toml(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Apply the global seed and make every path absolute so the echoed
    /// config reproduces the run from any directory.
    pub fn materialize(&mut self) -> Result<()> {
        if let Some(seed) = self.seed {
            self.model.seed = seed;
            self.train.seed = seed;
            self.synth.seed = seed;
        }
        let d = &mut self.data;
        for p in [
            &mut d.csv,
            &mut d.schema,
            &mut d.train,
            &mut d.test,
            &mut d.checkpoint,
        ]
        .into_iter()
        .flatten()
        {
            *p = std::path::absolute(&*p)?;
        }
        Ok(())
    }

    /// Seed used for splits and run-directory names.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.train.seed)
    }
}
