//! Run configuration (TOML). A file names a `preset` (`standard` or `tiny`)
//! and overrides any subset of its fields; tables are merged recursively.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SynthesisConfig;
use crate::error::{Error, Result};
use crate::frontend::{BandLayout, FrontendConfig};
use crate::model::ModelConfig;
use crate::objectives::LossConfig;

/// Environment variable consulted for the config path when none is given.
pub const CONFIG_ENV: &str = "DMFNET_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Learning rate of the three low-band stages.
    pub lr_low_band: f64,
    /// Learning rate of the joint mid/high stage.
    pub lr_full_band: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr_low_band: 1e-3,
            lr_full_band: 5e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_steps: usize,
    /// Validations without improvement before a stage stops early.
    pub patience: usize,
    pub validate_every: usize,
    /// Global gradient-norm limit.
    pub grad_clip: f64,
    /// Master seed; initialization, shuffling and validation crops derive
    /// from it.
    pub seed: u64,
    pub batch_size: usize,
    pub crop_seconds: f64,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_steps: 5000,
            patience: 5,
            validate_every: 100,
            grad_clip: 5.0,
            seed: 0,
            batch_size: 16,
            crop_seconds: 3.0,
            log_every: 10,
        }
    }
}

/// Seeds derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub init: u64,
    pub shuffle: u64,
    pub valid: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seeds {
    pub fn from_master(seed: u64) -> Self {
        Self {
            init: splitmix(seed),
            shuffle: splitmix(seed ^ 0x1),
            valid: splitmix(seed ^ 0x2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmfConfig {
    pub preset: String,
    /// 48 kHz analysis used by the full pipeline.
    pub frontend: FrontendConfig,
    /// 16 kHz analysis used for low-band pretraining.
    pub lf_frontend: FrontendConfig,
    pub bands: BandLayout,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub train: TrainConfig,
    pub data: SynthesisConfig,
}

impl Default for DmfConfig {
    fn default() -> Self {
        Self::standard()
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl DmfConfig {
    pub fn standard() -> Self {
        Self {
            preset: "standard".into(),
            frontend: FrontendConfig::full_band(),
            lf_frontend: FrontendConfig::wide_band(),
            bands: BandLayout::full_band(),
            model: ModelConfig::standard(),
            loss: LossConfig::default(),
            optimizer: OptimizerConfig::default(),
            train: TrainConfig::default(),
            data: SynthesisConfig::default(),
        }
    }

    /// Reduced widths and a short schedule for tests and quick runs.
    pub fn tiny() -> Self {
        Self {
            preset: "tiny".into(),
            model: ModelConfig::tiny(),
            train: TrainConfig {
                max_steps: 200,
                validate_every: 50,
                batch_size: 3,
                crop_seconds: 1.0,
                ..TrainConfig::default()
            },
            optimizer: OptimizerConfig {
                lr_low_band: 3e-3,
                lr_full_band: 1.5e-3,
                ..OptimizerConfig::default()
            },
            ..Self::standard()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "standard" => Ok(Self::standard()),
            "tiny" => Ok(Self::tiny()),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected `standard` or `tiny`)"
            ))),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Value = toml::from_str(text)?;
        let preset = user
            .get("preset")
            .and_then(|v| v.as_str())
            .unwrap_or("standard")
            .to_string();
        let base = Self::preset(&preset)?;
        let mut value = toml::Value::try_from(&base)
            .map_err(|e| Error::Config(format!("cannot serialize preset: {e}")))?;
        merge(&mut value, user);
        let cfg: Self = value.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Explicit path, else `$DMFNET_CONFIG`, else the standard preset.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Self::load(p),
                None => Ok(Self::standard()),
            },
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::from_master(self.train.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.frontend.validate()?;
        self.lf_frontend.validate()?;
        self.bands.validate(self.frontend.num_bins())?;
        self.model.validate()?;
        self.loss.validate()?;
        if self.lf_frontend.num_bins() != self.model.band_bins {
            return Err(Error::Config(format!(
                "low-band front-end gives {} bins, model expects {}",
                self.lf_frontend.num_bins(),
                self.model.band_bins
            )));
        }
        if self.bands.bands().iter().any(|b| b.len() != self.model.band_bins) {
            return Err(Error::Config(format!(
                "every band must have {} bins",
                self.model.band_bins
            )));
        }
        if (self.frontend.compression_beta - self.lf_frontend.compression_beta).abs() > 0.0 {
            return Err(Error::Config("both front-ends must share compression_beta".into()));
        }
        let o = &self.optimizer;
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return Err(Error::Config("optimizer betas must lie in (0, 1)".into()));
        }
        let t = &self.train;
        if t.batch_size == 0 || t.crop_seconds <= 0.0 || t.validate_every == 0 {
            return Err(Error::Config(
                "batch_size, crop_seconds and validate_every must be positive".into(),
            ));
        }
        Ok(())
    }
}
