use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{EncoderConfig, FilterOffsets, StcmConfig};

/// Architecture hyperparameters shared by all five sub-networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Bins per sub-band (low, mid and high are all this wide).
    pub band_bins: usize,
    pub encoder: EncoderConfig,
    pub stcm: StcmConfig,
    /// Multi-frame filter length `k` of DN-Net and DR-Net.
    pub filter_taps: usize,
    pub filter_offsets: FilterOffsets,
    /// Whether the low band gets the complex refinement network.
    pub use_sr: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::standard()
    }
}

impl ModelConfig {
    /// Full-size configuration: 64 channels, 3 × 6 S-TCMs.
    pub fn standard() -> Self {
        Self {
            band_bins: 161,
            encoder: EncoderConfig::default(),
            stcm: StcmConfig::default(),
            filter_taps: 5,
            filter_offsets: FilterOffsets::CurrentAndPast,
            use_sr: true,
        }
    }

    /// Small configuration for tests and desk-scale runs.
    pub fn tiny() -> Self {
        let mut cfg = Self::standard();
        cfg.encoder.channels = 16;
        cfg.stcm.groups = 1;
        cfg.stcm.bottleneck_channels = 32;
        cfg
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

    pub fn latent_bins(&self) -> Result<usize> {
        Ok(*self.encoder.freq_sizes(self.band_bins)?.last().unwrap())
    }

    /// Width of the flattened latent sequence seen by the S-TCMs.
    pub fn sequence_channels(&self) -> Result<usize> {
        Ok(self.encoder.channels * self.latent_bins()?)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.stcm.validate()?;
        self.latent_bins()?;
        if self.filter_taps == 0 {
            return Err(Error::Config("filter_taps must be at least 1".into()));
        }
        Ok(())
    }
}
