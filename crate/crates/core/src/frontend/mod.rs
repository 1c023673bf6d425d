//! Spectral front-end: STFT analysis/synthesis, magnitude power compression
//! and the three-band split/fusion used by the band networks.

mod bands;
mod compress;
mod spectrogram;
mod stft;

pub use bands::{fuse_bands, split_bands, BandLayout, BandRange, OverlapPolicy};
pub use compress::{compress_magnitude, decompress_magnitude};
pub use spectrogram::{ComplexSpectrogram, PolarSpectrogram};
pub use stft::{istft, stft, Stft};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
}

impl WindowKind {
    /// Periodic window of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..len)
                .map(|n| {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontendConfig {
    pub sample_rate_hz: u32,
    pub win_len_samples: usize,
    pub hop_samples: usize,
    pub fft_size: usize,
    pub window: WindowKind,
    pub compression_beta: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self::full_band()
    }
}

impl FrontendConfig {
    /// 48 kHz, 20 ms Hann window, 50% overlap, 960-point FFT (481 bins).
    pub fn full_band() -> Self {
        Self {
            sample_rate_hz: 48_000,
            win_len_samples: 960,
            hop_samples: 480,
            fft_size: 960,
            window: WindowKind::Hann,
            compression_beta: 0.5,
        }
    }

    /// 16 kHz front-end used for low-band pretraining: 20 ms / 320-point FFT
    /// giving the same 161 bins (50 Hz spacing) as the full-band low band.
    pub fn wide_band() -> Self {
        Self {
            sample_rate_hz: 16_000,
            win_len_samples: 320,
            hop_samples: 160,
            fft_size: 320,
            window: WindowKind::Hann,
            compression_beta: 0.5,
        }
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames produced for a waveform of `len` samples: `ceil(len / hop) + 1`.
    /// The trailing frame gives the last hop a second window, so overlap-add
    /// never divides by a vanishing window weight.
    pub fn num_frames(&self, len: usize) -> usize {
        len.div_ceil(self.hop_samples) + 1
    }

    /// Zeros prepended before the first frame.
    pub fn left_pad(&self) -> usize {
        self.win_len_samples - self.hop_samples
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / self.fft_size as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if self.win_len_samples < 2 || self.win_len_samples % 2 != 0 {
            return Err(Error::Config(format!(
                "window length {} must be even and at least 2",
                self.win_len_samples
            )));
        }
        if self.hop_samples * 2 != self.win_len_samples {
            return Err(Error::Config(format!(
                "hop {} must be half the window length {}",
                self.hop_samples, self.win_len_samples
            )));
        }
        if self.fft_size < self.win_len_samples {
            return Err(Error::Config(format!(
                "FFT size {} is shorter than the window {}",
                self.fft_size, self.win_len_samples
            )));
        }
        if !(self.compression_beta > 0.0 && self.compression_beta <= 1.0) {
            return Err(Error::Config(format!(
                "compression beta {} outside (0, 1]",
                self.compression_beta
            )));
        }
        Ok(())
    }
}
