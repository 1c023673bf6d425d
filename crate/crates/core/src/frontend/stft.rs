use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{ComplexSpectrogram, FrontendConfig};
use crate::error::{Error, Result};

/// Floor on the squared-window overlap-add denominator.
const OLA_FLOOR: f64 = 1e-10;

/// Planned STFT analysis/synthesis pair for one [`FrontendConfig`].
///
/// Framing: the waveform is left-padded with `win − hop` zeros and
/// right-padded to a whole number of hops, so frame `t` covers original
/// samples `[t·hop − (win − hop), (t + 1)·hop)` and never looks past the
/// end of its own hop. Spectra are scaled by `2 / Σw`, which makes a
/// unit-amplitude bin-centred sinusoid read magnitude 1 at any sample rate;
/// the 16 kHz and 48 kHz front-ends therefore agree on low-band levels.
pub struct Stft {
    cfg: FrontendConfig,
    window: Vec<f64>,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl Stft {
    pub fn new(cfg: &FrontendConfig) -> Result<Self> {
        cfg.validate()?;
        let window = cfg.window.coefficients(cfg.win_len_samples);
        let scale = 2.0 / window.iter().sum::<f64>();
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg: cfg.clone(),
            window,
            scale,
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn analyze<S: Copy + Into<f64>>(&self, waveform: &[S]) -> Result<ComplexSpectrogram> {
        if waveform.is_empty() {
            return Err(Error::invalid("empty waveform"));
        }
        let samples: Vec<f64> = waveform.iter().map(|&s| s.into()).collect();
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        let hop = self.cfg.hop_samples;
        let win = self.cfg.win_len_samples;
        let n_fft = self.cfg.fft_size;
        let bins = self.cfg.num_bins();
        let frames = self.cfg.num_frames(samples.len());
        let left = self.cfg.left_pad();

        let mut out = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
        for t in 0..frames {
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            // padded index p maps to original sample p − left
            let start = t * hop;
            for (i, (slot, &w)) in buf.iter_mut().zip(&self.window).enumerate().take(win) {
                let p = start + i;
                if p >= left {
                    if let Some(&x) = samples.get(p - left) {
                        *slot = Complex64::new(x * w, 0.0);
                    }
                }
            }
            self.forward.process(&mut buf);
            out.extend(buf[..bins].iter().map(|c| c * self.scale));
        }
        ComplexSpectrogram::from_values(frames, bins, out)
    }

    /// Weighted overlap-add synthesis. Returns `(frames − 1) · hop` samples
    /// aligned with the original waveform, the span covered by two windows;
    /// callers trim to the source length.
    pub fn synthesize(&self, spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
        let bins = self.cfg.num_bins();
        if spec.bins() != bins {
            return Err(Error::shape(format!(
                "spectrogram has {} bins, front-end expects {bins}",
                spec.bins()
            )));
        }
        let hop = self.cfg.hop_samples;
        let win = self.cfg.win_len_samples;
        let n_fft = self.cfg.fft_size;
        let frames = spec.frames();
        let padded_len = frames * hop + self.cfg.left_pad();
        let mut acc = vec![0.0; padded_len];
        let mut norm = vec![0.0; padded_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
        let inv = 1.0 / (self.scale * n_fft as f64);
        for t in 0..frames {
            let frame = spec.frame(t);
            buf[..bins].copy_from_slice(frame);
            // Hermitian completion; DC and Nyquist imaginary parts are dropped
            // by taking the real part of the inverse transform.
            for k in bins..n_fft {
                buf[k] = frame[n_fft - k].conj();
            }
            self.inverse.process(&mut buf);
            let start = t * hop;
            for (i, &w) in self.window.iter().enumerate().take(win) {
                acc[start + i] += buf[i].re * inv * w;
                norm[start + i] += w * w;
            }
        }
        let left = self.cfg.left_pad();
        let end = left + frames.saturating_sub(1) * hop;
        Ok(acc[left..end]
            .iter()
            .zip(&norm[left..end])
            .map(|(&a, &n)| a / n.max(OLA_FLOOR))
            .collect())
    }
}

/// One-shot STFT with the framing described on [`Stft`].
pub fn stft<S: Copy + Into<f64>>(waveform: &[S], cfg: &FrontendConfig) -> Result<ComplexSpectrogram> {
    Stft::new(cfg)?.analyze(waveform)
}

/// One-shot inverse STFT; output length is `(frames − 1) · hop`.
pub fn istft(spec: &ComplexSpectrogram, cfg: &FrontendConfig) -> Result<Vec<f64>> {
    Stft::new(cfg)?.synthesize(spec)
}
