use super::dmf::DmfModel;
use super::features::{band_input, compressed_magnitude, decompress_ri, item_values};
use crate::error::{Error, Result};
use crate::frontend::{
    decompress_magnitude, fuse_bands, split_bands, BandLayout, ComplexSpectrogram, FrontendConfig,
    PolarSpectrogram, Stft,
};

/// Per-band enhanced spectra in the linear (uncompressed) domain. Mid and
/// high keep their noisy phase.
#[derive(Debug, Clone)]
pub struct EnhancedBands {
    pub low: ComplexSpectrogram,
    pub mid: PolarSpectrogram,
    pub high: PolarSpectrogram,
    pub mid_gain: Vec<f64>,
    pub high_gain: Vec<f64>,
}

/// Waveform-to-waveform inference with a fixed model and front-end.
pub struct Enhancer<'a> {
    model: &'a DmfModel,
    frontend: FrontendConfig,
    layout: BandLayout,
    stft: Stft,
}

impl<'a> Enhancer<'a> {
    pub fn new(model: &'a DmfModel, frontend: &FrontendConfig, layout: &BandLayout) -> Result<Self> {
        frontend.validate()?;
        layout.validate(frontend.num_bins())?;
        let want = model.config().band_bins;
        if layout.bands().iter().any(|b| b.len() != want) {
            return Err(Error::Config(format!(
                "band layout does not give {want}-bin bands for the model"
            )));
        }
        Ok(Self {
            model,
            frontend: frontend.clone(),
            layout: layout.clone(),
            stft: Stft::new(frontend)?,
        })
    }

    pub fn frontend(&self) -> &FrontendConfig {
        &self.frontend
    }

    pub fn enhance_spectrogram(&self, noisy: &ComplexSpectrogram) -> Result<EnhancedBands> {
        let beta = self.frontend.compression_beta;
        let dtype = self.model.dtype();
        let (low, mid, high) = split_bands(noisy, &self.layout)?;
        let (t, f) = (low.frames(), low.bins());

        let lf = self.model.lf_forward(&band_input(&[&low], beta, dtype)?)?;
        let lf_mag = lf.refined_magnitude()?;
        let mid_mag = compressed_magnitude(&[&mid], beta, dtype)?;
        let high_mag = compressed_magnitude(&[&high], beta, dtype)?;
        let mf = self.model.mf_forward(&mid_mag, &lf_mag)?;
        let hf = self.model.hf_forward(&high_mag, &lf_mag, &mf.estimate)?;

        let low_out = decompress_ri(
            &item_values(&lf.refined_re, 0)?,
            &item_values(&lf.refined_im, 0)?,
            t,
            f,
            beta,
        )?;
        // decompressed estimates never exceed the noisy magnitude
        let masked = |est: &candle_core::Tensor, noisy: &ComplexSpectrogram| -> Result<PolarSpectrogram> {
            let magnitude = decompress_magnitude(&item_values(est, 0)?, beta)?
                .into_iter()
                .zip(noisy.magnitude())
                .map(|(e, n)| e.min(n))
                .collect();
            Ok(PolarSpectrogram {
                frames: t,
                bins: f,
                magnitude,
                phase: noisy.phase(),
            })
        };
        Ok(EnhancedBands {
            low: low_out,
            mid: masked(&mf.estimate, &mid)?,
            high: masked(&hf.estimate, &high)?,
            mid_gain: item_values(&mf.gain, 0)?,
            high_gain: item_values(&hf.gain, 0)?,
        })
    }

    pub fn fuse(&self, bands: &EnhancedBands) -> Result<ComplexSpectrogram> {
        fuse_bands(
            &bands.low,
            &bands.mid.to_complex()?,
            &bands.high.to_complex()?,
            &self.layout,
        )
    }

    /// Enhances a mono waveform; the output has the input's length.
    pub fn enhance(&self, waveform: &[f32], sample_rate: u32) -> Result<Vec<f32>> {
        if sample_rate != self.frontend.sample_rate_hz {
            return Err(Error::Config(format!(
                "model runs at {} Hz, input is {sample_rate} Hz",
                self.frontend.sample_rate_hz
            )));
        }
        let noisy = self.stft.analyze(waveform)?;
        let fused = self.fuse(&self.enhance_spectrogram(&noisy)?)?;
        let mut out = self.stft.synthesize(&fused)?;
        out.truncate(waveform.len());
        Ok(out.into_iter().map(|v| v as f32).collect())
    }
}

/// Convenience wrapper around [`Enhancer::enhance`].
pub fn full_forward(
    model: &DmfModel,
    waveform: &[f32],
    sample_rate: u32,
    frontend: &FrontendConfig,
    layout: &BandLayout,
) -> Result<Vec<f32>> {
    Enhancer::new(model, frontend, layout)?.enhance(waveform, sample_rate)
}
