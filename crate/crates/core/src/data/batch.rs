use candle_core::{DType, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mixture::TrainingPair;
use crate::error::{Error, Result};
use crate::frontend::{split_bands, BandLayout, ComplexSpectrogram, FrontendConfig, Stft};
use crate::model::features::{band_input, compressed_magnitude, compressed_ri};
use crate::model::BandInput;

fn refs(v: &[ComplexSpectrogram]) -> Vec<&ComplexSpectrogram> {
    v.iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub batch_size: usize,
    /// Crop length; shorter clips are zero-padded.
    pub crop_seconds: f64,
    pub seed: u64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            crop_seconds: 3.0,
            seed: 0,
        }
    }
}

impl BatchConfig {
    pub fn crop_samples(&self, sample_rate: u32) -> usize {
        (self.crop_seconds * sample_rate as f64).round() as usize
    }
}

/// Equal-length waveform crops.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveBatch {
    pub noisy: Vec<Vec<f32>>,
    pub target_denoised_reverberant: Vec<Vec<f32>>,
    pub target_clean: Vec<Vec<f32>>,
    pub sample_rate: u32,
}

impl WaveBatch {
    pub fn len(&self) -> usize {
        self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy.is_empty()
    }
}

/// Endless stream of batches: each epoch visits every pair once in a
/// seeded random order, continuing into the next epoch to fill batches.
pub struct BatchIterator<'a> {
    pairs: &'a [TrainingPair],
    cfg: BatchConfig,
    crop: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
}

impl<'a> BatchIterator<'a> {
    pub fn new(pairs: &'a [TrainingPair], cfg: BatchConfig) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::invalid("no training pairs to batch"))?;
        if cfg.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if pairs.iter().any(|p| p.sample_rate != first.sample_rate) {
            return Err(Error::invalid("training pairs mix sample rates"));
        }
        let crop = cfg.crop_samples(first.sample_rate);
        if crop == 0 {
            return Err(Error::Config("crop length must be positive".into()));
        }
        Ok(Self {
            pairs,
            cfg,
            crop,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            order: Vec::new(),
            pos: 0,
        })
    }

    fn next_index(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.order = (0..self.pairs.len()).collect();
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }

    fn crop(&mut self, p: &TrainingPair) -> [Vec<f32>; 3] {
        let len = p.len();
        let start = if len > self.crop {
            self.rng.random_range(0..=len - self.crop)
        } else {
            0
        };
        let take = |x: &[f32]| {
            let mut v: Vec<f32> = x[start..(start + self.crop).min(len)].to_vec();
            v.resize(self.crop, 0.0);
            v
        };
        [
            take(&p.noisy),
            take(&p.target_denoised_reverberant),
            take(&p.target_clean),
        ]
    }
}

impl Iterator for BatchIterator<'_> {
    type Item = WaveBatch;

    fn next(&mut self) -> Option<WaveBatch> {
        let mut batch = WaveBatch {
            noisy: Vec::new(),
            target_denoised_reverberant: Vec::new(),
            target_clean: Vec::new(),
            sample_rate: self.pairs[0].sample_rate,
        };
        for _ in 0..self.cfg.batch_size {
            let i = self.next_index();
            let [n, r, c] = self.crop(&self.pairs[i]);
            batch.noisy.push(n);
            batch.target_denoised_reverberant.push(r);
            batch.target_clean.push(c);
        }
        Some(batch)
    }
}

fn spectrograms(stft: &Stft, waves: &[Vec<f32>]) -> Result<Vec<ComplexSpectrogram>> {
    waves.iter().map(|w| stft.analyze(w)).collect()
}

fn check_rate(batch: &WaveBatch, frontend: &FrontendConfig) -> Result<()> {
    if batch.sample_rate != frontend.sample_rate_hz {
        return Err(Error::Config(format!(
            "batch is {} Hz but the front-end expects {} Hz",
            batch.sample_rate, frontend.sample_rate_hz
        )));
    }
    Ok(())
}

/// Network inputs and targets for the low-band stages.
#[derive(Debug, Clone)]
pub struct LfBatch {
    pub input: BandInput,
    pub target_dn_mag: Tensor,
    pub target_clean_mag: Tensor,
    pub target_clean_re: Tensor,
    pub target_clean_im: Tensor,
}

impl LfBatch {
    pub fn new(batch: &WaveBatch, frontend: &FrontendConfig, dtype: DType) -> Result<Self> {
        check_rate(batch, frontend)?;
        let stft = Stft::new(frontend)?;
        let beta = frontend.compression_beta;
        let noisy = spectrograms(&stft, &batch.noisy)?;
        let dn = spectrograms(&stft, &batch.target_denoised_reverberant)?;
        let clean = spectrograms(&stft, &batch.target_clean)?;
        let (re, im) = compressed_ri(&refs(&clean), beta, dtype)?;
        Ok(Self {
            input: band_input(&refs(&noisy), beta, dtype)?,
            target_dn_mag: compressed_magnitude(&refs(&dn), beta, dtype)?,
            target_clean_mag: compressed_magnitude(&refs(&clean), beta, dtype)?,
            target_clean_re: re,
            target_clean_im: im,
        })
    }
}

/// Network inputs and targets for the full-band stage.
#[derive(Debug, Clone)]
pub struct FullBatch {
    pub low: BandInput,
    pub mid_mag: Tensor,
    pub high_mag: Tensor,
    pub target_mid_mag: Tensor,
    pub target_high_mag: Tensor,
}

impl FullBatch {
    pub fn new(batch: &WaveBatch, frontend: &FrontendConfig, layout: &BandLayout, dtype: DType) -> Result<Self> {
        check_rate(batch, frontend)?;
        let stft = Stft::new(frontend)?;
        let beta = frontend.compression_beta;
        let split = |waves: &[Vec<f32>]| -> Result<[Vec<ComplexSpectrogram>; 3]> {
            let mut out: [Vec<ComplexSpectrogram>; 3] = Default::default();
            for s in spectrograms(&stft, waves)? {
                let (l, m, h) = split_bands(&s, layout)?;
                out[0].push(l);
                out[1].push(m);
                out[2].push(h);
            }
            Ok(out)
        };
        let [nl, nm, nh] = split(&batch.noisy)?;
        let [_, cm, ch] = split(&batch.target_clean)?;
        Ok(Self {
            low: band_input(&refs(&nl), beta, dtype)?,
            mid_mag: compressed_magnitude(&refs(&nm), beta, dtype)?,
            high_mag: compressed_magnitude(&refs(&nh), beta, dtype)?,
            target_mid_mag: compressed_magnitude(&refs(&cm), beta, dtype)?,
            target_high_mag: compressed_magnitude(&refs(&ch), beta, dtype)?,
        })
    }
}
