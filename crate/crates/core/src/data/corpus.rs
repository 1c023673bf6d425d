//! Synthetic corpus for desk-scale runs: speech-like harmonic signals with
//! fricative bursts, coloured noises and exponentially decaying RIRs.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::mixture::{Manifest, MixtureSpec, Split};
use crate::audio::{write_wav, Audio};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub clips: usize,
    pub seconds: f64,
    pub sample_rate: u32,
    pub seed: u64,
    pub snr_db_range: (f64, f64),
    /// Fraction of mixtures that get a room impulse response.
    pub rir_probability: f64,
    pub t60_range: (f64, f64),
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            clips: 100,
            seconds: 3.0,
            sample_rate: 48_000,
            seed: 0,
            snr_db_range: (-5.0, 15.0),
            rir_probability: 0.7,
            t60_range: (0.2, 0.6),
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(rng)
}

/// Single-pole high-pass, used to give fricatives their bright spectrum.
fn highpass(x: &mut [f64], cutoff_hz: f64, fs: f64) {
    let a = (-2.0 * PI * cutoff_hz / fs).exp();
    let (mut prev_x, mut prev_y) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = a * (prev_y + *v - prev_x);
        prev_x = *v;
        prev_y = y;
        *v = y;
    }
}

fn formant_gain(f: f64, formants: &[(f64, f64)]) -> f64 {
    formants
        .iter()
        .map(|&(fc, bw)| 1.0 / (1.0 + ((f - fc) / bw).powi(2)))
        .sum::<f64>()
        + 0.02
}

/// Speech-like test signal: voiced syllables with gliding pitch and
/// formant-shaped harmonics up to 20 kHz, unvoiced bursts and pauses.
/// Peak-normalized to 0.5.
pub fn speech_like(seed: u64, seconds: f64, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let len = (seconds * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; len];
    let nyquist_limit = (0.45 * fs).min(20_000.0);
    let base_f0: f64 = rng.random_range(90.0..220.0);
    let mut pos = (rng.random_range(0.02..0.15) * fs) as usize;
    while pos < len {
        let dur = (rng.random_range(0.12..0.35) * fs) as usize;
        let end = (pos + dur).min(len);
        let n = end - pos;
        if rng.random_bool(0.8) {
            let f0_start: f64 = base_f0 * rng.random_range(0.85..1.2);
            let f0_end = f0_start * rng.random_range(0.8..1.25);
            let formants = [
                (rng.random_range(300.0..800.0), 90.0),
                (rng.random_range(900.0..2300.0), 140.0),
                (rng.random_range(2400.0..3400.0), 220.0),
                (rng.random_range(4000.0..6000.0), 600.0),
            ];
            let harmonics = (nyquist_limit / f0_start.max(f0_end)).floor() as usize;
            let phases: Vec<f64> = (0..harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let mut phase0 = 0.0;
            for i in 0..n {
                let frac = i as f64 / n as f64;
                let f0 = f0_start + (f0_end - f0_start) * frac;
                phase0 += 2.0 * PI * f0 / fs;
                let env = (PI * frac).sin().powf(0.6);
                let mut acc = 0.0;
                for (h, ph) in phases.iter().enumerate() {
                    let f = f0 * (h + 1) as f64;
                    let tilt = 1.0 / (1.0 + f / 2_000.0);
                    acc += tilt * formant_gain(f, &formants) * ((h + 1) as f64 * phase0 + ph).sin();
                }
                out[pos + i] += env * acc;
            }
        } else {
            let mut burst: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
            highpass(&mut burst, rng.random_range(2_500.0..6_000.0), fs);
            let level = rng.random_range(0.2..0.6);
            for (i, b) in burst.iter().enumerate() {
                let env = (PI * i as f64 / n as f64).sin();
                out[pos + i] += level * env * b;
            }
        }
        let gap = if rng.random_bool(0.15) {
            rng.random_range(0.25..0.5)
        } else {
            rng.random_range(0.03..0.12)
        };
        pos = end + (gap * fs) as usize;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NoiseKind {
    White,
    Pink,
    Brown,
    Hum,
    Babble,
}

/// Stationary or babble-like noise, peak-normalized to 0.5.
fn noise(seed: u64, seconds: f64, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let len = (seconds * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Brown, NoiseKind::Hum, NoiseKind::Babble];
    let kind = kinds[rng.random_range(0..kinds.len())];
    let white: Vec<f64> = (0..len).map(|_| gaussian(&mut rng)).collect();
    let mut out = match kind {
        NoiseKind::White => white,
        NoiseKind::Pink => {
            // Kellett's economy pinking filter
            let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
            white
                .iter()
                .map(|&w| {
                    b0 = 0.99765 * b0 + w * 0.0990460;
                    b1 = 0.96300 * b1 + w * 0.2965164;
                    b2 = 0.57000 * b2 + w * 1.0526913;
                    b0 + b1 + b2 + w * 0.1848
                })
                .collect()
        }
        NoiseKind::Brown => {
            let mut acc = 0.0;
            white
                .iter()
                .map(|&w| {
                    acc = 0.998 * acc + 0.05 * w;
                    acc
                })
                .collect()
        }
        NoiseKind::Hum => {
            let f = if rng.random_bool(0.5) { 50.0 } else { 60.0 };
            white
                .iter()
                .enumerate()
                .map(|(i, &w)| {
                    let t = i as f64 / fs;
                    (1..=8)
                        .map(|h| (2.0 * PI * f * h as f64 * t).sin() / h as f64)
                        .sum::<f64>()
                        + 0.3 * w
                })
                .collect()
        }
        NoiseKind::Babble => {
            let mut acc = vec![0.0; len];
            for k in 0..4 {
                let talker = speech_like(seed.wrapping_add(1_000 + k), seconds, sample_rate);
                acc.iter_mut().zip(talker).for_each(|(a, t)| *a += t);
            }
            acc.iter_mut().zip(&white).for_each(|(a, w)| *a += 0.02 * w);
            acc
        }
    };
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    out
}

/// Direct path after a short delay, then an exponentially decaying noise
/// tail reaching −60 dB at `t60`.
pub fn synthetic_rir(seed: u64, t60: f64, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = (1.2 * t60 * fs).ceil() as usize;
    let delay = (rng.random_range(0.001..0.005) * fs) as usize;
    let mut h = vec![0.0; len.max(delay + 2)];
    h[delay] = 1.0;
    let decay = 3.0 * std::f64::consts::LN_10 / t60;
    for (i, v) in h.iter_mut().enumerate().skip(delay + 1) {
        let t = (i - delay) as f64 / fs;
        *v = 0.25 * gaussian(&mut rng) * (-decay * t).exp();
    }
    h
}

fn write_f64(path: &Path, x: &[f64], fs: u32) -> Result<()> {
    write_wav(path, &Audio::new(x.iter().map(|&v| v as f32).collect(), fs))
}

/// Writes `cfg.clips` clean/noise/RIR triplets under `out_dir` and a
/// `<name>.jsonl` manifest with paths relative to `out_dir`.
pub fn generate_corpus(out_dir: impl AsRef<Path>, name: &str, cfg: &CorpusConfig) -> Result<Manifest> {
    if cfg.clips == 0 || cfg.seconds <= 0.0 {
        return Err(Error::Config("corpus needs at least one clip of positive length".into()));
    }
    let (lo, hi) = cfg.snr_db_range;
    if lo > hi {
        return Err(Error::Config(format!("empty SNR range [{lo}, {hi}]")));
    }
    let out = out_dir.as_ref();
    for sub in ["clean", "noise", "rir"] {
        std::fs::create_dir_all(out.join(sub))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.clips);
    for i in 0..cfg.clips {
        let item_seed: u64 = rng.random();
        let rel = |dir: &str| PathBuf::from(dir).join(format!("{name}_{i:04}.wav"));
        let clean_rel = rel("clean");
        let noise_rel = rel("noise");
        write_f64(&out.join(&clean_rel), &speech_like(item_seed, cfg.seconds, cfg.sample_rate), cfg.sample_rate)?;
        write_f64(
            &out.join(&noise_rel),
            &noise(item_seed ^ 0x5555, cfg.seconds, cfg.sample_rate),
            cfg.sample_rate,
        )?;
        let rir_rel = if rng.random_bool(cfg.rir_probability.clamp(0.0, 1.0)) {
            let t60 = rng.random_range(cfg.t60_range.0..=cfg.t60_range.1);
            let p = rel("rir");
            write_f64(&out.join(&p), &synthetic_rir(item_seed ^ 0xAAAA, t60, cfg.sample_rate), cfg.sample_rate)?;
            Some(p)
        } else {
            None
        };
        records.push(MixtureSpec {
            clean_path: clean_rel,
            noise_path: noise_rel,
            rir_path: rir_rel,
            snr_db: if hi > lo { rng.random_range(lo..hi) } else { lo },
            seed: item_seed,
            language: None,
        });
    }
    let manifest_path = out.join(format!("{name}.jsonl"));
    Manifest {
        split: Split::Train,
        records,
    }
    .save(&manifest_path)?;
    Manifest::load(&manifest_path, Split::Train)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speech_like_is_deterministic_and_has_pauses() {
        let a = speech_like(5, 1.0, 16_000);
        assert_eq!(a, speech_like(5, 1.0, 16_000));
        assert_eq!(a.len(), 16_000);
        let peak = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.5).abs() < 1e-12);
        let quiet = a.chunks(320).filter(|c| c.iter().all(|v| v.abs() < 1e-9)).count();
        assert!(quiet > 0);
    }

    #[test]
    fn rir_peak_is_the_direct_path() {
        let h = synthetic_rir(1, 0.3, 16_000);
        let (idx, _) = h
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        assert_eq!(h[idx], 1.0);
        assert!(idx < 80);
    }

    #[test]
    fn corpus_manifest_loads() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = CorpusConfig {
            clips: 3,
            seconds: 0.5,
            sample_rate: 16_000,
            ..Default::default()
        };
        let m = generate_corpus(dir.path(), "train", &cfg).unwrap();
        assert_eq!(m.records.len(), 3);
        assert!(m.records.iter().all(|r| (-5.0..15.0).contains(&r.snr_db)));
    }
}
