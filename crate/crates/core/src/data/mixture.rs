use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::read_wav;
use crate::error::{Error, Result};

/// One line of a mixture manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub clean_path: PathBuf,
    pub noise_path: PathBuf,
    #[serde(default)]
    pub rir_path: Option<PathBuf>,
    pub snr_db: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// JSON-lines manifest. Relative paths are resolved against the manifest's
/// directory when loading.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub split: Split,
    pub records: Vec<MixtureSpec>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>, split: Split) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut rec: MixtureSpec = serde_json::from_str(&line).map_err(|e| {
                Error::invalid(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
            let resolve = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
            rec.clean_path = resolve(&rec.clean_path);
            rec.noise_path = resolve(&rec.noise_path);
            rec.rir_path = rec.rir_path.as_deref().map(resolve);
            records.push(rec);
        }
        let manifest = Self { split, records };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.records {
            writeln!(f, "{}", serde_json::to_string(r)?)?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::invalid("manifest has no records"));
        }
        let mut seeds = HashSet::new();
        for r in &self.records {
            if !seeds.insert(r.seed) {
                return Err(Error::invalid(format!("duplicate seed {}", r.seed)));
            }
            let paths = [Some(&r.clean_path), Some(&r.noise_path), r.rir_path.as_ref()];
            for p in paths.into_iter().flatten() {
                if !p.exists() {
                    return Err(Error::invalid(format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Early-reflection window after the direct-path peak.
    pub early_ms: f64,
    /// Frames quieter than the loudest frame by more than this are ignored
    /// when measuring SNR.
    pub vad_floor_db: f64,
    /// Frame length of the activity detector.
    pub vad_frame_ms: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            early_ms: 50.0,
            vad_floor_db: -40.0,
            vad_frame_ms: 20.0,
        }
    }
}

/// Noisy mixture and its two targets, all the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub noisy: Vec<f32>,
    /// Noise removed, reverberation kept.
    pub target_denoised_reverberant: Vec<f32>,
    /// Direct path plus early reflections.
    pub target_clean: Vec<f32>,
    pub sample_rate: u32,
    pub snr_db: f64,
    pub rir_id: Option<String>,
    pub language: Option<String>,
}

impl TrainingPair {
    pub fn len(&self) -> usize {
        self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy.is_empty()
    }

    /// Little-endian bytes of all three signals, for determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        [&self.noisy, &self.target_denoised_reverberant, &self.target_clean]
            .iter()
            .flat_map(|s| s.iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }
}

pub(crate) fn fft_convolve(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0; out_len];
    }
    let n = (a.len() + b.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        v.resize(n, Complex64::new(0.0, 0.0));
        v
    };
    let (mut fa, mut fb) = (pad(a), pad(b));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    inv.process(&mut prod);
    let scale = 1.0 / n as f64;
    (0..out_len)
        .map(|i| prod.get(i).map_or(0.0, |c| c.re * scale))
        .collect()
}

/// Samples belonging to frames within `floor_db` of the loudest frame.
pub fn active_mask(signal: &[f64], frame_len: usize, floor_db: f64) -> Vec<bool> {
    let frame_len = frame_len.max(1);
    let energies: Vec<f64> = signal
        .chunks(frame_len)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64)
        .collect();
    let peak = energies.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return vec![false; signal.len()];
    }
    let threshold = peak * 10f64.powf(floor_db / 10.0);
    let mut mask = Vec::with_capacity(signal.len());
    for (c, &e) in signal.chunks(frame_len).zip(&energies) {
        mask.extend(std::iter::repeat_n(e >= threshold && e > 0.0, c.len()));
    }
    mask
}

fn masked_power(x: &[f64], mask: &[bool]) -> f64 {
    let (sum, n) = x
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// `g = sqrt(P_s / (P_n · 10^{snr/10}))`.
pub fn noise_gain(p_signal: f64, p_noise: f64, snr_db: f64) -> f64 {
    (p_signal / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// SNR of `noisy − speech` against `speech`, measured on the active
/// frames of `speech` exactly as during synthesis.
pub fn realized_snr_db(pair: &TrainingPair, cfg: &SynthesisConfig) -> f64 {
    let s = to_f64(&pair.target_denoised_reverberant);
    let n: Vec<f64> = pair.noisy.iter().zip(&s).map(|(&a, &b)| a as f64 - b).collect();
    let mask = active_mask(&s, vad_frame(cfg, pair.sample_rate), cfg.vad_floor_db);
    10.0 * (masked_power(&s, &mask) / masked_power(&n, &mask)).log10()
}

fn vad_frame(cfg: &SynthesisConfig, sample_rate: u32) -> usize {
    (cfg.vad_frame_ms * sample_rate as f64 / 1000.0).round() as usize
}

fn to_f64(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

/// Index of the direct-path peak; errors on an all-zero or non-finite RIR.
fn rir_peak(rir: &[f64]) -> Result<usize> {
    if rir.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("RIR contains non-finite samples"));
    }
    let (idx, peak) = rir
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    if peak <= 0.0 {
        return Err(Error::invalid("RIR has no detectable direct-path peak"));
    }
    Ok(idx)
}

/// Builds one training pair; all randomness comes from `spec.seed`.
pub fn synthesize_pair(spec: &MixtureSpec, cfg: &SynthesisConfig) -> Result<TrainingPair> {
    let clean = read_wav(&spec.clean_path)?;
    let noise = read_wav(&spec.noise_path)?;
    if clean.sample_rate != noise.sample_rate {
        return Err(Error::invalid(format!(
            "clean is {} Hz but noise is {} Hz",
            clean.sample_rate, noise.sample_rate
        )));
    }
    let fs = clean.sample_rate;
    let len = clean.samples.len();
    let x = to_f64(&clean.samples);
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::Skipped(format!("{} is silent", spec.clean_path.display())));
    }
    if noise.samples.is_empty() {
        return Err(Error::invalid(format!("{} is empty", spec.noise_path.display())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let (reverberant, early, rir_id) = match &spec.rir_path {
        Some(p) => {
            let rir = read_wav(p)?;
            if rir.sample_rate != fs {
                return Err(Error::invalid(format!(
                    "RIR is {} Hz, speech is {fs} Hz",
                    rir.sample_rate
                )));
            }
            let h = to_f64(&rir.samples);
            let peak = rir_peak(&h)?;
            let early_end = (peak + (cfg.early_ms * fs as f64 / 1000.0).round() as usize).min(h.len() - 1);
            let rev = fft_convolve(&x, &h, len);
            let early = fft_convolve(&x, &h[..=early_end], len);
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned());
            (rev, early, id)
        }
        None => (x.clone(), x.clone(), None),
    };

    // noise segment: random offset, looped when shorter than the speech
    let start = rng.random_range(0..noise.samples.len());
    let n: Vec<f64> = (0..len)
        .map(|i| noise.samples[(start + i) % noise.samples.len()] as f64)
        .collect();

    let mask = active_mask(&reverberant, vad_frame(cfg, fs), cfg.vad_floor_db);
    let p_s = masked_power(&reverberant, &mask);
    if p_s <= 0.0 {
        return Err(Error::Skipped(format!(
            "{} has no active speech",
            spec.clean_path.display()
        )));
    }
    let p_n = masked_power(&n, &mask);
    if p_n <= 0.0 {
        return Err(Error::Skipped(format!(
            "{} is silent over the active speech",
            spec.noise_path.display()
        )));
    }
    let g = noise_gain(p_s, p_n, spec.snr_db);
    let mut noisy: Vec<f64> = reverberant.iter().zip(&n).map(|(s, v)| s + g * v).collect();

    let mut targets = [reverberant, early];
    let peak = noisy
        .iter()
        .chain(targets.iter().flatten())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.99 {
        let s = 0.99 / peak;
        noisy.iter_mut().for_each(|v| *v *= s);
        targets.iter_mut().flatten().for_each(|v| *v *= s);
    }
    let [reverberant, early] = targets;
    let to32 = |v: Vec<f64>| v.into_iter().map(|x| x as f32).collect::<Vec<f32>>();
    Ok(TrainingPair {
        noisy: to32(noisy),
        target_denoised_reverberant: to32(reverberant),
        target_clean: to32(early),
        sample_rate: fs,
        snr_db: spec.snr_db,
        rir_id,
        language: spec.language.clone(),
    })
}

/// Synthesizes every record in parallel, keeping manifest order. Skipped
/// items are logged and dropped; other errors abort.
pub fn synthesize_all(manifest: &Manifest, cfg: &SynthesisConfig) -> Result<Vec<TrainingPair>> {
    let results: Vec<Result<TrainingPair>> = manifest
        .records
        .par_iter()
        .map(|spec| synthesize_pair(spec, cfg))
        .collect();
    let mut pairs = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(p) => pairs.push(p),
            Err(Error::Skipped(reason)) => log::warn!("skipping mixture: {reason}"),
            Err(e) => return Err(e),
        }
    }
    if pairs.is_empty() {
        return Err(Error::invalid("every mixture in the manifest was skipped"));
    }
    Ok(pairs)
}

impl TrainingPair {
    /// The same pair at another sample rate.
    pub fn resampled(&self, to_hz: u32) -> Result<TrainingPair> {
        let conv = |x: &[f32]| -> Result<Vec<f32>> {
            let y = crate::resample::resample(&to_f64(x), self.sample_rate, to_hz)?;
            Ok(y.into_iter().map(|v| v as f32).collect())
        };
        Ok(TrainingPair {
            noisy: conv(&self.noisy)?,
            target_denoised_reverberant: conv(&self.target_denoised_reverberant)?,
            target_clean: conv(&self.target_clean)?,
            sample_rate: to_hz,
            snr_db: self.snr_db,
            rir_id: self.rir_id.clone(),
            language: self.language.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{write_wav, Audio};

    fn tone(len: usize, freq: f64, amp: f64, fs: f64) -> Vec<f32> {
        (0..len)
            .map(|i| (amp * (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin()) as f32)
            .collect()
    }

    fn write(dir: &Path, name: &str, samples: Vec<f32>, fs: u32) -> PathBuf {
        let p = dir.join(name);
        write_wav(&p, &Audio::new(samples, fs)).unwrap();
        p
    }

    fn fixture(dir: &Path) -> MixtureSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise: Vec<f32> = (0..12_000).map(|_| rng.random_range(-0.2f32..0.2)).collect();
        let mut rir = vec![0.0f32; 4_800];
        rir[100] = 1.0;
        for (i, v) in rir.iter_mut().enumerate().skip(101) {
            *v = 0.3 * (-(i as f32) / 800.0).exp() * if i % 7 == 0 { -1.0 } else { 0.5 };
        }
        MixtureSpec {
            clean_path: write(dir, "c.wav", tone(16_000, 440.0, 0.3, 16_000.0), 16_000),
            noise_path: write(dir, "n.wav", noise, 16_000),
            rir_path: Some(write(dir, "r.wav", rir, 16_000)),
            snr_db: 5.0,
            seed: 42,
            language: None,
        }
    }

    #[test]
    fn gain_closed_form() {
        assert!((noise_gain(1.0, 4.0, 10.0) - 0.158_113_883).abs() < 1e-8);
        assert_eq!(noise_gain(2.5, 2.5, 0.0), 1.0);
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let a = [1.0, -2.0, 0.5, 3.0];
        let b = [0.25, 0.0, -1.0];
        let got = fft_convolve(&a, &b, 6);
        for n in 0..6 {
            let mut acc = 0.0;
            for (k, &bk) in b.iter().enumerate() {
                if n >= k && n - k < a.len() {
                    acc += a[n - k] * bk;
                }
            }
            assert!((got[n] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn realized_snr_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let spec = fixture(dir.path());
        let cfg = SynthesisConfig::default();
        let a = synthesize_pair(&spec, &cfg).unwrap();
        let b = synthesize_pair(&spec, &cfg).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert!((realized_snr_db(&a, &cfg) - 5.0).abs() < 0.01);
        let energy = |x: &[f32]| x.iter().map(|v| (*v as f64).powi(2)).sum::<f64>();
        assert!(energy(&a.target_clean) <= energy(&a.target_denoised_reverberant));
        assert_eq!(a.rir_id.as_deref(), Some("r"));
    }

    #[test]
    fn without_rir_targets_are_the_clean_signal() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = fixture(dir.path());
        spec.rir_path = None;
        let pair = synthesize_pair(&spec, &SynthesisConfig::default()).unwrap();
        let clean = read_wav(&spec.clean_path).unwrap().samples;
        assert_eq!(pair.target_clean, clean);
        assert_eq!(pair.target_denoised_reverberant, clean);
    }

    #[test]
    fn silent_speech_and_flat_rir() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = fixture(dir.path());
        spec.rir_path = Some(write(dir.path(), "z.wav", vec![0.0; 100], 16_000));
        assert!(matches!(
            synthesize_pair(&spec, &SynthesisConfig::default()),
            Err(Error::InvalidInput(_))
        ));
        spec.rir_path = None;
        spec.clean_path = write(dir.path(), "s.wav", vec![0.0; 1000], 16_000);
        assert!(matches!(
            synthesize_pair(&spec, &SynthesisConfig::default()),
            Err(Error::Skipped(_))
        ));
    }

    #[test]
    fn manifest_round_trip_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        let spec = fixture(dir.path());
        let mut rel = spec.clone();
        rel.clean_path = PathBuf::from("c.wav");
        let manifest = Manifest {
            split: Split::Train,
            records: vec![rel],
        };
        let path = dir.path().join("m.jsonl");
        manifest.save(&path).unwrap();
        let loaded = Manifest::load(&path, Split::Train).unwrap();
        assert_eq!(loaded.records[0].clean_path, dir.path().join("c.wav"));
        let mut dup = loaded.clone();
        dup.records.push(loaded.records[0].clone());
        assert!(dup.validate().is_err());
        std::fs::write(&path, "").unwrap();
        assert!(Manifest::load(&path, Split::Train).is_err());
    }
}
