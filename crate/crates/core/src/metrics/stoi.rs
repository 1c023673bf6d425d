//! Short-time objective intelligibility, classic and extended variants.

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resample::resample;

pub const STOI_RATE_HZ: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = FRAME / 2;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per intermediate intelligibility segment (384 ms).
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoiVariant {
    #[default]
    Classic,
    Extended,
}

/// `hanning(n + 2)[1:-1]`, the periodic-free window without zero endpoints.
fn hann_inner(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n + 1) as f64).cos())
        .collect()
}

fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME)).step_by(HOP)
}

/// Drops frames of both signals whose clean energy is more than 40 dB below
/// the loudest clean frame, then overlap-adds the survivors.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = hann_inner(FRAME);
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    let energies: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = (0..FRAME).map(|i| (w[i] * x[s + i]).powi(2)).sum();
            20.0 * (e.sqrt() + EPS).log10()
        })
        .collect();
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| max - DYN_RANGE_DB - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    if kept.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let len = (kept.len() - 1) * HOP + FRAME;
    let (mut xs, mut ys) = (vec![0.0; len], vec![0.0; len]);
    for (j, &s) in kept.iter().enumerate() {
        for i in 0..FRAME {
            xs[j * HOP + i] += w[i] * x[s + i];
            ys[j * HOP + i] += w[i] * y[s + i];
        }
    }
    (xs, ys)
}

/// One-third-octave band edges as FFT bin ranges `[lo, hi)`.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let freqs: Vec<f64> = (0..=NFFT / 2)
        .map(|i| i as f64 * STOI_RATE_HZ as f64 / NFFT as f64)
        .collect();
    let nearest = |target: f64| {
        let mut best = 0;
        for (i, f) in freqs.iter().enumerate() {
            if (f - target).powi(2) < (freqs[best] - target).powi(2) {
                best = i;
            }
        }
        best
    };
    (0..BANDS)
        .map(|k| {
            let k = k as f64;
            let lo = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

/// Band envelopes, `[band][frame]`.
fn band_envelopes(x: &[f64], bands: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let w = hann_inner(FRAME);
    let fft = FftPlanner::new().plan_fft_forward(NFFT);
    let mut out = vec![Vec::new(); bands.len()];
    let mut buf = vec![Complex64::default(); NFFT];
    for s in frame_starts(x.len()) {
        buf.iter_mut().for_each(|c| *c = Complex64::default());
        for i in 0..FRAME {
            buf[i] = Complex64::new(w[i] * x[s + i], 0.0);
        }
        fft.process(&mut buf);
        for (b, &(lo, hi)) in bands.iter().enumerate() {
            let p: f64 = buf[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            out[b].push(p.sqrt());
        }
    }
    out
}

fn center_and_normalize(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|a| *a -= m);
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt() + EPS;
    v.iter_mut().for_each(|a| *a /= n);
}

fn classic_segment(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let clip = 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    for (xb, yb) in x.iter().zip(y) {
        let nx = xb.iter().map(|a| a * a).sum::<f64>().sqrt();
        let ny = yb.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = nx / (ny + EPS);
        let mut yp: Vec<f64> = yb
            .iter()
            .zip(xb)
            .map(|(b, a)| (b * scale).min(a * (1.0 + clip)))
            .collect();
        let mut xc = xb.clone();
        center_and_normalize(&mut yp);
        center_and_normalize(&mut xc);
        total += yp.iter().zip(&xc).map(|(a, b)| a * b).sum::<f64>();
    }
    total / x.len() as f64
}

/// Row (time) then column (band) mean and variance normalization.
fn row_col_normalize(seg: &mut [Vec<f64>]) {
    for row in seg.iter_mut() {
        center_and_normalize(row);
    }
    let n = seg[0].len();
    for t in 0..n {
        let mut col: Vec<f64> = seg.iter().map(|r| r[t]).collect();
        center_and_normalize(&mut col);
        for (r, v) in seg.iter_mut().zip(col) {
            r[t] = v;
        }
    }
}

fn extended_segment(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    row_col_normalize(&mut xs);
    row_col_normalize(&mut ys);
    let mut total = 0.0;
    for (xb, yb) in xs.iter().zip(&ys) {
        total += xb.iter().zip(yb).map(|(a, b)| a * b).sum::<f64>();
    }
    total / SEGMENT as f64
}

/// STOI of `processed` against `clean`, both at `fs` Hz. Signals are
/// resampled to 10 kHz internally. Fails if fewer than 30 frames remain
/// after silent-frame removal.
pub fn stoi(processed: &[f64], clean: &[f64], fs: u32, variant: StoiVariant) -> Result<f64> {
    if processed.len() != clean.len() {
        return Err(Error::shape(format!(
            "stoi: processed has {} samples, clean {}",
            processed.len(),
            clean.len()
        )));
    }
    let (x, y) = if fs == STOI_RATE_HZ {
        (clean.to_vec(), processed.to_vec())
    } else {
        (resample(clean, fs, STOI_RATE_HZ)?, resample(processed, fs, STOI_RATE_HZ)?)
    };
    let (x, y) = remove_silent_frames(&x, &y);
    let bands = third_octave_bands();
    let xe = band_envelopes(&x, &bands);
    let ye = band_envelopes(&y, &bands);
    let frames = xe[0].len();
    if frames < SEGMENT {
        return Err(Error::invalid(format!(
            "stoi: only {frames} non-silent frames, at least {SEGMENT} are needed"
        )));
    }
    let mut total = 0.0;
    let count = frames - SEGMENT + 1;
    for m in SEGMENT..=frames {
        let xs: Vec<Vec<f64>> = xe.iter().map(|b| b[m - SEGMENT..m].to_vec()).collect();
        let ys: Vec<Vec<f64>> = ye.iter().map(|b| b[m - SEGMENT..m].to_vec()).collect();
        total += match variant {
            StoiVariant::Classic => classic_segment(&xs, &ys),
            StoiVariant::Extended => extended_segment(&xs, &ys),
        };
    }
    Ok(total / count as f64)
}
