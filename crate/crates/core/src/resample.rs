//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc filter.

use crate::error::{Error, Result};

/// Stopband attenuation of the anti-aliasing filter in dB.
const ATTENUATION_DB: f64 = 90.0;
/// Passband edge as a fraction of the lower Nyquist frequency.
const PASSBAND: f64 = 0.9;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Polyphase resampler from `from_hz` to `to_hz`.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    /// `phases[p][j]` multiplies input sample `k0(p) − j`.
    phases: Vec<Vec<f64>>,
    center: usize,
}

impl Resampler {
    pub fn new(from_hz: u32, to_hz: u32) -> Result<Self> {
        if from_hz == 0 || to_hz == 0 {
            return Err(Error::Config("sample rates must be positive".into()));
        }
        let g = gcd(from_hz as u64, to_hz as u64);
        let up = (to_hz as u64 / g) as usize;
        let down = (from_hz as u64 / g) as usize;
        if up > 1000 || down > 1000 {
            return Err(Error::Config(format!(
                "unsupported resampling ratio {to_hz}/{from_hz}"
            )));
        }
        let fs_up = from_hz as f64 * up as f64;
        let nyq = 0.5 * from_hz.min(to_hz) as f64;
        // transition band [PASSBAND·nyq, nyq]; cutoff in its middle
        let transition = (1.0 - PASSBAND) * nyq;
        let cutoff = nyq - transition / 2.0;
        let d_omega = 2.0 * std::f64::consts::PI * transition / fs_up;
        let mut taps = ((ATTENUATION_DB - 8.0) / (2.285 * d_omega)).ceil() as usize;
        taps |= 1;
        let beta = 0.1102 * (ATTENUATION_DB - 8.7);
        let center = (taps - 1) / 2;
        let fc = cutoff / fs_up;
        let i0_beta = bessel_i0(beta);
        let proto: Vec<f64> = (0..taps)
            .map(|n| {
                let m = n as f64 - center as f64;
                let sinc = if m == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * std::f64::consts::PI * fc * m).sin() / (std::f64::consts::PI * m)
                };
                let r = m / center as f64;
                let kaiser = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                sinc * kaiser
            })
            .collect();
        // phase p holds taps n ≡ p (mod up), each normalized to unit DC gain
        let mut phases = vec![Vec::new(); up];
        for (n, &h) in proto.iter().enumerate() {
            phases[n % up].push(h);
        }
        for phase in phases.iter_mut() {
            let s: f64 = phase.iter().sum();
            if s.abs() > 0.0 {
                phase.iter_mut().for_each(|h| *h /= s);
            }
        }
        Ok(Self {
            up,
            down,
            phases,
            center,
        })
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        let out_len = self.output_len(input.len());
        let mut out = Vec::with_capacity(out_len);
        for m in 0..out_len {
            // y[m] = Σ_k x[k]·h[m·down + center − k·up]
            let pos = m * self.down + self.center;
            let phase = pos % self.up;
            let k_top = pos / self.up;
            let mut acc = 0.0;
            for (j, &h) in self.phases[phase].iter().enumerate() {
                if j > k_top {
                    break;
                }
                if let Some(&x) = input.get(k_top - j) {
                    acc += x * h;
                }
            }
            out.push(acc);
        }
        out
    }
}

/// Resamples `input` between arbitrary integer rates.
pub fn resample(input: &[f64], from_hz: u32, to_hz: u32) -> Result<Vec<f64>> {
    if from_hz == to_hz {
        return Ok(input.to_vec());
    }
    Ok(Resampler::new(from_hz, to_hz)?.process(input))
}

/// Anti-aliased 3:1 decimation from 48 kHz to 16 kHz.
pub fn resample_to_16k(waveform: &[f64], sample_rate: u32) -> Result<Vec<f64>> {
    if sample_rate != 48_000 {
        return Err(Error::Config(format!(
            "expected 48 kHz input, got {sample_rate} Hz"
        )));
    }
    resample(waveform, 48_000, 16_000)
}

/// 1:3 interpolation from 16 kHz to 48 kHz.
pub fn resample_to_48k(waveform: &[f64], sample_rate: u32) -> Result<Vec<f64>> {
    if sample_rate != 16_000 {
        return Err(Error::Config(format!(
            "expected 16 kHz input, got {sample_rate} Hz"
        )));
    }
    resample(waveform, 16_000, 48_000)
}
