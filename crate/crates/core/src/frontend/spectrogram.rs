use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major `[frames × bins]` complex time-frequency array.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    frames: usize,
    bins: usize,
    values: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            frames,
            bins,
            values: vec![Complex64::new(0.0, 0.0); frames * bins],
        }
    }

    pub fn from_values(frames: usize, bins: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != frames * bins {
            return Err(Error::shape(format!(
                "{} values for a {frames}x{bins} spectrogram",
                values.len()
            )));
        }
        Ok(Self {
            frames,
            bins,
            values,
        })
    }

    /// Builds `mag · exp(j·phase)` elementwise.
    pub fn from_polar(frames: usize, bins: usize, mag: &[f64], phase: &[f64]) -> Result<Self> {
        if mag.len() != frames * bins || phase.len() != frames * bins {
            return Err(Error::shape(format!(
                "polar arrays of length {}/{} for a {frames}x{bins} spectrogram",
                mag.len(),
                phase.len()
            )));
        }
        let values = mag
            .iter()
            .zip(phase)
            .map(|(&m, &p)| Complex64::from_polar(m, p))
            .collect();
        Ok(Self {
            frames,
            bins,
            values,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at(&self, frame: usize, bin: usize) -> Complex64 {
        self.values[frame * self.bins + bin]
    }

    pub fn set(&mut self, frame: usize, bin: usize, value: Complex64) {
        self.values[frame * self.bins + bin] = value;
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        &self.values[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Phase in (−π, π].
    pub fn phase(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.arg()).collect()
    }

    pub fn to_polar(&self) -> PolarSpectrogram {
        PolarSpectrogram {
            frames: self.frames,
            bins: self.bins,
            magnitude: self.magnitude(),
            phase: self.phase(),
        }
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Contiguous bin slice `[start, start + len)` over all frames.
    pub fn slice_bins(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.bins {
            return Err(Error::shape(format!(
                "bin slice {start}..{} exceeds {} bins",
                start + len,
                self.bins
            )));
        }
        let mut values = Vec::with_capacity(self.frames * len);
        for t in 0..self.frames {
            values.extend_from_slice(&self.frame(t)[start..start + len]);
        }
        Ok(Self {
            frames: self.frames,
            bins: len,
            values,
        })
    }

    /// Real and imaginary planes.
    pub fn to_ri(&self) -> (Vec<f64>, Vec<f64>) {
        self.values.iter().map(|v| (v.re, v.im)).unzip()
    }
}

/// Magnitude/phase pair kept separately so a phase array can be passed
/// through an estimator without being re-derived from rounded products.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSpectrogram {
    pub frames: usize,
    pub bins: usize,
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl PolarSpectrogram {
    pub fn to_complex(&self) -> Result<ComplexSpectrogram> {
        ComplexSpectrogram::from_polar(self.frames, self.bins, &self.magnitude, &self.phase)
    }
}
