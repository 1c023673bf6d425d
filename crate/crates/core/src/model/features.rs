//! Conversions between spectrogram batches and network tensors.

use candle_core::{DType, Device, Tensor};
use num_complex::Complex64;

use super::dmf::BandInput;
use crate::error::{Error, Result};
use crate::frontend::ComplexSpectrogram;

fn batch_shape(specs: &[&ComplexSpectrogram]) -> Result<(usize, usize, usize)> {
    let first = specs
        .first()
        .ok_or_else(|| Error::invalid("empty spectrogram batch"))?;
    let (t, f) = (first.frames(), first.bins());
    if specs.iter().any(|s| s.frames() != t || s.bins() != f) {
        return Err(Error::shape("spectrograms in a batch must share their shape"));
    }
    Ok((specs.len(), t, f))
}

fn to_tensor(values: Vec<f64>, shape: (usize, usize, usize), dtype: DType) -> Result<Tensor> {
    let (b, t, f) = shape;
    Ok(Tensor::from_vec(values, (b, 1, t, f), &Device::Cpu)?.to_dtype(dtype)?)
}

/// Unit phasor of `c`; a zero bin gets phase zero.
pub fn phasor(c: Complex64) -> (f64, f64) {
    let m = c.norm();
    if m > 0.0 {
        (c.re / m, c.im / m)
    } else {
        (1.0, 0.0)
    }
}

/// `|X|^β` stacked to `(B, 1, T, F)`.
pub fn compressed_magnitude(specs: &[&ComplexSpectrogram], beta: f64, dtype: DType) -> Result<Tensor> {
    let shape = batch_shape(specs)?;
    let values = specs
        .iter()
        .flat_map(|s| s.values().iter().map(|c| c.norm().powf(beta)))
        .collect();
    to_tensor(values, shape, dtype)
}

/// Compressed magnitude with the noisy phasor.
pub fn band_input(specs: &[&ComplexSpectrogram], beta: f64, dtype: DType) -> Result<BandInput> {
    let shape = batch_shape(specs)?;
    let (mut cos, mut sin) = (Vec::new(), Vec::new());
    for s in specs {
        for &c in s.values() {
            let (a, b) = phasor(c);
            cos.push(a);
            sin.push(b);
        }
    }
    Ok(BandInput {
        mag: compressed_magnitude(specs, beta, dtype)?,
        cos: to_tensor(cos, shape, dtype)?,
        sin: to_tensor(sin, shape, dtype)?,
    })
}

/// Real and imaginary parts of `|X|^β · e^{jθ}`.
pub fn compressed_ri(specs: &[&ComplexSpectrogram], beta: f64, dtype: DType) -> Result<(Tensor, Tensor)> {
    let shape = batch_shape(specs)?;
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for s in specs {
        for &c in s.values() {
            let (a, b) = phasor(c);
            let m = c.norm().powf(beta);
            re.push(m * a);
            im.push(m * b);
        }
    }
    Ok((to_tensor(re, shape, dtype)?, to_tensor(im, shape, dtype)?))
}

/// Item `b` of a `(B, 1, T, F)` tensor as a flat `f64` vector.
pub fn item_values(t: &Tensor, b: usize) -> Result<Vec<f64>> {
    Ok(t.narrow(0, b, 1)?
        .flatten_all()?
        .to_dtype(DType::F64)?
        .to_vec1::<f64>()?)
}

/// Inverts the compression of a complex spectrum given in RI form:
/// magnitude `m` becomes `m^{1/β}`, phase unchanged.
pub fn decompress_ri(re: &[f64], im: &[f64], frames: usize, bins: usize, beta: f64) -> Result<ComplexSpectrogram> {
    let values = re
        .iter()
        .zip(im)
        .map(|(&a, &b)| {
            let c = Complex64::new(a, b);
            let m = c.norm();
            if m > 0.0 {
                c * (m.powf(1.0 / beta) / m)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    ComplexSpectrogram::from_values(frames, bins, values)
}
