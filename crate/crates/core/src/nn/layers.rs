//! Primitive layers over `(batch, channels, frames, bins)` and
//! `(batch, channels, frames)` tensors. Every layer is causal in time:
//! padding is only ever added before the first frame.

use candle_core::{DType, Tensor, Var, D};

use super::params::Scope;
use crate::error::{Error, Result};

pub(crate) const NORM_EPS: f64 = 1e-5;

/// Stacks `taps` time-shifted copies of `x` along channels. Slot `s` holds
/// frame `t − (taps − 1) + s`, with zeros before the first frame.
fn time_stack(x: &Tensor, taps: usize) -> Result<Tensor> {
    if taps == 1 {
        return Ok(x.clone());
    }
    let frames = x.dim(2)?;
    let padded = x.pad_with_zeros(2, taps - 1, 0)?;
    let parts = (0..taps)
        .map(|s| padded.narrow(2, s, frames))
        .collect::<candle_core::Result<Vec<_>>>()?;
    Ok(Tensor::cat(&parts, 1)?)
}

/// `(B, C, T, F) → (B·T, C, F)`.
fn frames_to_batch(x: &Tensor) -> Result<Tensor> {
    let (b, c, t, f) = x.dims4()?;
    Ok(x.permute((0, 2, 1, 3))?.contiguous()?.reshape((b * t, c, f))?)
}

/// `(B·T, C, F) → (B, C, T, F)`.
fn batch_to_frames(x: &Tensor, b: usize, t: usize) -> Result<Tensor> {
    let (_, c, f) = x.dims3()?;
    Ok(x.reshape((b, t, c, f))?.permute((0, 2, 1, 3))?.contiguous()?)
}

fn reversed(len: usize, device: &candle_core::Device) -> Result<Tensor> {
    let idx: Vec<u32> = (0..len as u32).rev().collect();
    Ok(Tensor::new(idx, device)?)
}

fn channel_shape(rank: usize, c: usize) -> Vec<usize> {
    let mut shape = vec![1; rank];
    shape[1] = c;
    shape
}

/// Valid 1-D correlation of `(N, C, L)` with `(O, C, K)`. The batch is
/// laid end to end along length and convolved as a single item; outputs
/// that straddle two items are dropped.
fn conv1d(x: &Tensor, kernel: &Tensor, stride: usize, dilation: usize) -> Result<Tensor> {
    let (n, c, len) = x.dims3()?;
    let (o, _, k) = kernel.dims3()?;
    let out = (len - dilation * (k - 1) - 1) / stride + 1;
    let padded_len = len.div_ceil(stride) * stride;
    let x = if padded_len > len {
        x.pad_with_zeros(2, 0, padded_len - len)?
    } else {
        x.clone()
    };
    let flat = x.transpose(0, 1)?.contiguous()?.reshape((1, c, n * padded_len))?;
    let y = flat.conv1d(kernel, 0, stride, dilation, 1)?;
    let per_item = padded_len / stride;
    let y = y.pad_with_zeros(2, 0, n * per_item - y.dim(2)?)?;
    Ok(y
        .reshape((o, n, per_item))?
        .narrow(2, 0, out)?
        .transpose(0, 1)?
        .contiguous()?)
}

/// 2-D convolution, causal along time (kernel `kt`, stride 1) and strided
/// without padding along frequency.
#[derive(Debug, Clone)]
pub struct CausalConv2d {
    weight: Var,
    bias: Var,
    in_channels: usize,
    out_channels: usize,
    kernel: (usize, usize),
    freq_stride: usize,
}

impl CausalConv2d {
    pub fn new(
        mut scope: Scope<'_>,
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        freq_stride: usize,
    ) -> Result<Self> {
        let (kt, kf) = kernel;
        let bound = 1.0 / ((in_channels * kt * kf) as f64).sqrt();
        let weight = scope.uniform("weight", &[out_channels, in_channels, kt, kf], bound)?;
        let bias = scope.uniform("bias", &[out_channels], bound)?;
        Ok(Self {
            weight,
            bias,
            in_channels,
            out_channels,
            kernel,
            freq_stride,
        })
    }

    pub fn output_bins(&self, bins: usize) -> Option<usize> {
        bins.checked_sub(self.kernel.1).map(|r| r / self.freq_stride + 1)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (b, c, t, f) = x.dims4()?;
        if c != self.in_channels {
            return Err(Error::shape(format!(
                "conv expects {} channels, got {c}",
                self.in_channels
            )));
        }
        if self.output_bins(f).is_none() {
            return Err(Error::shape(format!(
                "{f} bins is narrower than the kernel {}",
                self.kernel.1
            )));
        }
        let (kt, kf) = self.kernel;
        let flat = frames_to_batch(&time_stack(x, kt)?)?;
        let kernel = self
            .weight
            .permute((0, 2, 1, 3))?
            .contiguous()?
            .reshape((self.out_channels, kt * self.in_channels, kf))?;
        let y = conv1d(&flat, &kernel, self.freq_stride, 1)?;
        let y = y.broadcast_add(&self.bias.reshape((1, self.out_channels, 1))?)?;
        batch_to_frames(&y, b, t)
    }
}

/// Transposed counterpart of [`CausalConv2d`]: causal along time, stride-2
/// (or any stride) upsampling along frequency. Weight layout is
/// `(in, out, kt, kf)`. Implemented as zero insertion followed by a
/// correlation with the flipped kernel.
#[derive(Debug, Clone)]
pub struct CausalDeconv2d {
    weight: Var,
    bias: Var,
    in_channels: usize,
    out_channels: usize,
    kernel: (usize, usize),
    freq_stride: usize,
}

impl CausalDeconv2d {
    pub fn new(
        mut scope: Scope<'_>,
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        freq_stride: usize,
    ) -> Result<Self> {
        let (kt, kf) = kernel;
        if freq_stride == 0 || kf < freq_stride {
            return Err(Error::Config(format!(
                "deconv kernel width {kf} must be at least the stride {freq_stride}"
            )));
        }
        let bound = 1.0 / ((in_channels * kt * kf) as f64).sqrt();
        let weight = scope.uniform("weight", &[in_channels, out_channels, kt, kf], bound)?;
        let bias = scope.uniform("bias", &[out_channels], bound)?;
        Ok(Self {
            weight,
            bias,
            in_channels,
            out_channels,
            kernel,
            freq_stride,
        })
    }

    /// Sets weights and bias to zero, making the layer output zero.
    pub fn zero(&self) -> Result<()> {
        self.weight.set(&self.weight.zeros_like()?)?;
        self.bias.set(&self.bias.zeros_like()?)?;
        Ok(())
    }

    /// Output size without output padding: `(F − 1)·stride + kf`.
    pub fn natural_bins(&self, bins: usize) -> usize {
        (bins - 1) * self.freq_stride + self.kernel.1
    }

    /// `out_bins` may exceed the natural size by less than the stride
    /// (output padding on the high-frequency side).
    pub fn forward(&self, x: &Tensor, out_bins: usize) -> Result<Tensor> {
        let (b, c, t, f) = x.dims4()?;
        if c != self.in_channels {
            return Err(Error::shape(format!(
                "deconv expects {} channels, got {c}",
                self.in_channels
            )));
        }
        let natural = self.natural_bins(f);
        if out_bins < natural || out_bins - natural >= self.freq_stride {
            return Err(Error::shape(format!(
                "deconv from {f} bins cannot produce {out_bins} (natural size {natural})"
            )));
        }
        let (kt, kf) = self.kernel;
        let s = self.freq_stride;
        let flat = frames_to_batch(&time_stack(x, kt)?)?;
        let device = self.weight.device();
        // (out, kt·in, kf) with time taps reversed to match `time_stack`
        let kernel = self
            .weight
            .index_select(&reversed(kt, device)?, 2)?
            .permute((1, 2, 0, 3))?
            .contiguous()?
            .reshape((self.out_channels, kt * self.in_channels, kf))?;
        // output bin j·s + r sums x[j − m]·w[m·s + r]
        let phase_len = out_bins.div_ceil(s);
        let mut phases = Vec::with_capacity(s);
        for r in 0..s {
            let taps = (kf - r).div_ceil(s);
            let sub = kernel
                .index_select(&Tensor::new((0..taps).rev().map(|m| (m * s + r) as u32).collect::<Vec<_>>(), device)?, 2)?;
            let padded = flat.pad_with_zeros(2, taps - 1, phase_len.saturating_sub(f))?;
            let z = conv1d(&padded, &sub, 1, 1)?.narrow(2, 0, phase_len)?;
            phases.push(z);
        }
        let (bt, _, _) = flat.dims3()?;
        let y = if s > 1 {
            Tensor::stack(&phases, 3)?
                .reshape((bt, self.out_channels, phase_len * s))?
                .narrow(2, 0, out_bins)?
        } else {
            phases.pop().expect("one phase")
        };
        let y = y.broadcast_add(&self.bias.reshape((1, self.out_channels, 1))?)?;
        batch_to_frames(&y, b, t)
    }
}

/// Per-frame normalization with a per-channel affine map. Statistics are
/// taken over the last axis (frequency for 4-D maps) or over channels (for
/// 3-D sequences), so no frame ever sees statistics from later frames.
#[derive(Debug, Clone)]
pub struct FrameNorm {
    gamma: Var,
    beta: Var,
    channels: usize,
}

impl FrameNorm {
    pub fn new(mut scope: Scope<'_>, channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: scope.constant("gamma", &[channels], 1.0)?,
            beta: scope.constant("beta", &[channels], 0.0)?,
            channels,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let rank = x.rank();
        let dim = match rank {
            4 => 3,
            3 => 1,
            _ => return Err(Error::shape(format!("norm expects rank 3 or 4, got {rank}"))),
        };
        if x.dim(1)? != self.channels {
            return Err(Error::shape(format!(
                "norm expects {} channels, got {}",
                self.channels,
                x.dim(1)?
            )));
        }
        let mean = x.mean_keepdim(dim)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(dim)?;
        let y = centered.broadcast_div(&var.affine(1.0, NORM_EPS)?.sqrt()?)?;
        let shape = channel_shape(rank, self.channels);
        Ok(y
            .broadcast_mul(&self.gamma.reshape(shape.as_slice())?)?
            .broadcast_add(&self.beta.reshape(shape.as_slice())?)?)
    }
}

/// Per-channel parametric ReLU.
#[derive(Debug, Clone)]
pub struct PRelu {
    slope: Var,
    channels: usize,
}

impl PRelu {
    pub fn new(mut scope: Scope<'_>, channels: usize) -> Result<Self> {
        Ok(Self {
            slope: scope.constant("slope", &[channels], 0.25)?,
            channels,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let shape = channel_shape(x.rank(), self.channels);
        let slope = self.slope.reshape(shape.as_slice())?;
        let neg = x.neg()?.relu()?.broadcast_mul(&slope)?;
        Ok((x.relu()? - neg)?)
    }
}

/// 1×1 convolution over rank-3 or rank-4 maps.
#[derive(Debug, Clone)]
pub struct Pointwise {
    weight: Var,
    bias: Var,
    in_channels: usize,
    out_channels: usize,
}

impl Pointwise {
    pub fn new(mut scope: Scope<'_>, in_channels: usize, out_channels: usize) -> Result<Self> {
        let bound = 1.0 / (in_channels as f64).sqrt();
        Ok(Self {
            weight: scope.uniform("weight", &[out_channels, in_channels], bound)?,
            bias: scope.uniform("bias", &[out_channels], bound)?,
            in_channels,
            out_channels,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.dim(1)? != self.in_channels {
            return Err(Error::shape(format!(
                "1x1 conv expects {} channels, got {}",
                self.in_channels,
                x.dim(1)?
            )));
        }
        match x.rank() {
            3 => {
                let k = self.weight.reshape((self.out_channels, self.in_channels, 1))?;
                let y = conv1d(x, &k, 1, 1)?;
                Ok(y.broadcast_add(&self.bias.reshape((1, self.out_channels, 1))?)?)
            }
            4 => {
                let (b, c, t, f) = x.dims4()?;
                let y = self.forward(&x.reshape((b, c, t * f))?)?;
                Ok(y.reshape((b, self.out_channels, t, f))?)
            }
            r => Err(Error::shape(format!("1x1 conv expects rank 3 or 4, got {r}"))),
        }
    }
}

impl Pointwise {
    /// Adds `delta` to the bias of one output channel.
    pub fn shift_bias(&self, channel: usize, delta: f64) -> Result<()> {
        let mut bias = self.bias.to_dtype(DType::F64)?.to_vec1::<f64>()?;
        bias[channel] += delta;
        self.bias.set(&Tensor::new(bias, self.bias.device())?.to_dtype(self.bias.dtype())?)?;
        Ok(())
    }
}

/// Causal dilated 1-D convolution over `(B, C, T)`.
#[derive(Debug, Clone)]
pub struct DilatedConv1d {
    weight: Var,
    bias: Var,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    dilation: usize,
}

impl DilatedConv1d {
    pub fn new(
        mut scope: Scope<'_>,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
    ) -> Result<Self> {
        let bound = 1.0 / ((in_channels * kernel) as f64).sqrt();
        Ok(Self {
            weight: scope.uniform("weight", &[out_channels, in_channels, kernel], bound)?,
            bias: scope.uniform("bias", &[out_channels], bound)?,
            in_channels,
            out_channels,
            kernel,
            dilation,
        })
    }

    pub fn receptive_field(&self) -> usize {
        self.dilation * (self.kernel - 1) + 1
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, _) = x.dims3()?;
        if c != self.in_channels {
            return Err(Error::shape(format!(
                "dilated conv expects {} channels, got {c}",
                self.in_channels
            )));
        }
        let padded = x.pad_with_zeros(D::Minus1, self.dilation * (self.kernel - 1), 0)?;
        let y = conv1d(&padded, &self.weight, 1, self.dilation)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, self.out_channels, 1))?)?)
    }
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::sigmoid(x)?)
}
