use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::layers::{CausalConv2d, FrameNorm, PRelu};
use super::params::Scope;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_blocks: usize,
    pub channels: usize,
    /// `(time, freq)` kernel of the first block.
    pub first_kernel: (usize, usize),
    pub kernel: (usize, usize),
    pub freq_stride: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            num_blocks: 5,
            channels: 64,
            first_kernel: (2, 5),
            kernel: (2, 3),
            freq_stride: 2,
        }
    }
}

impl EncoderConfig {
    pub fn block_kernel(&self, i: usize) -> (usize, usize) {
        if i == 0 {
            self.first_kernel
        } else {
            self.kernel
        }
    }

    /// Frequency sizes at every block boundary, input first:
    /// `⌊(F − kf) / stride⌋ + 1` per block.
    pub fn freq_sizes(&self, input_bins: usize) -> Result<Vec<usize>> {
        let mut sizes = vec![input_bins];
        for i in 0..self.num_blocks {
            let f = *sizes.last().unwrap();
            let kf = self.block_kernel(i).1;
            if f < kf {
                return Err(Error::shape(format!(
                    "encoder block {i} receives {f} bins, fewer than its kernel {kf}"
                )));
            }
            sizes.push((f - kf) / self.freq_stride + 1);
        }
        Ok(sizes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 || self.channels == 0 || self.freq_stride == 0 {
            return Err(Error::Config("encoder sizes must be positive".into()));
        }
        if self.first_kernel.0 == 0 || self.kernel.0 == 0 {
            return Err(Error::Config("time kernel must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct EncoderBlock {
    conv: CausalConv2d,
    norm: FrameNorm,
    act: PRelu,
}

/// Stack of strided causal conv blocks, each followed by per-frame norm and
/// PReLU.
#[derive(Debug, Clone)]
pub struct Encoder {
    blocks: Vec<EncoderBlock>,
    input_bins: usize,
}

impl Encoder {
    pub fn new(
        mut scope: Scope<'_>,
        cfg: &EncoderConfig,
        in_channels: usize,
        input_bins: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        cfg.freq_sizes(input_bins)?;
        let mut blocks = Vec::with_capacity(cfg.num_blocks);
        for i in 0..cfg.num_blocks {
            let cin = if i == 0 { in_channels } else { cfg.channels };
            let mut s = scope.sub(format!("block{i}"));
            blocks.push(EncoderBlock {
                conv: CausalConv2d::new(
                    s.sub("conv"),
                    cin,
                    cfg.channels,
                    cfg.block_kernel(i),
                    cfg.freq_stride,
                )?,
                norm: FrameNorm::new(s.sub("norm"), cfg.channels)?,
                act: PRelu::new(s.sub("act"), cfg.channels)?,
            });
        }
        Ok(Self { blocks, input_bins })
    }

    /// Returns the latent map and the per-block outputs, outermost first.
    /// The last skip is the latent itself.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let f = x.dim(3)?;
        if f != self.input_bins {
            return Err(Error::shape(format!(
                "encoder expects {} bins, got {f}",
                self.input_bins
            )));
        }
        let mut h = x.clone();
        let mut skips = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            h = b.act.forward(&b.norm.forward(&b.conv.forward(&h)?)?)?;
            skips.push(h.clone());
        }
        Ok((h, skips))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamStore;
    use candle_core::{DType, Device};

    #[test]
    fn size_table_for_161_bins() {
        let sizes = EncoderConfig::default().freq_sizes(161).unwrap();
        assert_eq!(sizes, vec![161, 79, 39, 19, 9, 4]);
        assert!(EncoderConfig::default().freq_sizes(20).is_err());
    }

    #[test]
    fn forward_shapes_and_time_preserved() {
        let cfg = EncoderConfig {
            channels: 4,
            ..Default::default()
        };
        let mut store = ParamStore::new(0, DType::F32);
        let enc = Encoder::new(Scope::new(&mut store, "enc"), &cfg, 2, 161).unwrap();
        for t in [3usize, 6] {
            let x = Tensor::ones((1, 2, t, 161), DType::F32, &Device::Cpu).unwrap();
            let (latent, skips) = enc.forward(&x).unwrap();
            assert_eq!(latent.dims4().unwrap(), (1, 4, t, 4));
            let bins: Vec<usize> = skips.iter().map(|s| s.dim(3).unwrap()).collect();
            assert_eq!(bins, vec![79, 39, 19, 9, 4]);
        }
        let bad = Tensor::ones((1, 2, 3, 160), DType::F32, &Device::Cpu).unwrap();
        assert!(matches!(enc.forward(&bad), Err(Error::Shape(_))));
    }
}
