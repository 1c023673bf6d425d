use candle_core::Tensor;

use super::encoder::EncoderConfig;
use super::layers::{CausalDeconv2d, FrameNorm, PRelu};
use super::params::Scope;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct DecoderBlock {
    deconv: CausalDeconv2d,
    post: Option<(FrameNorm, PRelu)>,
    out_bins: usize,
}

/// Mirror of [`super::Encoder`]: each block concatenates the matching skip
/// on channels and upsamples frequency with a causal transposed conv.
#[derive(Debug, Clone)]
pub struct Decoder {
    blocks: Vec<DecoderBlock>,
    channels: usize,
    latent_bins: usize,
}

impl Decoder {
    /// `activate_output` keeps norm + PReLU on the last block; without it
    /// the last block is a plain affine map.
    pub fn new(
        mut scope: Scope<'_>,
        cfg: &EncoderConfig,
        input_bins: usize,
        out_channels: usize,
        activate_output: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        let sizes = cfg.freq_sizes(input_bins)?;
        let n = cfg.num_blocks;
        let mut blocks = Vec::with_capacity(n);
        for i in 0..n {
            let enc_block = n - 1 - i;
            let last = i + 1 == n;
            let cout = if last { out_channels } else { cfg.channels };
            let mut s = scope.sub(format!("block{i}"));
            let deconv = CausalDeconv2d::new(
                s.sub("deconv"),
                2 * cfg.channels,
                cout,
                cfg.block_kernel(enc_block),
                cfg.freq_stride,
            )?;
            let post = if !last || activate_output {
                Some((FrameNorm::new(s.sub("norm"), cout)?, PRelu::new(s.sub("act"), cout)?))
            } else {
                None
            };
            let out_bins = sizes[enc_block];
            if out_bins < deconv.natural_bins(sizes[enc_block + 1]) {
                return Err(Error::Config(format!(
                    "decoder block {i} cannot reach {out_bins} bins"
                )));
            }
            blocks.push(DecoderBlock {
                deconv,
                post,
                out_bins,
            });
        }
        Ok(Self {
            blocks,
            channels: cfg.channels,
            latent_bins: sizes[n],
        })
    }

    /// Zeroes the last transposed conv so the decoder starts out emitting
    /// zeros.
    pub fn zero_output(&self) -> Result<()> {
        self.blocks.last().expect("at least one block").deconv.zero()
    }

    pub fn forward(&self, latent: &Tensor, skips: &[Tensor]) -> Result<Tensor> {
        if skips.len() != self.blocks.len() {
            return Err(Error::shape(format!(
                "decoder needs {} skips, got {}",
                self.blocks.len(),
                skips.len()
            )));
        }
        let (b, c, t, f) = latent.dims4()?;
        if c != self.channels || f != self.latent_bins {
            return Err(Error::shape(format!(
                "latent is {c}×{f}, decoder expects {}×{}",
                self.channels, self.latent_bins
            )));
        }
        let mut h = latent.clone();
        for (block, skip) in self.blocks.iter().zip(skips.iter().rev()) {
            if skip.dims4()? != (b, self.channels, t, h.dim(3)?) {
                return Err(Error::shape(format!(
                    "skip shape {:?} does not match decoder state {:?}",
                    skip.dims(),
                    h.dims()
                )));
            }
            let x = Tensor::cat(&[&h, skip], 1)?;
            h = block.deconv.forward(&x, block.out_bins)?;
            if let Some((norm, act)) = &block.post {
                h = act.forward(&norm.forward(&h)?)?;
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::encoder::Encoder;
    use crate::nn::params::ParamStore;
    use candle_core::{DType, Device};

    #[test]
    fn restores_input_bins() {
        let cfg = EncoderConfig {
            channels: 4,
            ..Default::default()
        };
        let mut store = ParamStore::new(1, DType::F32);
        let enc = Encoder::new(Scope::new(&mut store, "enc"), &cfg, 1, 161).unwrap();
        let dec = Decoder::new(Scope::new(&mut store, "dec"), &cfg, 161, 3, false).unwrap();
        let x = Tensor::randn(0f32, 1.0, (2, 1, 5, 161), &Device::Cpu).unwrap();
        let (latent, skips) = enc.forward(&x).unwrap();
        let y = dec.forward(&latent, &skips).unwrap();
        assert_eq!(y.dims4().unwrap(), (2, 3, 5, 161));
        assert!(dec.forward(&latent, &skips[1..]).is_err());
        let mut wrong = skips.clone();
        wrong[0] = wrong[0].narrow(2, 0, 4).unwrap();
        assert!(matches!(dec.forward(&latent, &wrong), Err(Error::Shape(_))));
    }
}
