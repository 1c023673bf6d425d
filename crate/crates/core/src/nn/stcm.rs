use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::layers::{sigmoid, DilatedConv1d, FrameNorm, PRelu, Pointwise};
use super::params::Scope;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StcmConfig {
    pub groups: usize,
    pub dilations: Vec<usize>,
    pub bottleneck_channels: usize,
    pub temporal_kernel: usize,
}

impl Default for StcmConfig {
    fn default() -> Self {
        Self {
            groups: 3,
            dilations: vec![1, 2, 4, 8, 16, 32],
            bottleneck_channels: 64,
            temporal_kernel: 3,
        }
    }
}

impl StcmConfig {
    pub fn blocks_per_group(&self) -> usize {
        self.dilations.len()
    }

    /// `groups · Σ d·(kernel − 1) + 1` frames.
    pub fn receptive_field(&self) -> usize {
        self.groups * self.dilations.iter().sum::<usize>() * (self.temporal_kernel - 1) + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.bottleneck_channels == 0 || self.temporal_kernel == 0 {
            return Err(Error::Config("S-TCM sizes must be positive".into()));
        }
        if self.dilations.is_empty() {
            return Err(Error::Config("S-TCM needs at least one dilation".into()));
        }
        let ok = self.dilations.iter().all(|d| d.is_power_of_two())
            && self.dilations.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::Config(format!(
                "dilations {:?} must be strictly increasing powers of two",
                self.dilations
            )));
        }
        Ok(())
    }
}

/// Squeezed temporal block: 1×1 down to the bottleneck, gated causal
/// dilated conv, 1×1 back up, residual add.
#[derive(Debug, Clone)]
pub struct Stcm {
    squeeze: Pointwise,
    norm_in: FrameNorm,
    act_in: PRelu,
    conv: DilatedConv1d,
    norm_mid: FrameNorm,
    act_mid: PRelu,
    expand: Pointwise,
    bottleneck: usize,
}

impl Stcm {
    pub fn new(
        mut scope: Scope<'_>,
        channels: usize,
        bottleneck: usize,
        kernel: usize,
        dilation: usize,
    ) -> Result<Self> {
        Ok(Self {
            squeeze: Pointwise::new(scope.sub("squeeze"), channels, bottleneck)?,
            norm_in: FrameNorm::new(scope.sub("norm_in"), bottleneck)?,
            act_in: PRelu::new(scope.sub("act_in"), bottleneck)?,
            conv: DilatedConv1d::new(scope.sub("conv"), bottleneck, 2 * bottleneck, kernel, dilation)?,
            norm_mid: FrameNorm::new(scope.sub("norm_mid"), bottleneck)?,
            act_mid: PRelu::new(scope.sub("act_mid"), bottleneck)?,
            expand: Pointwise::new(scope.sub("expand"), bottleneck, channels)?,
            bottleneck,
        })
    }

    /// `x`: `(B, C, T)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self
            .act_in
            .forward(&self.norm_in.forward(&self.squeeze.forward(x)?)?)?;
        let c = self.conv.forward(&h)?;
        let gated = (c.narrow(1, 0, self.bottleneck)?
            * sigmoid(&c.narrow(1, self.bottleneck, self.bottleneck)?)?)?;
        let h = self.act_mid.forward(&self.norm_mid.forward(&gated)?)?;
        Ok((self.expand.forward(&h)? + x)?)
    }
}

/// All S-TCM groups applied to a `(B, C, T, F)` latent, flattened to
/// `C·F` sequence channels.
#[derive(Debug, Clone)]
pub struct StcmGroup {
    blocks: Vec<Stcm>,
    channels: usize,
}

impl StcmGroup {
    pub fn new(mut scope: Scope<'_>, cfg: &StcmConfig, channels: usize) -> Result<Self> {
        cfg.validate()?;
        let mut blocks = Vec::new();
        for g in 0..cfg.groups {
            for (i, &d) in cfg.dilations.iter().enumerate() {
                blocks.push(Stcm::new(
                    scope.sub(format!("g{g}.b{i}")),
                    channels,
                    cfg.bottleneck_channels,
                    cfg.temporal_kernel,
                    d,
                )?);
            }
        }
        Ok(Self { blocks, channels })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `x`: `(B, C, T)` with `C` the configured sequence width.
    pub fn forward_sequence(&self, x: &Tensor) -> Result<Tensor> {
        let c = x.dim(1)?;
        if c != self.channels {
            return Err(Error::shape(format!(
                "S-TCM expects {} channels, got {c}",
                self.channels
            )));
        }
        let mut h = x.clone();
        for block in &self.blocks {
            h = block.forward(&h)?;
        }
        Ok(h)
    }

    /// `latent`: `(B, C, T, F)` with `C·F` equal to the sequence width.
    pub fn forward(&self, latent: &Tensor) -> Result<Tensor> {
        let (b, c, t, f) = latent.dims4()?;
        let seq = latent
            .permute((0, 1, 3, 2))?
            .contiguous()?
            .reshape((b, c * f, t))?;
        let out = self.forward_sequence(&seq)?;
        Ok(out
            .reshape((b, c, f, t))?
            .permute((0, 1, 3, 2))?
            .contiguous()?)
    }
}
