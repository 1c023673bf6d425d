use candle_core::Tensor;

use super::config::ModelConfig;
use crate::error::Result;
use crate::nn::{Decoder, Encoder, GainHead, MaskKind, Scope, StcmGroup};

/// Encoder → S-TCM stack → decoder → dual-path head. Used for DN, DR
/// (linear filter taps) and MF, HF (bounded gains).
#[derive(Debug, Clone)]
pub struct MaskNet {
    encoder: Encoder,
    tcm: StcmGroup,
    decoder: Decoder,
    head: GainHead,
}

impl MaskNet {
    pub fn new(
        mut scope: Scope<'_>,
        cfg: &ModelConfig,
        in_channels: usize,
        outputs: usize,
        kind: MaskKind,
    ) -> Result<Self> {
        let c = cfg.encoder.channels;
        Ok(Self {
            encoder: Encoder::new(scope.sub("enc"), &cfg.encoder, in_channels, cfg.band_bins)?,
            tcm: StcmGroup::new(scope.sub("tcm"), &cfg.stcm, cfg.sequence_channels()?)?,
            decoder: Decoder::new(scope.sub("dec"), &cfg.encoder, cfg.band_bins, c, true)?,
            head: GainHead::new(scope.sub("head"), c, outputs, kind)?,
        })
    }

    /// Biases the first output sheet towards 1. For filter taps this
    /// starts the network near the identity filter.
    pub fn pass_through(&self) -> Result<()> {
        self.head.pass_through(0)
    }

    /// `(B, in, T, F) → (B, outputs, T, F)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (latent, skips) = self.encoder.forward(x)?;
        let latent = self.tcm.forward(&latent)?;
        let features = self.decoder.forward(&latent, &skips)?;
        self.head.forward(&features)
    }
}

/// Shared encoder and S-TCM stack with separate real and imaginary
/// decoders.
#[derive(Debug, Clone)]
pub struct RefineNet {
    encoder: Encoder,
    tcm: StcmGroup,
    real: Decoder,
    imag: Decoder,
}

impl RefineNet {
    pub fn new(mut scope: Scope<'_>, cfg: &ModelConfig, in_channels: usize) -> Result<Self> {
        let net = Self {
            encoder: Encoder::new(scope.sub("enc"), &cfg.encoder, in_channels, cfg.band_bins)?,
            tcm: StcmGroup::new(scope.sub("tcm"), &cfg.stcm, cfg.sequence_channels()?)?,
            real: Decoder::new(scope.sub("dec_re"), &cfg.encoder, cfg.band_bins, 1, false)?,
            imag: Decoder::new(scope.sub("dec_im"), &cfg.encoder, cfg.band_bins, 1, false)?,
        };
        // the residual starts at zero, so refinement begins from its input
        net.real.zero_output()?;
        net.imag.zero_output()?;
        Ok(net)
    }

    /// Returns the real and imaginary residuals, each `(B, 1, T, F)`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let (latent, skips) = self.encoder.forward(x)?;
        let latent = self.tcm.forward(&latent)?;
        Ok((self.real.forward(&latent, &skips)?, self.imag.forward(&latent, &skips)?))
    }
}
