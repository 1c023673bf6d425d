use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::layers::{sigmoid, Pointwise};
use super::params::Scope;
use crate::error::Result;

/// Gains are kept this far away from 0 and 1 so that they stay strictly
/// inside the open interval even in 32-bit arithmetic.
pub const GAIN_MARGIN: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    /// Bounded gain in (0, 1).
    Sigmoid,
    /// Unbounded filter taps.
    Linear,
}

/// Dual-path head: 1×1 conv, `tanh(a) · sigmoid(b)` gating, 1×1 conv to
/// `outputs` sheets, then the output nonlinearity of `kind`.
#[derive(Debug, Clone)]
pub struct GainHead {
    input: Pointwise,
    tanh_path: Pointwise,
    gate_path: Pointwise,
    output: Pointwise,
    kind: MaskKind,
}

impl GainHead {
    pub fn new(mut scope: Scope<'_>, channels: usize, outputs: usize, kind: MaskKind) -> Result<Self> {
        Ok(Self {
            input: Pointwise::new(scope.sub("input"), channels, channels)?,
            tanh_path: Pointwise::new(scope.sub("tanh"), channels, channels)?,
            gate_path: Pointwise::new(scope.sub("gate"), channels, channels)?,
            output: Pointwise::new(scope.sub("output"), channels, outputs)?,
            kind,
        })
    }

    /// Biases output sheet `sheet` towards 1 so the head starts close to
    /// passing that sheet's input through.
    pub fn pass_through(&self, sheet: usize) -> Result<()> {
        self.output.shift_bias(sheet, 1.0)
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    /// `(B, C, T, F) → (B, outputs, T, F)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.input.forward(x)?;
        let gated = (self.tanh_path.forward(&h)?.tanh()? * sigmoid(&self.gate_path.forward(&h)?)?)?;
        let out = self.output.forward(&gated)?;
        match self.kind {
            MaskKind::Sigmoid => Ok(sigmoid(&out)?.clamp(GAIN_MARGIN, 1.0 - GAIN_MARGIN)?),
            MaskKind::Linear => Ok(out),
        }
    }
}
