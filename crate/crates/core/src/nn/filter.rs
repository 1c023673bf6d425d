use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which frames the `k` filter taps read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOffsets {
    /// Tap `τ` reads frame `l − τ`, `τ = 0..k`.
    #[default]
    CurrentAndPast,
    /// Tap `τ` reads frame `l − τ − 1`; the current frame is never used.
    PastOnly,
}

impl FilterOffsets {
    pub fn offset(self, tap: usize) -> usize {
        match self {
            Self::CurrentAndPast => tap,
            Self::PastOnly => tap + 1,
        }
    }
}

/// `out[l, f] = Σ_τ mask[τ, l, f] · mag[l − off(τ), f]`, with frames before
/// zero read as zero.
///
/// `mask`: `(B, k, T, F)`; `mag`: `(B, 1, T, F)`; result `(B, 1, T, F)`.
pub fn apply_multiframe_filter(mask: &Tensor, mag: &Tensor, offsets: FilterOffsets) -> Result<Tensor> {
    let (b, k, t, f) = mask.dims4()?;
    if mag.dims4()? != (b, 1, t, f) {
        return Err(Error::shape(format!(
            "filter mask {:?} does not match magnitude {:?}",
            mask.dims(),
            mag.dims()
        )));
    }
    if k == 0 {
        return Err(Error::shape("filter needs at least one tap"));
    }
    let mut out: Option<Tensor> = None;
    for tap in 0..k {
        let off = offsets.offset(tap);
        let shifted = if off == 0 {
            mag.clone()
        } else if off >= t {
            continue;
        } else {
            mag.pad_with_zeros(2, off, 0)?.narrow(2, 0, t)?
        };
        let term = (mask.narrow(1, tap, 1)? * shifted)?;
        out = Some(match out {
            Some(acc) => (acc + term)?,
            None => term,
        });
    }
    match out {
        Some(o) => Ok(o),
        None => Ok(mag.zeros_like()?),
    }
}
