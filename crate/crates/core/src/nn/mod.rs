//! Network building blocks: causal convolutions, the temporal
//! bottleneck and the mask/filter heads.

pub mod decoder;
pub mod encoder;
pub mod filter;
pub mod layers;
pub mod mask;
pub mod params;
pub mod stcm;

pub use decoder::Decoder;
pub use encoder::{Encoder, EncoderConfig};
pub use filter::{apply_multiframe_filter, FilterOffsets};
pub use layers::{CausalConv2d, CausalDeconv2d, DilatedConv1d, FrameNorm, PRelu, Pointwise};
pub use mask::{GainHead, MaskKind};
pub use params::{ParamStore, Scope};
pub use stcm::{Stcm, StcmConfig, StcmGroup};
