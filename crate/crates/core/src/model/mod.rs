//! DN/DR/SR low-band chain, MF/HF band maskers and the waveform-level
//! enhancement pipeline.

pub mod checkpoint;
pub mod config;
pub mod dmf;
pub mod features;
pub mod pipeline;
pub mod subnets;

pub use checkpoint::{
    config_hash, load_checkpoint, load_checkpoint_self_described, read_checkpoint_header,
    save_checkpoint, CheckpointHeader,
};
pub use config::ModelConfig;
pub use dmf::{BandInput, DmfModel, LfOutputs, MaskedBand, ParamCounts, Subnet, MAG_EPS};
pub use pipeline::{full_forward, EnhancedBands, Enhancer};
