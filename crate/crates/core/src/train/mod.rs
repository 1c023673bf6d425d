//! Staged training: three low-band sub-stages at 16 kHz, then the joint
//! mid/high stage at 48 kHz with the low band frozen.

pub mod pipeline;
pub mod stage;

pub use pipeline::{run_pipeline, PipelineData};
pub use stage::{run_stage, StageName, StageOutcome, TrainingStage};
