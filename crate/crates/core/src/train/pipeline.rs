use std::path::Path;

use crate::config::DmfConfig;
use crate::data::TrainingPair;
use crate::error::Result;
use crate::model::DmfModel;

use super::stage::{run_stage, StageName, StageOutcome, TrainingStage};

/// Training and validation pairs at 48 kHz. Low-band stages use copies
/// resampled to the low-band front-end rate.
pub struct PipelineData {
    pub train: Vec<TrainingPair>,
    pub valid: Vec<TrainingPair>,
}

impl PipelineData {
    fn at_rate(&self, rate: u32) -> Result<(Vec<TrainingPair>, Vec<TrainingPair>)> {
        let conv = |v: &[TrainingPair]| -> Result<Vec<TrainingPair>> {
            v.iter().map(|p| p.resampled(rate)).collect()
        };
        Ok((conv(&self.train)?, conv(&self.valid)?))
    }
}

/// Runs the stages after `completed` up to and including `until`, in order.
/// The refinement stage is skipped when the model has no refinement network.
pub fn run_pipeline(
    model: &mut DmfModel,
    mut completed: Option<StageName>,
    until: StageName,
    data: &PipelineData,
    cfg: &DmfConfig,
    out_dir: Option<&Path>,
) -> Result<Vec<StageOutcome>> {
    let mut outcomes = Vec::new();
    let mut low = None;
    for name in StageName::ALL {
        if completed.is_some_and(|c| name <= c) || name > until {
            continue;
        }
        if name == StageName::LfSr && !model.config().use_sr {
            log::info!("skipping {name}: refinement network disabled");
            completed = Some(name);
            continue;
        }
        let stage = TrainingStage::from_config(name, cfg);
        log::info!("stage {name}: training {:?} at lr {}", stage.trainable, stage.lr);
        let outcome = if name.is_low_band() {
            if low.is_none() {
                low = Some(data.at_rate(cfg.lf_frontend.sample_rate_hz)?);
            }
            let (train, valid) = low.as_ref().expect("set above");
            run_stage(model, completed, &stage, train, valid, cfg, out_dir)?
        } else {
            run_stage(model, completed, &stage, &data.train, &data.valid, cfg, out_dir)?
        };
        log::info!(
            "stage {name}: {} steps, best validation {:.6} at step {}",
            outcome.steps_run,
            outcome.best_valid,
            outcome.best_step
        );
        completed = Some(name);
        outcomes.push(outcome);
    }
    Ok(outcomes)
}
