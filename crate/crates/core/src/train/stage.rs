use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use candle_core::{backprop::GradStore, Tensor, Var};
use candle_nn::optim::{AdamW, Optimizer, ParamsAdamW};
use serde::{Deserialize, Serialize};

use crate::config::DmfConfig;
use crate::data::{BatchConfig, BatchIterator, FullBatch, LfBatch, TrainingPair, WaveBatch};
use crate::error::{Error, Result};
use crate::model::{save_checkpoint, CheckpointHeader, DmfModel, Subnet};
use crate::objectives::{loss_dn, loss_dr, loss_full, loss_sr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    LfDn,
    LfDr,
    LfSr,
    FullMidHigh,
}

impl StageName {
    pub const ALL: [StageName; 4] = [
        StageName::LfDn,
        StageName::LfDr,
        StageName::LfSr,
        StageName::FullMidHigh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StageName::LfDn => "lf_dn",
            StageName::LfDr => "lf_dr",
            StageName::LfSr => "lf_sr",
            StageName::FullMidHigh => "full_mid_high",
        }
    }

    pub fn previous(self) -> Option<StageName> {
        match self {
            StageName::LfDn => None,
            StageName::LfDr => Some(StageName::LfDn),
            StageName::LfSr => Some(StageName::LfDr),
            StageName::FullMidHigh => Some(StageName::LfSr),
        }
    }

    pub fn trainable(self) -> &'static [Subnet] {
        match self {
            StageName::LfDn => &[Subnet::Dn],
            StageName::LfDr => &[Subnet::Dr],
            StageName::LfSr => &[Subnet::Sr],
            StageName::FullMidHigh => &[Subnet::Mf, Subnet::Hf],
        }
    }

    pub fn is_low_band(self) -> bool {
        self != StageName::FullMidHigh
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StageName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StageName::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown stage `{s}` (expected lf_dn, lf_dr, lf_sr or full_mid_high)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStage {
    pub name: StageName,
    pub trainable: Vec<Subnet>,
    pub frozen: Vec<Subnet>,
    pub lr: f64,
    pub max_steps: usize,
    pub patience: usize,
    pub validate_every: usize,
}

impl TrainingStage {
    /// Trains only the stage's own sub-networks; everything else is frozen.
    pub fn from_config(name: StageName, cfg: &DmfConfig) -> Self {
        let trainable = name.trainable().to_vec();
        let frozen = Subnet::ALL
            .into_iter()
            .filter(|s| !trainable.contains(s))
            .collect();
        let lr = if name.is_low_band() {
            cfg.optimizer.lr_low_band
        } else {
            cfg.optimizer.lr_full_band
        };
        Self {
            name,
            trainable,
            frozen,
            lr,
            max_steps: cfg.train.max_steps,
            patience: cfg.train.patience,
            validate_every: cfg.train.validate_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: StageName,
    /// Training loss of every step.
    pub train_losses: Vec<f64>,
    /// `(step, loss)` of every validation.
    pub valid_losses: Vec<(usize, f64)>,
    pub best_step: usize,
    pub best_valid: f64,
    pub steps_run: usize,
    /// Frozen sub-network fingerprints, verified after every step.
    pub frozen_fingerprints: Vec<(Subnet, String)>,
    pub checkpoint: Option<PathBuf>,
}

enum StageBatch {
    Low(LfBatch),
    Full(FullBatch),
}

fn prepare(batch: &WaveBatch, stage: StageName, cfg: &DmfConfig, model: &DmfModel) -> Result<StageBatch> {
    if stage.is_low_band() {
        Ok(StageBatch::Low(LfBatch::new(batch, &cfg.lf_frontend, model.dtype())?))
    } else {
        Ok(StageBatch::Full(FullBatch::new(
            batch,
            &cfg.frontend,
            &cfg.bands,
            model.dtype(),
        )?))
    }
}

fn stage_loss(model: &DmfModel, stage: StageName, batch: &StageBatch, cfg: &DmfConfig) -> Result<Tensor> {
    match (stage, batch) {
        (StageName::FullMidHigh, StageBatch::Full(b)) => {
            let lf = model.lf_forward(&b.low)?;
            let lf_mag = lf.refined_magnitude()?;
            let mid = model.mf_forward(&b.mid_mag, &lf_mag)?;
            let high = model.hf_forward(&b.high_mag, &lf_mag, &mid.estimate)?;
            loss_full(
                &mid.estimate,
                &high.estimate,
                &b.target_mid_mag,
                &b.target_high_mag,
                &cfg.loss,
            )
        }
        (StageName::LfDn, StageBatch::Low(b)) => loss_dn(&model.dn_forward(&b.input)?, &b.target_dn_mag),
        (StageName::LfDr, StageBatch::Low(b)) => {
            let dn = model.dn_forward(&b.input)?;
            loss_dr(&model.dr_forward(&b.input, &dn)?, &b.target_clean_mag)
        }
        (StageName::LfSr, StageBatch::Low(b)) => {
            let lf = model.lf_forward(&b.input)?;
            loss_sr(
                &lf.refined_re,
                &lf.refined_im,
                &b.target_clean_re,
                &b.target_clean_im,
                &cfg.loss,
            )
        }
        _ => Err(Error::Config(format!("batch does not match stage {stage}"))),
    }
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
fn clip_gradients(grads: &mut GradStore, vars: &[Var], max_norm: f64) -> Result<f64> {
    let mut sq = 0.0;
    for v in vars {
        if let Some(g) = grads.get(v.as_tensor()) {
            sq += scalar(&g.sqr()?.sum_all()?)?;
        }
    }
    let norm = sq.sqrt();
    if norm.is_finite() && norm > max_norm && max_norm > 0.0 {
        let scale = max_norm / norm;
        for v in vars {
            if let Some(g) = grads.get(v.as_tensor()) {
                let scaled = (g * scale)?;
                grads.insert(v.as_tensor(), scaled);
            }
        }
    }
    Ok(norm)
}

#[derive(Serialize)]
struct DivergenceDump<'a> {
    stage: StageName,
    step: usize,
    reason: &'a str,
    lr: f64,
    recent_losses: &'a [f64],
    param_norms: Vec<(Subnet, f64)>,
}

fn param_norms(model: &DmfModel) -> Vec<(Subnet, f64)> {
    Subnet::ALL
        .into_iter()
        .map(|s| {
            let sq: f64 = model
                .vars(s)
                .iter()
                .filter_map(|v| scalar(&v.sqr().ok()?.sum_all().ok()?).ok())
                .sum();
            (s, sq.sqrt())
        })
        .collect()
}

fn diverged(
    model: &DmfModel,
    stage: &TrainingStage,
    step: usize,
    reason: String,
    losses: &[f64],
    out_dir: Option<&Path>,
) -> Error {
    if let Some(dir) = out_dir {
        let dump = DivergenceDump {
            stage: stage.name,
            step,
            reason: &reason,
            lr: stage.lr,
            recent_losses: &losses[losses.len().saturating_sub(50)..],
            param_norms: param_norms(model),
        };
        let path = dir.join(format!("diverged_{}.json", stage.name));
        match serde_json::to_string_pretty(&dump) {
            Ok(text) => {
                if let Err(e) = std::fs::write(&path, text) {
                    log::error!("could not write {}: {e}", path.display());
                } else {
                    log::error!("diagnostics written to {}", path.display());
                }
            }
            Err(e) => log::error!("could not serialize diagnostics: {e}"),
        }
    }
    Error::Diverged { step, reason }
}

fn validation_batches(pairs: &[TrainingPair], cfg: &DmfConfig) -> Result<Vec<WaveBatch>> {
    let batch_cfg = BatchConfig {
        batch_size: cfg.train.batch_size,
        crop_seconds: cfg.train.crop_seconds,
        seed: cfg.seeds().valid,
    };
    let n = pairs.len().div_ceil(cfg.train.batch_size);
    Ok(BatchIterator::new(pairs, batch_cfg)?.take(n).collect())
}

fn mean_loss(model: &DmfModel, stage: StageName, batches: &[StageBatch], cfg: &DmfConfig) -> Result<f64> {
    let mut total = 0.0;
    for b in batches {
        total += scalar(&stage_loss(model, stage, b, cfg)?)?;
    }
    Ok(total / batches.len() as f64)
}

fn check_frozen(model: &DmfModel, expected: &[(Subnet, String)], step: usize) -> Result<()> {
    for (s, hash) in expected {
        if &model.fingerprint(*s)? != hash {
            return Err(Error::FreezeViolation(format!("{s} changed at step {step}")));
        }
    }
    Ok(())
}

/// Trains one stage. `completed` is the last stage already applied to
/// `model`; it must be the stage's predecessor. Pairs must be at the
/// stage's sample rate (16 kHz for low-band stages, 48 kHz otherwise).
/// On return the model holds the best-validation weights, which are also
/// written to `<out_dir>/<stage>.safetensors` when `out_dir` is given.
pub fn run_stage(
    model: &mut DmfModel,
    completed: Option<StageName>,
    stage: &TrainingStage,
    train: &[TrainingPair],
    valid: &[TrainingPair],
    cfg: &DmfConfig,
    out_dir: Option<&Path>,
) -> Result<StageOutcome> {
    if completed != stage.name.previous() {
        return Err(Error::Checkpoint(format!(
            "stage {} needs a model trained through {}, got {}",
            stage.name,
            stage.name.previous().map_or("nothing", |s| s.name()),
            completed.map_or("an untrained model", |s| s.name())
        )));
    }
    if stage.trainable.iter().any(|s| stage.frozen.contains(s)) {
        return Err(Error::Config("a sub-network cannot be both trainable and frozen".into()));
    }
    if stage.name == StageName::LfSr && !model.config().use_sr {
        return Err(Error::Config("the refinement network is disabled".into()));
    }
    let rate = if stage.name.is_low_band() {
        cfg.lf_frontend.sample_rate_hz
    } else {
        cfg.frontend.sample_rate_hz
    };
    for p in train.iter().chain(valid) {
        if p.sample_rate != rate {
            return Err(Error::invalid(format!(
                "stage {} expects {rate} Hz pairs, got {} Hz",
                stage.name, p.sample_rate
            )));
        }
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }

    model.unfreeze_all();
    model.freeze(&stage.frozen);
    let frozen_fingerprints: Vec<(Subnet, String)> = stage
        .frozen
        .iter()
        .map(|&s| Ok((s, model.fingerprint(s)?)))
        .collect::<Result<_>>()?;
    let vars: Vec<Var> = stage.trainable.iter().flat_map(|&s| model.vars(s)).collect();
    let mut opt = AdamW::new(
        vars.clone(),
        ParamsAdamW {
            lr: stage.lr,
            beta1: cfg.optimizer.beta1,
            beta2: cfg.optimizer.beta2,
            eps: cfg.optimizer.eps,
            weight_decay: 0.0,
        },
    )?;

    let valid_batches: Vec<StageBatch> = validation_batches(valid, cfg)?
        .iter()
        .map(|b| prepare(b, stage.name, cfg, model))
        .collect::<Result<_>>()?;
    let batch_cfg = BatchConfig {
        batch_size: cfg.train.batch_size,
        crop_seconds: cfg.train.crop_seconds,
        seed: cfg.seeds().shuffle,
    };
    let mut batches = BatchIterator::new(train, batch_cfg)?;

    let snapshot = || -> Result<Vec<Tensor>> { Ok(vars.iter().map(|v| v.as_tensor().copy()).collect::<candle_core::Result<_>>()?) };
    let mut best = snapshot()?;
    let mut best_valid = mean_loss(model, stage.name, &valid_batches, cfg)?;
    let mut best_step = 0;
    let mut valid_losses = vec![(0, best_valid)];
    let mut stale = 0;
    let mut train_losses = Vec::with_capacity(stage.max_steps);

    for step in 1..=stage.max_steps {
        let wave = batches.next().expect("batch stream is endless");
        let batch = prepare(&wave, stage.name, cfg, model)?;
        let loss = stage_loss(model, stage.name, &batch, cfg)?;
        let value = scalar(&loss)?;
        train_losses.push(value);
        if !value.is_finite() {
            return Err(diverged(model, stage, step, format!("loss is {value}"), &train_losses, out_dir));
        }
        let mut grads = loss.backward()?;
        let norm = clip_gradients(&mut grads, &vars, cfg.train.grad_clip)?;
        if !norm.is_finite() {
            return Err(diverged(model, stage, step, format!("gradient norm is {norm}"), &train_losses, out_dir));
        }
        opt.step(&grads)?;
        check_frozen(model, &frozen_fingerprints, step)?;
        if cfg.train.log_every > 0 && step % cfg.train.log_every == 0 {
            log::info!("{} step {step}: loss {value:.6} grad norm {norm:.3}", stage.name);
        }
        if step % stage.validate_every == 0 || step == stage.max_steps {
            let v = mean_loss(model, stage.name, &valid_batches, cfg)?;
            valid_losses.push((step, v));
            log::info!("{} step {step}: validation loss {v:.6}", stage.name);
            if v < best_valid {
                best_valid = v;
                best_step = step;
                best = snapshot()?;
                stale = 0;
            } else {
                stale += 1;
                if stale >= stage.patience.max(1) {
                    log::info!("{}: no improvement in {stale} validations, stopping", stage.name);
                    break;
                }
            }
        }
    }
    let steps_run = train_losses.len();
    for (v, t) in vars.iter().zip(&best) {
        v.set(t)?;
    }

    let checkpoint = match out_dir {
        Some(dir) => {
            let path = dir.join(format!("{}.safetensors", stage.name));
            let mut header = CheckpointHeader::for_model(model)?;
            header.stage = Some(stage.name.name().to_string());
            header.step = best_step;
            header.config_echo = serde_json::to_value(cfg)?;
            save_checkpoint(&path, model, &header)?;
            Some(path)
        }
        None => None,
    };
    Ok(StageOutcome {
        stage: stage.name,
        train_losses,
        valid_losses,
        best_step,
        best_valid,
        steps_run,
        frozen_fingerprints,
        checkpoint,
    })
}
