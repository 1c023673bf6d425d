//! Command-line interface: `synth`, `train`, `enhance`, `evaluate`, `plot`
//! and `info`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use candle_core::DType;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::audio::{read_wav, write_wav, Audio};
use crate::config::{DmfConfig, CONFIG_ENV};
use crate::data::{generate_corpus, synthesize_all, CorpusConfig, Manifest, Split, TrainingPair};
use crate::error::{Error, Result};
use crate::figure::emit_spectrogram_figure;
use crate::frontend::stft;
use crate::metrics::{lsd, si_snr, stoi, FileMetrics, MetricReport, StoiVariant};
use crate::model::{load_checkpoint_self_described, read_checkpoint_header, CheckpointHeader, DmfModel, Enhancer, Subnet};
use crate::resample::resample;
use crate::train::{run_pipeline, PipelineData, StageName};

/// Rate at which STOI inputs are prepared before scoring.
const STOI_EVAL_RATE: u32 = 16_000;

#[derive(Parser, Debug)]
#[command(name = "dmfnet", version, about = "Full-band speech denoising and dereverberation")]
pub struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize noisy/target pairs from a mixture manifest.
    Synth(SynthArgs),
    /// Train one stage or the remaining stages of the pipeline.
    Train(TrainArgs),
    /// Enhance one WAV file.
    Enhance(EnhanceArgs),
    /// Score a checkpoint on a mixture manifest.
    Evaluate(EvaluateArgs),
    /// Draw spectrograms of one or more WAV files into a PNG.
    Plot(PlotArgs),
    /// Print parameter counts per sub-network.
    Info(InfoArgs),
}

#[derive(Args, Debug)]
pub struct ConfigArg {
    /// TOML configuration; falls back to $DMFNET_CONFIG, then the standard preset.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON-lines mixture manifest.
    #[arg(long, required_unless_present = "demo_clips")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Early-reflection window kept in the clean target, in ms.
    #[arg(long)]
    pub early_ms: Option<f64>,
    /// Mixed into every record's seed when given.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generate this many synthetic source clips under OUT/sources and use
    /// their manifest instead of --manifest.
    #[arg(long, conflicts_with = "manifest")]
    pub demo_clips: Option<usize>,
    /// Clip length for --demo-clips, in seconds.
    #[arg(long, default_value_t = 4.0)]
    pub demo_seconds: f64,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Stage to train: lf_dn, lf_dr, lf_sr, full_mid_high, or `all` for
    /// every stage after the resumed one.
    #[arg(long, default_value = "all")]
    pub stage: String,
    /// Checkpoint of the previous stage.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Training mixture manifest.
    #[arg(long)]
    pub train: PathBuf,
    /// Validation mixture manifest; defaults to the training manifest.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Directory for stage checkpoints.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EnhanceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub ckpt: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Mixture manifest whose pairs are synthesized and scored.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Use extended STOI instead of the classic measure.
    #[arg(long)]
    pub extended_stoi: bool,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// `label=path.wav`, repeated once per panel.
    #[arg(long = "wav", required = true)]
    pub wavs: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    /// Checkpoint to describe; without it the configured model is built.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code: 0 on success, 2 on usage errors, 1 on
/// runtime errors.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp_secs()
        .try_init();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Enhance(a) => enhance(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Plot(a) => plot(a),
        Command::Info(a) => info(a),
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn synthesize_manifest(path: &Path, split: Split, cfg: &DmfConfig) -> Result<(Manifest, Vec<TrainingPair>)> {
    let manifest = Manifest::load(path, split)?;
    let pairs = synthesize_all(&manifest, &cfg.data)?;
    if pairs.is_empty() {
        return Err(Error::invalid(format!("{}: no usable mixtures", path.display())));
    }
    Ok((manifest, pairs))
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = DmfConfig::resolve(a.config.config.as_deref())?;
    if let Some(ms) = a.early_ms {
        cfg.data.early_ms = ms;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&a.out)?;
    let mut manifest = match (&a.manifest, a.demo_clips) {
        (_, Some(n)) => {
            let corpus = CorpusConfig {
                clips: n,
                seconds: a.demo_seconds,
                seed: a.seed.unwrap_or(0),
                ..CorpusConfig::default()
            };
            generate_corpus(a.out.join("sources"), "mixtures", &corpus)?
        }
        (Some(path), None) => Manifest::load(path, Split::Train)?,
        (None, None) => return Err(Error::Config("either --manifest or --demo-clips is required".into())),
    };
    if let (Some(seed), None) = (a.seed, a.demo_clips) {
        for r in &mut manifest.records {
            r.seed = splitmix(r.seed ^ seed);
        }
    }
    let pairs = synthesize_all(&manifest, &cfg.data)?;
    for sub in ["noisy", "target_reverberant", "target_clean"] {
        std::fs::create_dir_all(a.out.join(sub))?;
    }
    let mut summary = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let name = format!("{i:05}.wav");
        write_wav(a.out.join("noisy").join(&name), &Audio::new(p.noisy.clone(), p.sample_rate))?;
        write_wav(
            a.out.join("target_reverberant").join(&name),
            &Audio::new(p.target_denoised_reverberant.clone(), p.sample_rate),
        )?;
        write_wav(a.out.join("target_clean").join(&name), &Audio::new(p.target_clean.clone(), p.sample_rate))?;
        summary.push(serde_json::json!({
            "file": name,
            "snr_db": p.snr_db,
            "rir_id": p.rir_id,
            "language": p.language,
        }));
    }
    std::fs::write(a.out.join("pairs.json"), serde_json::to_string_pretty(&summary)?)?;
    log::info!(
        "wrote {} of {} pairs to {}",
        pairs.len(),
        manifest.records.len(),
        a.out.display()
    );
    Ok(())
}

/// Configuration stored with a checkpoint, or the standard preset around the
/// checkpoint's model when none was stored.
pub fn checkpoint_config(header: &CheckpointHeader) -> DmfConfig {
    match serde_json::from_value::<DmfConfig>(header.config_echo.clone()) {
        Ok(cfg) if cfg.model == header.model => cfg,
        _ => DmfConfig {
            model: header.model.clone(),
            ..DmfConfig::standard()
        },
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = DmfConfig::resolve(a.config.config.as_deref())?;
    let (mut model, completed) = match &a.resume {
        Some(path) => {
            let (model, header) = crate::model::load_checkpoint(path, &cfg.model, DType::F32)?;
            let completed = header
                .stage
                .as_deref()
                .map(str::parse::<StageName>)
                .transpose()?;
            (model, completed)
        }
        None => (DmfModel::new(&cfg.model, cfg.seeds().init, DType::F32)?, None),
    };
    let (first, until) = if a.stage == "all" {
        (None, StageName::FullMidHigh)
    } else {
        let s: StageName = a.stage.parse()?;
        (Some(s), s)
    };
    if let Some(s) = first {
        let skipped_sr = s == StageName::FullMidHigh && completed == Some(StageName::LfDr) && !cfg.model.use_sr;
        if completed != s.previous() && !skipped_sr {
            return Err(Error::Checkpoint(format!(
                "stage {s} must resume from a {} checkpoint",
                s.previous().map_or("fresh model (no --resume)", |p| p.name())
            )));
        }
    }
    let (_, train) = synthesize_manifest(&a.train, Split::Train, &cfg)?;
    let valid = match &a.valid {
        Some(p) => synthesize_manifest(p, Split::Valid, &cfg)?.1,
        None => train.clone(),
    };
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("config.toml"), cfg.to_toml_string()?)?;
    let data = PipelineData { train, valid };
    let outcomes = run_pipeline(&mut model, completed, until, &data, &cfg, Some(&a.out))?;
    for o in &outcomes {
        println!(
            "{}: {} steps, best validation loss {:.6} at step {}{}",
            o.stage,
            o.steps_run,
            o.best_valid,
            o.best_step,
            o.checkpoint
                .as_ref()
                .map(|p| format!(", saved {}", p.display()))
                .unwrap_or_default()
        );
    }
    Ok(())
}

fn load_for_inference(path: &Path) -> Result<(DmfModel, DmfConfig)> {
    let (model, header) = load_checkpoint_self_described(path, DType::F32)?;
    if header.stage.as_deref() != Some(StageName::FullMidHigh.name()) {
        log::warn!(
            "{} was saved after stage {}; the mid/high networks may be untrained",
            path.display(),
            header.stage.as_deref().unwrap_or("none")
        );
    }
    Ok((model, checkpoint_config(&header)))
}

/// Enhances `samples` at any rate, resampling to and from the model rate.
fn enhance_any_rate(enhancer: &Enhancer, samples: &[f32], rate: u32) -> Result<Vec<f32>> {
    let model_rate = enhancer.frontend().sample_rate_hz;
    if rate == model_rate {
        return enhancer.enhance(samples, rate);
    }
    let up = resample(&to_f64(samples), rate, model_rate)?;
    let up: Vec<f32> = up.into_iter().map(|v| v as f32).collect();
    let out = enhancer.enhance(&up, model_rate)?;
    let mut back = resample(&to_f64(&out), model_rate, rate)?;
    back.resize(samples.len(), 0.0);
    Ok(back.into_iter().map(|v| v as f32).collect())
}

fn to_f64(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

fn enhance(a: EnhanceArgs) -> Result<()> {
    let (model, cfg) = load_for_inference(&a.ckpt)?;
    let enhancer = Enhancer::new(&model, &cfg.frontend, &cfg.bands)?;
    let input = read_wav(&a.input)?;
    let out = enhance_any_rate(&enhancer, &input.samples, input.sample_rate)?;
    write_wav(&a.out, &Audio::new(out, input.sample_rate))?;
    log::info!("wrote {}", a.out.display());
    Ok(())
}

/// SI-SNR and full-band LSD at the model rate; STOI at 16 kHz.
pub fn score(estimate: &[f32], reference: &[f32], rate: u32, cfg: &DmfConfig, variant: StoiVariant) -> Result<FileMetrics> {
    let (e, r) = (to_f64(estimate), to_f64(reference));
    let si = si_snr(&e, &r)?;
    let e16 = resample(&e, rate, STOI_EVAL_RATE)?;
    let r16 = resample(&r, rate, STOI_EVAL_RATE)?;
    let st = stoi(&e16, &r16, STOI_EVAL_RATE, variant)?;
    let d = lsd(&stft(estimate, &cfg.frontend)?, &stft(reference, &cfg.frontend)?, None)?;
    Ok(FileMetrics::new(si, st, d))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (model, cfg) = load_for_inference(&a.ckpt)?;
    let (manifest, pairs) = synthesize_manifest(&a.pairs, Split::Test, &cfg)?;
    let variant = if a.extended_stoi {
        StoiVariant::Extended
    } else {
        StoiVariant::Classic
    };
    let enhancer = Enhancer::new(&model, &cfg.frontend, &cfg.bands)?;
    let rows: Vec<(String, FileMetrics, FileMetrics)> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let name = format!("{i:05}");
            let out = enhance_any_rate(&enhancer, &p.noisy, p.sample_rate)?;
            let enhanced = score(&out, &p.target_clean, p.sample_rate, &cfg, variant)?;
            let noisy = score(&p.noisy, &p.target_clean, p.sample_rate, &cfg, variant)?;
            Ok((name, enhanced, noisy))
        })
        .collect::<Result<_>>()?;
    let mut files = BTreeMap::new();
    let mut noisy = Vec::new();
    for (name, e, n) in rows {
        files.insert(name, e);
        noisy.push(n);
    }
    let echo = serde_json::json!({
        "checkpoint": a.ckpt.display().to_string(),
        "manifest": a.pairs.display().to_string(),
        "records": manifest.records.len(),
        "config": serde_json::to_value(&cfg)?,
    });
    let report = MetricReport::new(files, variant, echo)?.with_noisy_reference(noisy.iter());
    report.save(&a.report)?;
    println!(
        "{} clips: SI-SNR {:.2} dB, STOI {:.4}, LSD {:.2} dB",
        report.clip_count, report.mean.si_snr_db, report.mean.stoi, report.mean.lsd_db
    );
    if let Some(n) = &report.noisy_mean {
        println!(
            "unprocessed: SI-SNR {:.2} dB, STOI {:.4}, LSD {:.2} dB",
            n.si_snr_db, n.stoi, n.lsd_db
        );
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let cfg = DmfConfig::standard();
    let mut clips = Vec::new();
    for spec in &a.wavs {
        let (label, path) = match spec.split_once('=') {
            Some((l, p)) => (l.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                (stem, p)
            }
        };
        let audio = read_wav(&path)?;
        let samples = if audio.sample_rate == cfg.frontend.sample_rate_hz {
            audio.samples
        } else {
            resample(&to_f64(&audio.samples), audio.sample_rate, cfg.frontend.sample_rate_hz)?
                .into_iter()
                .map(|v| v as f32)
                .collect()
        };
        clips.push((label, samples, cfg.frontend.sample_rate_hz));
    }
    let fig = emit_spectrogram_figure(&clips, &cfg.frontend, &a.out)?;
    log::info!(
        "wrote {} ({} panels, {:.1} to {:.1} dB)",
        a.out.display(),
        fig.panels.len(),
        fig.db_min,
        fig.db_max
    );
    Ok(())
}

fn info(a: InfoArgs) -> Result<()> {
    let (model, origin) = match &a.ckpt {
        Some(path) => {
            let header = read_checkpoint_header(path)?;
            let (model, _) = load_checkpoint_self_described(path, DType::F32)?;
            let stage = header.stage.unwrap_or_else(|| "none".into());
            (model, format!("{} (stage {stage}, step {})", path.display(), header.step))
        }
        None => {
            let cfg = DmfConfig::resolve(a.config.config.as_deref())?;
            let model = DmfModel::new(&cfg.model, cfg.seeds().init, DType::F32)?;
            (model, format!("preset {}", cfg.preset))
        }
    };
    let counts = model.count_parameters();
    println!("{origin}");
    for s in Subnet::ALL {
        println!("  {:<3} {:>10}", s.name(), counts.get(s));
    }
    println!("  total {:>8} ({:.2} M)", counts.total(), counts.total() as f64 / 1e6);
    Ok(())
}
