use std::path::Path;
use std::process::Command;

use dmfnet::audio::read_wav;
use dmfnet::cli::cli_main;
use dmfnet::metrics::MetricReport;

const TINY: &str = "preset = \"tiny\"\n[train]\nmax_steps = 2\nvalidate_every = 1\nlog_every = 0\n";

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["dmfnet"];
    full.extend_from_slice(args);
    cli_main(full)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_train_enhance_evaluate_plot() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let data = root.join("data");
    let ckpts = root.join("ckpt");

    let code = run(&[
        "synth", "--demo-clips", "2", "--demo-seconds", "1.5", "--seed", "3", "--out", s(&data), "--config", s(&cfg),
    ]);
    assert_eq!(code, 0);
    let manifest = data.join("sources").join("mixtures.jsonl");
    assert!(manifest.exists());
    for sub in ["noisy", "target_reverberant", "target_clean"] {
        assert!(data.join(sub).join("00001.wav").exists(), "{sub}");
    }

    let code = run(&["train", "--config", s(&cfg), "--train", s(&manifest), "--out", s(&ckpts)]);
    assert_eq!(code, 0);
    for stage in ["lf_dn", "lf_dr", "lf_sr", "full_mid_high"] {
        assert!(ckpts.join(format!("{stage}.safetensors")).exists(), "{stage}");
    }
    let final_ckpt = ckpts.join("full_mid_high.safetensors");

    // resuming a finished pipeline at an earlier stage is refused
    let code = run(&[
        "train", "--config", s(&cfg), "--train", s(&manifest), "--out", s(&ckpts), "--stage", "lf_dr", "--resume",
        s(&final_ckpt),
    ]);
    assert_eq!(code, 1);

    assert_eq!(run(&["info", "--ckpt", s(&final_ckpt)]), 0);

    let noisy = data.join("noisy").join("00000.wav");
    let enhanced = root.join("enhanced.wav");
    let code = run(&["enhance", "--in", s(&noisy), "--out", s(&enhanced), "--ckpt", s(&final_ckpt)]);
    assert_eq!(code, 0);
    let (a, b) = (read_wav(&noisy).unwrap(), read_wav(&enhanced).unwrap());
    assert_eq!(a.samples.len(), b.samples.len());
    assert_eq!(a.sample_rate, b.sample_rate);
    assert!(b.samples.iter().all(|v| v.is_finite()));

    let report_path = root.join("report.json");
    let code = run(&[
        "evaluate", "--pairs", s(&manifest), "--ckpt", s(&final_ckpt), "--report", s(&report_path),
    ]);
    assert_eq!(code, 0);
    let report = MetricReport::load(&report_path).unwrap();
    assert_eq!(report.clip_count, 2);
    assert_eq!(report.files.len(), 2);
    let mean = report.files.values().map(|f| f.si_snr_db).sum::<f64>() / 2.0;
    assert_eq!(report.mean.si_snr_db, mean);
    assert!(report.noisy_mean.is_some());

    let png = root.join("spec.png");
    let noisy_arg = format!("noisy={}", s(&noisy));
    let enhanced_arg = format!("enhanced={}", s(&enhanced));
    assert_eq!(run(&["plot", "--wav", &noisy_arg, "--wav", &enhanced_arg, "--out", s(&png)]), 0);
    let bytes = std::fs::read(&png).unwrap();
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_dmfnet");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["--help"]), Some(0));
    assert_eq!(status(&["enhance"]), Some(2));
    assert_eq!(status(&["no-such-command"]), Some(2));
    assert_eq!(
        status(&["enhance", "--in", "/nonexistent.wav", "--out", "/tmp/x.wav", "--ckpt", "/nonexistent.safetensors"]),
        Some(1)
    );
    assert_eq!(status(&["info"]), Some(0));
}
