use std::path::{Path, PathBuf};
use std::process::Command;

use isac_lab::run_command;
use rand::SeedableRng;
use secure_isac::channel::complex_normal;
use secure_isac::io::{
    read_azimuth_cuts, read_baseline_table, read_beampattern_grid, read_episode_trace, read_json, read_manifest,
    read_training_log, write_json, DigitalBatch, HybridBatch,
};
use secure_isac::ppo::EvalMetrics;
use secure_isac::signal_metrics::{effective_digital, total_power, DigitalBeamformers};
use secure_isac::{CMatrix, CVector};

fn scenario(name: &str) -> String {
    format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["isac-lab"];
    argv.extend_from_slice(args);
    run_command(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_fans_out_over_seed_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("train");
    assert_eq!(run(&["train", "--scenario", &scenario("tiny.toml"), "--seeds", "0..4", "--episodes", "3", "--out", s(&out)]), 0);
    for seed in 0..5 {
        let d = out.join(format!("seed-{seed}"));
        assert_eq!(read_training_log(d.join("train_log.csv")).unwrap().len(), 3);
        assert!(d.join("best.ckpt").is_file() && d.join("last.ckpt").is_file());
    }
    let m = read_manifest(out.join("manifest.json")).unwrap();
    assert_eq!(m.seeds, vec![0, 1, 2, 3, 4]);
    assert_eq!(m.command, "train");
    assert_eq!(m.products.len(), 20);
    assert_eq!(m.scenario.unwrap().rl.episodes, 3);
}

#[test]
fn eval_reports_per_uav_secrecy() {
    let dir = tempfile::tempdir().unwrap();
    let train_out = dir.path().join("train");
    let paper = scenario("paper.toml");
    assert_eq!(run(&["train", "--scenario", &paper, "--episodes", "0", "--eval-episodes", "0", "--out", s(&train_out)]), 0);
    let ckpt = train_out.join("seed-0/best.ckpt");
    let out = dir.path().join("eval");
    assert_eq!(
        run(&["eval", "--scenario", &paper, "--checkpoint", s(&ckpt), "--episodes", "1", "--trace", "--out", s(&out)]),
        0
    );
    let metrics: EvalMetrics = read_json(out.join("eval-seed-0.json")).unwrap();
    assert_eq!(metrics.per_uav_secrecy.len(), 4);
    assert!(metrics.per_uav_secrecy.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert_eq!(read_episode_trace(out.join("trace-seed-0.csv")).unwrap().len(), 200 * 4);
}

#[test]
fn decompose_random_batch_is_finite_and_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let beams: Vec<(usize, DigitalBeamformers)> = (0..4)
        .map(|k| {
            let f = CMatrix::from_fn(64, 4, |_, _| complex_normal(&mut rng));
            let w = CVector::from_fn(64, |_, _| complex_normal(&mut rng));
            (k, DigitalBeamformers::new(f, w).unwrap())
        })
        .collect();
    let input = dir.path().join("digital.json");
    write_json(&input, &DigitalBatch::new(&beams)).unwrap();
    let out = dir.path().join("dec");
    assert_eq!(run(&["decompose", "--input", s(&input), "--nrf", "8", "--power", "10", "--out", s(&out)]), 0);

    let batch: HybridBatch = read_json(out.join("hybrid.json")).unwrap();
    assert_eq!(batch.slots.len(), 4);
    for slot in &batch.slots {
        assert!(slot.residual_trace.iter().all(|r| r.is_finite()));
        let h = slot.hybrid().unwrap();
        let p = total_power(&effective_digital(&h).unwrap());
        assert!((p - 10.0).abs() < 1e-9);
        assert!(h.analog.iter().all(|z| (z.norm() - 0.125).abs() < 1e-12));
    }
    let residuals = std::fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert!(residuals.starts_with("slot,iteration,residual\n"));
}

#[test]
fn export_products_round_trip_through_readers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("export");
    assert_eq!(
        run(&["export", "--scenario", &scenario("paper.toml"), "--slot", "2", "--grid", "46x31", "--out", s(&out)]),
        0
    );
    let digital = read_beampattern_grid(out.join("seed-0-slot-2-digital-grid.csv")).unwrap();
    let hybrid = read_beampattern_grid(out.join("seed-0-slot-2-hybrid-grid.csv")).unwrap();
    assert_eq!((digital.azimuths_deg.len(), digital.elevations_deg.len()), (46, 31));
    assert_eq!((digital.slot, digital.scheme.as_str(), hybrid.scheme.as_str()), (2, "digital", "hybrid"));
    assert_eq!(read_azimuth_cuts(out.join("seed-0-slot-2-hybrid-cuts.csv")).unwrap().len(), 4);
    let summary: serde_json::Value = read_json(out.join("seed-0-slot-2-summary.json")).unwrap();
    let corr = summary["correlation"].as_f64().unwrap();
    assert!(corr > 0.0 && corr <= 1.0 + 1e-12);
    assert_eq!(read_manifest(out.join("manifest.json")).unwrap().exports.beampattern_grid, Some([46, 31]));
}

#[test]
fn baselines_table_and_missing_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = scenario("tiny.toml");
    let train_out = dir.path().join("train");
    assert_eq!(run(&["train", "--scenario", &tiny, "--episodes", "0", "--eval-episodes", "0", "--out", s(&train_out)]), 0);
    let ckpt = train_out.join("seed-0/best.ckpt");
    let out = dir.path().join("base");
    assert_eq!(
        run(&["baselines", "--scenario", &tiny, "--checkpoint", s(&ckpt), "--seeds", "0,1", "--episodes", "1", "--out", s(&out)]),
        0
    );
    let rows = read_baseline_table(out.join("baselines.csv")).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.scheme.as_str()).collect();
    assert_eq!(names, ["ppo", "matched", "random"]);
    assert!(rows.iter().all(|r| r.total_secrecy >= 0.0 && r.per_uav_secrecy.iter().all(|v| *v >= 0.0)));

    let missing = dir.path().join("nope.ckpt");
    assert_ne!(run(&["baselines", "--scenario", &tiny, "--checkpoint", s(&missing), "--out", s(&out)]), 0);
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = scenario("tiny.toml");
    assert_ne!(run(&["train", "--scenario", &tiny, "--frobnicate"]), 0);
    assert_ne!(run(&["launch"]), 0);
    assert_ne!(run(&["train", "--scenario", s(&dir.path().join("absent.toml")), "--out", s(dir.path())]), 0);
    assert_ne!(run(&["train", "--scenario", &tiny, "--seed", "1", "--seeds", "0..2"]), 0);

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert_ne!(run(&["train", "--scenario", &tiny, "--episodes", "0", "--out", s(&blocker.join("sub"))]), 0);
}

#[test]
fn binary_honours_output_root_variable() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_isac-lab"))
        .args(["train", "--scenario", &scenario("tiny.toml"), "--episodes", "1", "--eval-episodes", "1"])
        .env("ISAC_OUT_DIR", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let root: PathBuf = dir.path().join("train");
    assert!(root.join("manifest.json").is_file());
    assert!(root.join("seed-0/train_log.csv").is_file());

    let bad = Command::new(env!("CARGO_BIN_EXE_isac-lab")).arg("eval").output().unwrap();
    assert!(!bad.status.success());
    assert!(!bad.stderr.is_empty());
}
