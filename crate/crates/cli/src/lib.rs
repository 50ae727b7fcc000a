//! `isac-lab`: command-line runner for training, evaluation, hybrid
//! decomposition, baseline comparison and beampattern export.
//!
//! Every command writes its products plus a `manifest.json` into one
//! output directory: `--out` if given, else `$ISAC_OUT_DIR/<command>`,
//! else `runs/<command>`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use secure_isac::env::{action_len, observation_len};
use secure_isac::harness::{
    beams_at_slot, compare_baselines, compare_beampatterns, record_episode, GridSpec, MatchedBeamController,
    TrainedPolicies,
};
use secure_isac::hbf::{decompose, DecomposeOptions};
use secure_isac::io::{
    read_json, write_azimuth_cuts, write_baseline_table, write_beampattern_grid, write_episode_trace, write_json,
    write_manifest, write_training_log, DigitalBatch, ExperimentManifest, ExportToggles, HybridBatch, HybridSlot,
    MANIFEST_FORMAT,
};
use secure_isac::neural::PolicyCheckpoint;
use secure_isac::ppo::{evaluate, train, Algorithm, BeamRealization, Controller, MeanPolicy};
use secure_isac::scenario::{load_scenario_file, rng_stream, StreamPurpose};
use secure_isac::signal_metrics::total_power;
use secure_isac::ScenarioConfig;

pub const OUT_DIR_ENV: &str = "ISAC_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "isac-lab", version, about = "Secure multi-UAV ISAC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone)]
struct SeedList(Vec<u64>);

/// `a..b` (inclusive) or a comma list.
fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let seeds = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad range start `{a}`: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("bad range end `{b}`: {e}"))?;
        if b < a {
            return Err(format!("empty seed range {a}..{b}"));
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse::<u64>().map_err(|e| format!("bad seed `{x}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(SeedList(seeds))
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let (a, e) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected <azimuth>x<elevation>, got `{s}`"))?;
    let a: usize = a.parse().map_err(|e| format!("bad azimuth count: {e}"))?;
    let e: usize = e.parse().map_err(|err| format!("bad elevation count: {err}"))?;
    if a < 2 || e < 2 {
        return Err("grid needs at least 2 points per axis".into());
    }
    Ok([a, e])
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed fan-out: `0..4` (inclusive) or `1,5,9`.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<SeedList>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one policy per seed.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "ppo")]
        algorithm: Algorithm,
        /// Overrides the scenario episode budget.
        #[arg(long)]
        episodes: Option<usize>,
        /// Evaluation episodes run with the best checkpoint after training.
        #[arg(long, default_value_t = 5)]
        eval_episodes: usize,
    },
    /// Evaluate a checkpoint with the deterministic policy mean.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        /// Realize every slot's beams through the hybrid decomposition.
        #[arg(long)]
        hybrid: bool,
        /// Also write the first episode's per-slot trace.
        #[arg(long)]
        trace: bool,
    },
    /// Factor a batch of digital beamformers into hybrid ones.
    Decompose {
        /// Digital batch JSON file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        nrf: usize,
        /// Power budget; defaults to the scenario's, else each slot's input power.
        #[arg(long)]
        power: Option<f64>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Seed of the analog initializations.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare trained policies against heuristic beamformers.
    Baselines {
        #[command(flatten)]
        run: RunArgs,
        /// PPO checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        a2c_checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        #[arg(long)]
        hybrid: bool,
    },
    /// Export digital and hybrid beampatterns of one slot.
    Export {
        #[command(flatten)]
        run: RunArgs,
        /// Policy whose beams are exported; the matched-beam heuristic if absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 40)]
        slot: usize,
        /// Grid resolution, azimuth x elevation.
        #[arg(long, default_value = "181x91", value_parser = parse_grid)]
        grid: [usize; 2],
        /// Also write the full episode trace.
        #[arg(long)]
        trajectory: bool,
        /// Also write every slot's digital beams as a decompose input batch.
        #[arg(long)]
        digital_batch: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Decompose { .. } => "decompose",
            Command::Baselines { .. } => "baselines",
            Command::Export { .. } => "export",
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let argv: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn resolve_out_dir(explicit: Option<&Path>, command: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(command),
    }
}

fn prepare_out_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
    std::fs::remove_file(probe)?;
    Ok(())
}

struct Loaded {
    cfg: ScenarioConfig,
    seeds: Vec<u64>,
}

fn load_run(run: &RunArgs) -> anyhow::Result<Loaded> {
    let cfg = load_scenario_file(&run.scenario).with_context(|| format!("loading scenario {}", run.scenario.display()))?;
    let seeds = match (&run.seeds, run.seed) {
        (Some(list), _) => list.0.clone(),
        (None, Some(s)) => vec![s],
        (None, None) => vec![cfg.seed],
    };
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(Loaded { cfg, seeds })
}

fn load_checkpoint(path: &Path, cfg: &ScenarioConfig) -> anyhow::Result<PolicyCheckpoint> {
    let ckpt = PolicyCheckpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let (obs, act) = (observation_len(cfg), action_len(cfg));
    if ckpt.actor.mean.input_len() != obs || ckpt.actor.mean.output_len() != act {
        bail!(
            "checkpoint {} maps {} -> {} but the scenario needs {obs} -> {act}",
            path.display(),
            ckpt.actor.mean.input_len(),
            ckpt.actor.mean.output_len()
        );
    }
    Ok(ckpt)
}

struct ManifestDraft {
    command: &'static str,
    argv: Vec<String>,
    scenario_path: Option<PathBuf>,
    seeds: Vec<u64>,
    out: PathBuf,
    exports: ExportToggles,
    scenario: Option<ScenarioConfig>,
    products: Vec<String>,
}

impl ManifestDraft {
    fn write(self) -> anyhow::Result<()> {
        let manifest = ExperimentManifest {
            format: MANIFEST_FORMAT.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            argv: self.argv,
            scenario_path: self.scenario_path.map(|p| p.display().to_string()),
            seeds: self.seeds,
            output_dir: self.out.display().to_string(),
            exports: self.exports,
            scenario: self.scenario,
            products: self.products,
        };
        write_manifest(self.out.join("manifest.json"), &manifest)?;
        Ok(())
    }
}

fn execute(command: Command, argv: Vec<String>) -> anyhow::Result<()> {
    let name = command.name();
    match command {
        Command::Train { run, algorithm, episodes, eval_episodes } => {
            let Loaded { mut cfg, seeds } = load_run(&run)?;
            if let Some(n) = episodes {
                cfg.rl.episodes = n;
            }
            let out = resolve_out_dir(run.out.as_deref(), name);
            prepare_out_dir(&out)?;
            let per_seed: Vec<Vec<String>> = seeds
                .par_iter()
                .map(|&seed| train_one(&cfg, seed, algorithm, eval_episodes, &out))
                .collect::<anyhow::Result<_>>()?;
            ManifestDraft {
                command: name,
                argv,
                scenario_path: Some(run.scenario),
                seeds,
                out,
                exports: ExportToggles { learning_curves: true, ..Default::default() },
                scenario: Some(cfg),
                products: per_seed.into_iter().flatten().collect(),
            }
            .write()
        }
        Command::Eval { run, checkpoint, episodes, hybrid, trace } => {
            let Loaded { cfg, seeds } = load_run(&run)?;
            let ckpt = load_checkpoint(&checkpoint, &cfg)?;
            let out = resolve_out_dir(run.out.as_deref(), name);
            prepare_out_dir(&out)?;
            let realization = if hybrid {
                BeamRealization::Hybrid(DecomposeOptions::default())
            } else {
                BeamRealization::FullyDigital
            };
            let mut products = Vec::new();
            for &seed in &seeds {
                let metrics = evaluate(&mut MeanPolicy(&ckpt.actor), &cfg, episodes, seed, realization)?;
                let file = format!("eval-seed-{seed}.json");
                write_json(out.join(&file), &metrics)?;
                println!(
                    "seed {seed}: mean sum secrecy {:.4} bit/s/Hz, per UAV {:?}",
                    metrics.mean_sum_secrecy, metrics.per_uav_secrecy
                );
                products.push(file);
                if trace {
                    let file = format!("trace-seed-{seed}.csv");
                    write_episode_trace(out.join(&file), &record_episode(&mut MeanPolicy(&ckpt.actor), &cfg, seed)?)?;
                    products.push(file);
                }
            }
            ManifestDraft {
                command: name,
                argv,
                scenario_path: Some(run.scenario),
                seeds,
                out,
                exports: ExportToggles { trajectory: trace, ..Default::default() },
                scenario: Some(cfg),
                products,
            }
            .write()
        }
        Command::Decompose { input, nrf, power, scenario, tol, max_iter, seed, out } => {
            let cfg = scenario
                .as_ref()
                .map(|p| load_scenario_file(p).with_context(|| format!("loading scenario {}", p.display())))
                .transpose()?;
            let budget = power.or(cfg.as_ref().map(|c| c.transmit_power_watts));
            if let Some(p) = budget {
                if !(p > 0.0 && p.is_finite()) {
                    bail!("power budget must be positive, got {p}");
                }
            }
            let batch: DigitalBatch = read_json(&input).with_context(|| format!("reading {}", input.display()))?;
            let beams = batch.beams()?;
            let out = resolve_out_dir(out.as_deref(), name);
            prepare_out_dir(&out)?;
            let opts = DecomposeOptions { tol, max_iter };
            let slots: Vec<HybridSlot> = beams
                .par_iter()
                .map(|(slot, b)| {
                    let p_t = budget.unwrap_or_else(|| total_power(b));
                    let mut rng = rng_stream(slot_seed(seed, *slot), StreamPurpose::AnalogInit);
                    let res = decompose(&b.precoders, &b.an_vector, nrf, p_t, &opts, &mut rng)
                        .with_context(|| format!("decomposing slot {slot}"))?;
                    Ok(HybridSlot::new(*slot, &res))
                })
                .collect::<anyhow::Result<_>>()?;
            for s in &slots {
                println!(
                    "slot {}: {} iterations, residual {:.3e} -> {:.3e} ({:?})",
                    s.slot,
                    s.iterations,
                    s.residual_trace[0],
                    s.residual_trace.last().unwrap(),
                    s.stop_reason
                );
            }
            write_residuals(&out.join("residuals.csv"), &slots)?;
            write_json(out.join("hybrid.json"), &HybridBatch::new(nrf, slots))?;
            ManifestDraft {
                command: name,
                argv,
                scenario_path: scenario,
                seeds: vec![seed],
                out,
                exports: ExportToggles::default(),
                scenario: cfg,
                products: vec!["hybrid.json".into(), "residuals.csv".into()],
            }
            .write()
        }
        Command::Baselines { run, checkpoint, a2c_checkpoint, episodes, hybrid } => {
            let Loaded { cfg, seeds } = load_run(&run)?;
            let ppo = load_checkpoint(&checkpoint, &cfg)?;
            let a2c = a2c_checkpoint.as_deref().map(|p| load_checkpoint(p, &cfg)).transpose()?;
            let out = resolve_out_dir(run.out.as_deref(), name);
            prepare_out_dir(&out)?;
            let realization = if hybrid {
                BeamRealization::Hybrid(DecomposeOptions::default())
            } else {
                BeamRealization::FullyDigital
            };
            let policies = TrainedPolicies { ppo: &ppo.actor, a2c: a2c.as_ref().map(|c| &c.actor) };
            let rows = compare_baselines(&cfg, &policies, &seeds, episodes, realization)?;
            for r in &rows {
                println!("{:>8}: total {:.4}, per UAV {:?}", r.scheme, r.total_secrecy, r.per_uav_secrecy);
            }
            write_baseline_table(out.join("baselines.csv"), &rows)?;
            ManifestDraft {
                command: name,
                argv,
                scenario_path: Some(run.scenario),
                seeds,
                out,
                exports: ExportToggles::default(),
                scenario: Some(cfg),
                products: vec!["baselines.csv".into()],
            }
            .write()
        }
        Command::Export { run, checkpoint, slot, grid, trajectory, digital_batch } => {
            let Loaded { cfg, seeds } = load_run(&run)?;
            let ckpt = checkpoint.as_deref().map(|p| load_checkpoint(p, &cfg)).transpose()?;
            let out = resolve_out_dir(run.out.as_deref(), name);
            prepare_out_dir(&out)?;
            let spec = GridSpec { azimuth_points: grid[0], elevation_points: grid[1], ..GridSpec::default() };
            let mut products = Vec::new();
            for &seed in &seeds {
                let mut files = match &ckpt {
                    Some(c) => export_one(&mut MeanPolicy(&c.actor), &cfg, seed, slot, &spec, trajectory, digital_batch, &out)?,
                    None => export_one(&mut MatchedBeamController, &cfg, seed, slot, &spec, trajectory, digital_batch, &out)?,
                };
                products.append(&mut files);
            }
            ManifestDraft {
                command: name,
                argv,
                scenario_path: Some(run.scenario),
                seeds,
                out,
                exports: ExportToggles { beampattern_grid: Some(grid), trajectory, learning_curves: false },
                scenario: Some(cfg),
                products,
            }
            .write()
        }
    }
}

/// Analog-initialization seed of one batch slot; independent of the order
/// in which slots are processed.
fn slot_seed(seed: u64, slot: usize) -> u64 {
    seed ^ (slot as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn write_residuals(path: &Path, slots: &[HybridSlot]) -> anyhow::Result<()> {
    let mut text = String::from("slot,iteration,residual\n");
    for s in slots {
        for (k, r) in s.residual_trace.iter().enumerate() {
            text.push_str(&format!("{},{},{}\n", s.slot, k, r));
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn train_one(cfg: &ScenarioConfig, seed: u64, algorithm: Algorithm, eval_episodes: usize, out: &Path) -> anyhow::Result<Vec<String>> {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    let dir_name = format!("seed-{seed}");
    let dir = out.join(&dir_name);
    prepare_out_dir(&dir)?;
    let mut outcome = train(&cfg, algorithm).with_context(|| format!("training seed {seed}"))?;
    let metrics = evaluate(&mut MeanPolicy(&outcome.best.actor), &cfg, eval_episodes, seed, BeamRealization::FullyDigital)?;
    outcome.report.evaluation = Some(metrics.clone());
    write_training_log(dir.join("train_log.csv"), &outcome.report)?;
    outcome.best.save(dir.join("best.ckpt"))?;
    outcome.last.save(dir.join("last.ckpt"))?;
    write_json(dir.join("eval.json"), &metrics)?;
    let r = &outcome.report;
    let summary = if r.n_episodes() > 0 {
        let k = r.n_episodes().min(50);
        format!(
            "first {k} mean {:.3}, last {k} mean {:.3}",
            r.mean_return(0..k),
            r.mean_return(r.n_episodes() - k..r.n_episodes())
        )
    } else {
        "no episodes".into()
    };
    println!(
        "seed {seed} [{}]: {} episodes, {summary}, eval sum secrecy {:.4}, {:.1}s",
        algorithm.name(),
        r.n_episodes(),
        metrics.mean_sum_secrecy,
        r.wall_clock_seconds
    );
    Ok(["train_log.csv", "best.ckpt", "last.ckpt", "eval.json"]
        .iter()
        .map(|f| format!("{dir_name}/{f}"))
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn export_one<C: Controller>(
    controller: &mut C,
    cfg: &ScenarioConfig,
    seed: u64,
    slot: usize,
    spec: &GridSpec,
    trajectory: bool,
    digital_batch: bool,
    out: &Path,
) -> anyhow::Result<Vec<String>> {
    let (channels, beams) = beams_at_slot(controller, cfg, seed, slot)?;
    let mut rng = rng_stream(seed, StreamPurpose::AnalogInit);
    let cmp = compare_beampatterns(&beams, &channels, cfg, spec, slot, &DecomposeOptions::default(), &mut rng)?;
    let prefix = format!("seed-{seed}-slot-{slot}");
    let files = [
        format!("{prefix}-digital-grid.csv"),
        format!("{prefix}-hybrid-grid.csv"),
        format!("{prefix}-digital-cuts.csv"),
        format!("{prefix}-hybrid-cuts.csv"),
        format!("{prefix}-summary.json"),
    ];
    write_beampattern_grid(out.join(&files[0]), &cmp.digital)?;
    write_beampattern_grid(out.join(&files[1]), &cmp.hybrid)?;
    write_azimuth_cuts(out.join(&files[2]), &cmp.digital_cuts)?;
    write_azimuth_cuts(out.join(&files[3]), &cmp.hybrid_cuts)?;
    let summary = serde_json::json!({
        "slot": slot,
        "seed": seed,
        "correlation": cmp.correlation,
        "residual_trace": cmp.decomposition.residual_trace,
        "iterations": cmp.decomposition.iterations,
        "stop_reason": cmp.decomposition.stop_reason,
    });
    write_json(out.join(&files[4]), &summary)?;
    println!("seed {seed} slot {slot}: digital/hybrid grid correlation {:.5}", cmp.correlation);
    let mut products = files.to_vec();
    if trajectory {
        let f = format!("trace-seed-{seed}.csv");
        write_episode_trace(out.join(&f), &record_episode(controller, cfg, seed)?)?;
        products.push(f);
    }
    if digital_batch {
        let f = format!("digital-seed-{seed}.json");
        let (mut env, _) = secure_isac::env::IsacEnv::new(cfg.clone(), seed)?;
        let mut all = Vec::with_capacity(cfg.n_slots);
        while !env.state().done {
            let action = controller.act(&env)?;
            all.push((env.state().slot, action.beams.clone()));
            env.step(&action)?;
        }
        write_json(out.join(&f), &DigitalBatch::new(&all))?;
        products.push(f);
    }
    if !cmp.correlation.is_finite() {
        return Err(anyhow!("beampattern correlation undefined (constant grid)"));
    }
    Ok(products)
}
