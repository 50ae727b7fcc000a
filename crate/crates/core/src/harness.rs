//! Experiment building blocks: heuristic controllers, beampattern grids
//! and the baseline comparison table.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{steering_vector, ChannelSet};
use crate::env::{DecodedAction, IsacEnv, TraceRecord};
use crate::hbf::{decompose, DecomposeOptions, DecompositionResult};
use crate::linalg::{fro2, norm2_sq, pinv};
use crate::neural::GaussianPolicy;
use crate::ppo::{evaluate, BeamRealization, Controller, EvalMetrics, MeanPolicy};
use crate::scenario::{rng_stream, StreamPurpose};
use crate::signal_metrics::{beampattern_at, covariance, effective_digital, DigitalBeamformers};
use crate::{CMatrix, CVector, Error, Result, ScenarioConfig, C64};

/// Matched-beam digital solution for one slot.
///
/// Precoder `l` is the array response toward legitimate UAV `l`; the AN
/// vector is the sum of the eavesdropper responses projected onto the
/// orthogonal complement of the legitimate ones. Every non-zero beam gets
/// an equal share of the power budget.
pub fn matched_beams(channels: &ChannelSet, cfg: &ScenarioConfig) -> Result<DigitalBeamformers> {
    let (nx, ny) = (cfg.n_antennas_x, cfg.n_antennas_y);
    let nt = cfg.n_antennas();
    let l = channels.n_legit();
    let responses: Vec<CVector> = channels.legit_geometry.iter().map(|g| steering_vector(g, nx, ny)).collect();
    let a = CMatrix::from_columns(&responses);

    let mut toward_eves = CVector::zeros(nt);
    for g in &channels.eve_geometry {
        toward_eves += steering_vector(g, nx, ny);
    }
    // (I - A A^+) v
    let an = &toward_eves - &a * (pinv(&a) * &toward_eves);
    let an_energy = norm2_sq(&an);
    let an_usable = an_energy > 1e-12 * norm2_sq(&toward_eves).max(f64::MIN_POSITIVE);

    let n_beams = l + usize::from(an_usable);
    let share = cfg.transmit_power_watts / n_beams as f64;
    let precoders = a * C64::new(share.sqrt(), 0.0); // steering vectors have unit norm
    let an_vector = if an_usable {
        an * C64::new((share / an_energy).sqrt(), 0.0)
    } else {
        CVector::zeros(nt)
    };
    DigitalBeamformers::new(precoders, an_vector)
}

/// Matched beams with every UAV hovering in place.
pub struct MatchedBeamController;

impl Controller for MatchedBeamController {
    fn act(&mut self, env: &IsacEnv) -> Result<DecodedAction> {
        let cfg = env.config();
        Ok(DecodedAction {
            beams: matched_beams(&env.state().channels, cfg)?,
            moves: vec![[0.0, 0.0]; cfg.n_legit],
        })
    }
}

/// Complex Gaussian beams scaled to the power budget.
pub fn random_beams<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> DigitalBeamformers {
    let nt = cfg.n_antennas();
    let precoders = CMatrix::from_fn(nt, cfg.n_legit, |_, _| crate::channel::complex_normal(rng));
    let an_vector = CVector::from_fn(nt, |_, _| crate::channel::complex_normal(rng));
    let beams = DigitalBeamformers { precoders, an_vector };
    let p = fro2(&beams.precoders) + norm2_sq(&beams.an_vector);
    beams.scaled((cfg.transmit_power_watts / p).sqrt())
}

/// Random beams with every UAV hovering in place.
pub struct RandomBeamController {
    rng: ChaCha8Rng,
}

impl RandomBeamController {
    pub fn new(seed: u64) -> Self {
        Self { rng: rng_stream(seed, StreamPurpose::Evaluation) }
    }
}

impl Controller for RandomBeamController {
    fn act(&mut self, env: &IsacEnv) -> Result<DecodedAction> {
        let cfg = env.config();
        Ok(DecodedAction {
            beams: random_beams(cfg, &mut self.rng),
            moves: vec![[0.0, 0.0]; cfg.n_legit],
        })
    }
}

/// Angular sampling of a beampattern grid, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub azimuth_points: usize,
    pub elevation_points: usize,
    pub azimuth_range_deg: (f64, f64),
    pub elevation_range_deg: (f64, f64),
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            azimuth_points: 181,
            elevation_points: 91,
            azimuth_range_deg: (-90.0, 90.0),
            elevation_range_deg: (0.0, 90.0),
        }
    }
}

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    let step = (range.1 - range.0) / (n - 1) as f64;
    (0..n).map(|k| if k + 1 == n { range.1 } else { range.0 + step * k as f64 }).collect()
}

impl GridSpec {
    pub fn azimuths_deg(&self) -> Vec<f64> {
        linspace(self.azimuth_range_deg, self.azimuth_points)
    }

    pub fn elevations_deg(&self) -> Vec<f64> {
        linspace(self.elevation_range_deg, self.elevation_points)
    }

    fn validate(&self) -> Result<()> {
        if self.azimuth_points < 2 || self.elevation_points < 2 {
            return Err(Error::Invalid(format!(
                "beampattern grid needs at least 2 points per axis, got {}x{}",
                self.azimuth_points, self.elevation_points
            )));
        }
        Ok(())
    }
}

/// Beampattern sampled on an azimuth x elevation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamGrid {
    pub slot: usize,
    pub scheme: String,
    pub azimuths_deg: Vec<f64>,
    pub elevations_deg: Vec<f64>,
    /// `values[e][a]` is the pattern at `elevations_deg[e]`, `azimuths_deg[a]`.
    pub values: Vec<Vec<f64>>,
}

impl BeamGrid {
    pub fn flat(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    /// Grid cell holding the largest value, as `(elevation index, azimuth index)`.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for (e, row) in self.values.iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                if *v > self.values[best.0][best.1] {
                    best = (e, a);
                }
            }
        }
        best
    }
}

pub fn beampattern_grid(
    rx: &CMatrix,
    cfg: &ScenarioConfig,
    spec: &GridSpec,
    slot: usize,
    scheme: &str,
) -> Result<BeamGrid> {
    spec.validate()?;
    let (nx, ny) = (cfg.n_antennas_x, cfg.n_antennas_y);
    let azimuths_deg = spec.azimuths_deg();
    let elevations_deg = spec.elevations_deg();
    let values = elevations_deg
        .iter()
        .map(|el| {
            azimuths_deg
                .iter()
                .map(|az| beampattern_at(rx, az.to_radians(), el.to_radians(), nx, ny))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BeamGrid { slot, scheme: scheme.to_string(), azimuths_deg, elevations_deg, values })
}

/// Pattern along the azimuth axis at one fixed elevation.
#[derive(Debug, Clone, PartialEq)]
pub struct AzimuthCut {
    pub uav: usize,
    pub elevation_deg: f64,
    pub azimuths_deg: Vec<f64>,
    pub values: Vec<f64>,
}

/// One azimuth cut per legitimate UAV, at that UAV's elevation.
pub fn azimuth_cuts(rx: &CMatrix, channels: &ChannelSet, cfg: &ScenarioConfig, spec: &GridSpec) -> Result<Vec<AzimuthCut>> {
    spec.validate()?;
    let azimuths_deg = spec.azimuths_deg();
    channels
        .legit_geometry
        .iter()
        .enumerate()
        .map(|(uav, g)| {
            let values = azimuths_deg
                .iter()
                .map(|az| beampattern_at(rx, az.to_radians(), g.elevation_rad, cfg.n_antennas_x, cfg.n_antennas_y))
                .collect::<Result<Vec<_>>>()?;
            Ok(AzimuthCut { uav, elevation_deg: g.elevation_rad.to_degrees(), azimuths_deg: azimuths_deg.clone(), values })
        })
        .collect()
}

/// Sample Pearson correlation; `None` when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "pearson inputs differ in length");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Digital and decomposed hybrid patterns of one slot, side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct BeampatternComparison {
    pub digital: BeamGrid,
    pub hybrid: BeamGrid,
    pub digital_cuts: Vec<AzimuthCut>,
    pub hybrid_cuts: Vec<AzimuthCut>,
    /// Pearson correlation of the two grids.
    pub correlation: f64,
    pub decomposition: DecompositionResult,
}

pub fn compare_beampatterns<R: Rng + ?Sized>(
    beams: &DigitalBeamformers,
    channels: &ChannelSet,
    cfg: &ScenarioConfig,
    spec: &GridSpec,
    slot: usize,
    opts: &DecomposeOptions,
    rng: &mut R,
) -> Result<BeampatternComparison> {
    let decomposition = decompose(&beams.precoders, &beams.an_vector, cfg.n_rf_chains, cfg.transmit_power_watts, opts, rng)?;
    let hybrid_beams = effective_digital(&decomposition.hybrid)?;
    let (rx_d, rx_h) = (covariance(beams), covariance(&hybrid_beams));
    let digital = beampattern_grid(&rx_d, cfg, spec, slot, "digital")?;
    let hybrid = beampattern_grid(&rx_h, cfg, spec, slot, "hybrid")?;
    let correlation = pearson(&digital.flat(), &hybrid.flat()).unwrap_or(f64::NAN);
    Ok(BeampatternComparison {
        digital_cuts: azimuth_cuts(&rx_d, channels, cfg, spec)?,
        hybrid_cuts: azimuth_cuts(&rx_h, channels, cfg, spec)?,
        digital,
        hybrid,
        correlation,
        decomposition,
    })
}

/// Plays one episode on the channel stream of `seed` and records every slot.
pub fn record_episode<C: Controller>(controller: &mut C, cfg: &ScenarioConfig, seed: u64) -> Result<Vec<TraceRecord>> {
    let (mut env, _) = IsacEnv::new(cfg.clone(), seed)?;
    let mut out = Vec::with_capacity(cfg.n_slots);
    while !env.state().done {
        let slot = env.state().slot;
        let action = controller.act(&env)?;
        out.push(TraceRecord::from_outcome(slot, &env.step(&action)?));
    }
    Ok(out)
}

/// Channels and digital beams the controller chooses at `slot` of the
/// first episode on the channel stream of `seed`.
pub fn beams_at_slot<C: Controller>(
    controller: &mut C,
    cfg: &ScenarioConfig,
    seed: u64,
    slot: usize,
) -> Result<(ChannelSet, DigitalBeamformers)> {
    if slot >= cfg.n_slots {
        return Err(Error::Invalid(format!("slot {slot} outside an episode of {} slots", cfg.n_slots)));
    }
    let (mut env, _) = IsacEnv::new(cfg.clone(), seed)?;
    loop {
        let action = controller.act(&env)?;
        if env.state().slot == slot {
            return Ok((env.state().channels.clone(), action.beams));
        }
        env.step(&action)?;
    }
}

/// One row of the baseline comparison, averaged over seeds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BaselineRow {
    pub scheme: String,
    pub per_uav_secrecy: Vec<f64>,
    pub total_secrecy: f64,
    pub sensing_violation_rate: f64,
    pub qos_violation_rate: f64,
}

fn average_rows(scheme: &str, runs: &[EvalMetrics]) -> BaselineRow {
    let n = runs.len() as f64;
    let l = runs.first().map_or(0, |m| m.per_uav_secrecy.len());
    let per_uav = (0..l).map(|u| runs.iter().map(|m| m.per_uav_secrecy[u]).sum::<f64>() / n).collect();
    BaselineRow {
        scheme: scheme.to_string(),
        per_uav_secrecy: per_uav,
        total_secrecy: runs.iter().map(|m| m.mean_sum_secrecy).sum::<f64>() / n,
        sensing_violation_rate: runs.iter().map(|m| m.sensing_violation_rate).sum::<f64>() / n,
        qos_violation_rate: runs.iter().map(|m| m.qos_violation_rate).sum::<f64>() / n,
    }
}

/// Trained policies to include in a comparison.
pub struct TrainedPolicies<'a> {
    pub ppo: &'a GaussianPolicy,
    pub a2c: Option<&'a GaussianPolicy>,
}

/// Evaluates every scheme on the same channel streams, one per seed.
pub fn compare_baselines(
    cfg: &ScenarioConfig,
    policies: &TrainedPolicies<'_>,
    seeds: &[u64],
    episodes: usize,
    realization: BeamRealization,
) -> Result<Vec<BaselineRow>> {
    if seeds.is_empty() {
        return Err(Error::Invalid("baseline comparison needs at least one seed".into()));
    }
    let run = |ctrl: &mut dyn FnMut(u64) -> Result<EvalMetrics>| seeds.iter().map(|s| ctrl(*s)).collect::<Result<Vec<_>>>();
    let mut rows = vec![average_rows(
        "ppo",
        &run(&mut |s| evaluate(&mut MeanPolicy(policies.ppo), cfg, episodes, s, realization))?,
    )];
    if let Some(a2c) = policies.a2c {
        rows.push(average_rows("a2c", &run(&mut |s| evaluate(&mut MeanPolicy(a2c), cfg, episodes, s, realization))?));
    }
    rows.push(average_rows(
        "matched",
        &run(&mut |s| evaluate(&mut MatchedBeamController, cfg, episodes, s, realization))?,
    ));
    rows.push(average_rows(
        "random",
        &run(&mut |s| evaluate(&mut RandomBeamController::new(s), cfg, episodes, s, realization))?,
    ));
    Ok(rows)
}
