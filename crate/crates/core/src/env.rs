//! Episodic MDP for joint digital beamforming and UAV trajectory control.
//!
//! Observation layout (all `f64`):
//!
//! ```text
//! [ Re h_0[0], Im h_0[0], ..., Re h_0[Nt-1], Im h_0[Nt-1],   legit links, then eavesdroppers
//!   ...                                                       (scaled by observation_scale)
//!   x_0, y_0, z_0, ..., x_{L-1}, y_{L-1}, z_{L-1},             legitimate UAVs   (/ POSITION_SCALE)
//!   x_A, y_A, z_A,                                             base station      (/ POSITION_SCALE)
//!   x_e, y_e, z_e, ... ]                                       eavesdroppers     (/ POSITION_SCALE)
//! ```
//!
//! Action layout, `A = 2 Nt L + 2 Nt + 2 L` reals:
//!
//! ```text
//! [ Re F[0,0], Im F[0,0], ..., Re F[Nt-1,0], Im F[Nt-1,0],   precoder column 0
//!   ...                                                       columns 1..L
//!   Re w[0], Im w[0], ..., Re w[Nt-1], Im w[Nt-1],             AN vector
//!   dx_0, dy_0, ..., dx_{L-1}, dy_{L-1} ]                      movements
//! ```

use rand_chacha::ChaCha8Rng;

use crate::channel::{realize_channels, ChannelSet};
use crate::scenario::{rng_stream, StreamPurpose};
use crate::signal_metrics::{
    covariance, secrecy_report, sensing_margin, total_power, DigitalBeamformers, NoiseProfile,
    SecrecyReport,
};
use crate::{CMatrix, CVector, Error, Result, ScenarioConfig, C64};

/// Positions enter the observation in units of this many meters.
pub const POSITION_SCALE: f64 = 100.0;

/// Value written into every beam entry when a raw action carries an all-zero
/// beam part, so that normalization stays defined.
pub const ZERO_BEAM_EPSILON: f64 = 1e-8;

pub fn observation_len(cfg: &ScenarioConfig) -> usize {
    2 * cfg.n_antennas() * (cfg.n_legit + cfg.n_eves) + 3 * cfg.n_legit + 3 + 3 * cfg.n_eves
}

pub fn action_len(cfg: &ScenarioConfig) -> usize {
    let nt = cfg.n_antennas();
    2 * nt * cfg.n_legit + 2 * nt + 2 * cfg.n_legit
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub slot: usize,
    pub legit_positions: Vec<[f64; 3]>,
    pub channels: ChannelSet,
    pub done: bool,
}

/// Power-normalized beams and clamped per-UAV moves.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedAction {
    pub beams: DigitalBeamformers,
    pub moves: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardComponents {
    pub communication: f64,
    pub sensing: f64,
    pub qos: f64,
}

impl RewardComponents {
    pub fn total(&self) -> f64 {
        self.communication + self.sensing + self.qos
    }
}

/// Everything the reward is built from for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotEvaluation {
    pub components: RewardComponents,
    pub secrecy: SecrecyReport,
    pub sensing_margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub components: RewardComponents,
    pub secrecy: SecrecyReport,
    pub sensing_margins: Vec<f64>,
    /// Positions before the move was applied.
    pub positions: Vec<[f64; 3]>,
    pub observation: Vec<f64>,
    pub done: bool,
}

/// Scores `beams` against `channels`:
/// `R_com = sum_l R_s,l`, `R_sen = -zeta sum_e [Gamma_e - P_e d_e^-2]+`,
/// `R_QoS = -sum_l [R_min - R_s,l]+`.
pub fn evaluate_slot(
    channels: &ChannelSet,
    beams: &DigitalBeamformers,
    cfg: &ScenarioConfig,
) -> Result<SlotEvaluation> {
    let noise = NoiseProfile::from_config(cfg);
    let secrecy = secrecy_report(channels, beams, &noise);
    let rx = covariance(beams);
    let sensing_margins = channels
        .eve_geometry
        .iter()
        .zip(&cfg.sensing_threshold)
        .map(|(g, &gamma)| sensing_margin(&rx, g, gamma, cfg.n_antennas_x, cfg.n_antennas_y))
        .collect::<Result<Vec<_>>>()?;
    let shortfall: f64 = sensing_margins.iter().map(|m| (-m).max(0.0)).sum();
    let qos: f64 = secrecy
        .secrecy_rates
        .iter()
        .map(|r| (cfg.qos_min_rate - r).max(0.0))
        .sum();
    let components = RewardComponents {
        communication: secrecy.sum_secrecy,
        sensing: -cfg.sensing_penalty_weight * shortfall,
        qos: -qos,
    };
    Ok(SlotEvaluation { components, secrecy, sensing_margins })
}

pub fn reward_components(
    channels: &ChannelSet,
    beams: &DigitalBeamformers,
    cfg: &ScenarioConfig,
) -> Result<RewardComponents> {
    Ok(evaluate_slot(channels, beams, cfg)?.components)
}

/// Splits a raw action into beams and moves.
///
/// Beams are scaled to exactly the power budget; each move is
/// `raw * V_max * dt` with its norm clamped to `V_max * dt`.
pub fn decode_action(raw: &[f64], cfg: &ScenarioConfig) -> Result<DecodedAction> {
    let (nt, l) = (cfg.n_antennas(), cfg.n_legit);
    if raw.len() != action_len(cfg) {
        return Err(Error::Dimension(format!(
            "action has {} entries, expected {}",
            raw.len(),
            action_len(cfg)
        )));
    }
    if let Some(i) = raw.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("action entry {i}")));
    }
    let pair = |k: usize| C64::new(raw[2 * k], raw[2 * k + 1]);
    let precoders = CMatrix::from_fn(nt, l, |i, j| pair(j * nt + i));
    let an_vector = CVector::from_fn(nt, |i, _| pair(l * nt + i));
    let beams = DigitalBeamformers { precoders, an_vector };
    let power = total_power(&beams);
    if power == 0.0 {
        return Err(Error::ZeroBeam);
    }
    let beams = beams.scaled((cfg.transmit_power_watts / power).sqrt());

    let max_step = cfg.max_step_distance();
    let move_base = 2 * nt * (l + 1);
    let moves = (0..l)
        .map(|u| {
            let dx = raw[move_base + 2 * u] * max_step;
            let dy = raw[move_base + 2 * u + 1] * max_step;
            clamp_move(dx, dy, max_step)
        })
        .collect();
    Ok(DecodedAction { beams, moves })
}

/// Like [`decode_action`], but an all-zero beam part is replaced by
/// [`ZERO_BEAM_EPSILON`] in every beam entry.
pub fn decode_or_perturb(raw: &[f64], cfg: &ScenarioConfig) -> Result<DecodedAction> {
    match decode_action(raw, cfg) {
        Err(Error::ZeroBeam) => {
            let beam_len = 2 * cfg.n_antennas() * (cfg.n_legit + 1);
            let mut patched = raw.to_vec();
            patched[..beam_len].fill(ZERO_BEAM_EPSILON);
            decode_action(&patched, cfg)
        }
        other => other,
    }
}

fn clamp_move(dx: f64, dy: f64, max_step: f64) -> [f64; 2] {
    let norm = dx.hypot(dy);
    if norm <= max_step {
        return [dx, dy];
    }
    let mut s = max_step / norm;
    // rounding can leave the rescaled vector an ulp too long
    while (dx * s).hypot(dy * s) > max_step {
        s *= 1.0 - f64::EPSILON;
    }
    [dx * s, dy * s]
}

/// Applies a move so that the realized displacement never exceeds `max_step`.
fn apply_move(pos: [f64; 3], mv: [f64; 2], max_step: f64) -> [f64; 3] {
    let mut s = 1.0;
    loop {
        let next = [pos[0] + mv[0] * s, pos[1] + mv[1] * s, pos[2]];
        if (next[0] - pos[0]).hypot(next[1] - pos[1]) <= max_step {
            return next;
        }
        s *= 1.0 - 4.0 * f64::EPSILON;
    }
}

pub struct IsacEnv {
    cfg: ScenarioConfig,
    rng: ChaCha8Rng,
    state: EnvState,
}

impl IsacEnv {
    /// Builds an environment whose fading stream is derived from `seed` and
    /// resets it to slot 0.
    pub fn new(cfg: ScenarioConfig, seed: u64) -> Result<(Self, Vec<f64>)> {
        cfg.validate()?;
        let mut rng = rng_stream(seed, StreamPurpose::ChannelFading);
        let channels = realize_channels(&cfg, &cfg.legit_init_positions, &mut rng)?;
        let state = EnvState {
            slot: 0,
            legit_positions: cfg.legit_init_positions.clone(),
            channels,
            done: false,
        };
        let env = Self { cfg, rng, state };
        let obs = env.observation();
        Ok((env, obs))
    }

    /// Starts a new episode, continuing the fading stream.
    pub fn reset(&mut self) -> Result<Vec<f64>> {
        let channels = realize_channels(&self.cfg, &self.cfg.legit_init_positions, &mut self.rng)?;
        self.state = EnvState {
            slot: 0,
            legit_positions: self.cfg.legit_init_positions.clone(),
            channels,
            done: false,
        };
        Ok(self.observation())
    }

    /// Starts a new episode on a fresh fading stream derived from `seed`.
    pub fn reset_with_seed(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.rng = rng_stream(seed, StreamPurpose::ChannelFading);
        self.reset()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn observation(&self) -> Vec<f64> {
        let cfg = &self.cfg;
        let mut obs = Vec::with_capacity(observation_len(cfg));
        let ch = &self.state.channels;
        for h in ch.legit.iter().chain(&ch.eves) {
            for z in h.iter() {
                obs.push(z.re * cfg.observation_scale);
                obs.push(z.im * cfg.observation_scale);
            }
        }
        let push_pos = |obs: &mut Vec<f64>, p: &[f64; 3]| obs.extend(p.iter().map(|c| c / POSITION_SCALE));
        for p in &self.state.legit_positions {
            push_pos(&mut obs, p);
        }
        push_pos(&mut obs, &cfg.base_position);
        for p in &cfg.eve_positions {
            push_pos(&mut obs, p);
        }
        obs
    }

    /// Scores the current slot, moves the UAVs and draws the next slot's
    /// channels. The reward uses the channels the action was chosen on.
    pub fn step(&mut self, action: &DecodedAction) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::EpisodeDone);
        }
        if action.moves.len() != self.cfg.n_legit {
            return Err(Error::Dimension(format!(
                "{} moves for {} UAVs",
                action.moves.len(),
                self.cfg.n_legit
            )));
        }
        let eval = evaluate_slot(&self.state.channels, &action.beams, &self.cfg)?;
        let max_step = self.cfg.max_step_distance();
        let before = self.state.legit_positions.clone();
        self.state.legit_positions = before
            .iter()
            .zip(&action.moves)
            .map(|(p, mv)| apply_move(*p, *mv, max_step))
            .collect();
        self.state.slot += 1;
        self.state.done = self.state.slot >= self.cfg.n_slots;
        // the next slot's channels are drawn even at the horizon so that the
        // final observation can be bootstrapped
        self.state.channels = realize_channels(&self.cfg, &self.state.legit_positions, &mut self.rng)?;
        Ok(StepOutcome {
            reward: eval.components.total(),
            components: eval.components,
            secrecy: eval.secrecy,
            sensing_margins: eval.sensing_margins,
            positions: before,
            observation: self.observation(),
            done: self.state.done,
        })
    }

    /// Clips `raw` to `[-1, 1]`, decodes it and steps.
    pub fn step_raw(&mut self, raw: &[f64]) -> Result<StepOutcome> {
        let clipped: Vec<f64> = raw.iter().map(|x| x.clamp(-1.0, 1.0)).collect();
        let action = decode_or_perturb(&clipped, &self.cfg)?;
        self.step(&action)
    }
}

/// One row of an exported episode trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub slot: usize,
    pub positions: Vec<[f64; 3]>,
    pub reward: f64,
    pub components: RewardComponents,
    pub secrecy_rates: Vec<f64>,
}

impl TraceRecord {
    pub fn from_outcome(slot: usize, out: &StepOutcome) -> Self {
        Self {
            slot,
            positions: out.positions.clone(),
            reward: out.reward,
            components: out.components,
            secrecy_rates: out.secrecy.secrecy_rates.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{default_paper_scenario, tiny_scenario};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_raw(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn paper_observation_length() {
        let cfg = default_paper_scenario();
        assert_eq!(observation_len(&cfg), 920);
        let (_, obs) = IsacEnv::new(cfg.clone(), 1).unwrap();
        assert_eq!(obs.len(), 920);
        assert_eq!(action_len(&cfg), 2 * 64 * 4 + 2 * 64 + 8);
    }

    #[test]
    fn same_seed_same_observation() {
        let cfg = default_paper_scenario();
        let (_, a) = IsacEnv::new(cfg.clone(), 42).unwrap();
        let (_, b) = IsacEnv::new(cfg, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reset_restores_initial_positions() {
        let cfg = default_paper_scenario();
        let (mut env, _) = IsacEnv::new(cfg.clone(), 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        env.step_raw(&random_raw(&mut rng, action_len(&cfg))).unwrap();
        env.reset().unwrap();
        assert_eq!(env.state().legit_positions, cfg.legit_init_positions);
        assert_eq!(env.state().legit_positions[0], [20.0, 80.0, 20.0]);
        assert_eq!(env.state().slot, 0);
    }

    #[test]
    fn observations_are_order_one() {
        let (_, obs) = IsacEnv::new(default_paper_scenario(), 9).unwrap();
        let max = obs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(max < 20.0 && max > 0.1, "{max}");
    }

    #[test]
    fn decode_scales_to_budget() {
        let cfg = tiny_scenario();
        let mut raw = vec![0.0; action_len(&cfg)];
        // beam part: 10 complex entries; put power 40 in it
        raw[0] = 4.0;
        raw[3] = (40.0_f64 - 16.0).sqrt();
        let d = decode_action(&raw, &cfg).unwrap();
        assert!((d.beams.precoders[(0, 0)].re - 2.0).abs() < 1e-15); // eta = 0.5
        assert!((total_power(&d.beams) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_move_is_clamped() {
        let cfg = tiny_scenario();
        let mut raw = vec![0.1; action_len(&cfg)];
        let n = raw.len();
        raw[n - 2] = 1.0;
        raw[n - 1] = 1.0;
        let d = decode_action(&raw, &cfg).unwrap();
        let [dx, dy] = d.moves[0];
        let max = cfg.max_step_distance();
        assert!((dx.hypot(dy) - max).abs() < 1e-12);
        assert!(dx.hypot(dy) <= max);
        assert!((dx - dy).abs() < 1e-15);
    }

    #[test]
    fn decode_errors() {
        let cfg = tiny_scenario();
        assert!(matches!(decode_action(&[0.0; 3], &cfg), Err(Error::Dimension(_))));
        let zero = vec![0.0; action_len(&cfg)];
        assert!(matches!(decode_action(&zero, &cfg), Err(Error::ZeroBeam)));
        let d = decode_or_perturb(&zero, &cfg).unwrap();
        assert!((total_power(&d.beams) - cfg.transmit_power_watts).abs() < 1e-9);
        let mut nan = vec![0.5; action_len(&cfg)];
        nan[2] = f64::NAN;
        assert!(matches!(decode_action(&nan, &cfg), Err(Error::NonFinite(_))));
    }

    #[test]
    fn zero_moves_keep_positions() {
        let cfg = default_paper_scenario();
        let (mut env, _) = IsacEnv::new(cfg.clone(), 5).unwrap();
        let mut raw = vec![0.3; action_len(&cfg)];
        let n = raw.len();
        raw[n - 8..].fill(0.0);
        env.step_raw(&raw).unwrap();
        assert_eq!(env.state().legit_positions, cfg.legit_init_positions);
        assert_eq!(env.state().slot, 1);
    }

    #[test]
    fn single_slot_episode_ends() {
        let mut cfg = tiny_scenario();
        cfg.n_slots = 1;
        let (mut env, _) = IsacEnv::new(cfg.clone(), 5).unwrap();
        let out = env.step_raw(&vec![0.2; action_len(&cfg)]).unwrap();
        assert!(out.done);
        assert!(matches!(env.step_raw(&vec![0.2; action_len(&cfg)]), Err(Error::EpisodeDone)));
    }

    #[test]
    fn displacement_and_altitude_over_many_steps() {
        let cfg = tiny_scenario();
        let max = cfg.max_step_distance();
        let (mut env, _) = IsacEnv::new(cfg.clone(), 8).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            if env.state().done {
                env.reset().unwrap();
            }
            let before = env.state().legit_positions.clone();
            let raw: Vec<f64> = (0..action_len(&cfg)).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            env.step_raw(&raw).unwrap();
            for (a, b) in before.iter().zip(&env.state().legit_positions) {
                assert!((b[0] - a[0]).hypot(b[1] - a[1]) <= max);
                assert_eq!(a[2], b[2]);
            }
        }
    }

    #[test]
    fn satisfied_constraints_leave_only_secrecy() {
        let mut cfg = tiny_scenario();
        cfg.qos_min_rate = 0.0;
        cfg.sensing_threshold = vec![1e-30];
        let (env, _) = IsacEnv::new(cfg.clone(), 1).unwrap();
        let d = decode_action(&vec![0.4; action_len(&cfg)], &cfg).unwrap();
        let ev = evaluate_slot(&env.state().channels, &d.beams, &cfg).unwrap();
        assert_eq!(ev.components.sensing, 0.0);
        assert_eq!(ev.components.qos, 0.0);
        assert_eq!(ev.components.total(), ev.secrecy.sum_secrecy);
    }

    #[test]
    fn zero_beams_fully_violate() {
        let cfg = default_paper_scenario();
        let (env, _) = IsacEnv::new(cfg.clone(), 1).unwrap();
        let beams = DigitalBeamformers::zeros(64, 4);
        let r = reward_components(&env.state().channels, &beams, &cfg).unwrap();
        assert_eq!(r.communication, 0.0);
        let want_sen = -0.5 * 3.0 * 0.5e-5;
        assert!((r.sensing - want_sen).abs() < 1e-20);
        assert_eq!(r.qos, -4.0 * cfg.qos_min_rate);
    }

    proptest! {
        #[test]
        fn decoded_power_is_budget(seed in 0u64..10_000) {
            let cfg = default_paper_scenario();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = decode_action(&random_raw(&mut rng, action_len(&cfg)), &cfg).unwrap();
            prop_assert!((total_power(&d.beams) - 10.0).abs() <= 1e-9 * 10.0);
            for [dx, dy] in d.moves {
                prop_assert!(dx.hypot(dy) <= cfg.max_step_distance());
            }
        }

        #[test]
        fn decoding_ignores_beam_scale(seed in 0u64..10_000, scale in 0.01..100.0f64) {
            let cfg = tiny_scenario();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let raw = random_raw(&mut rng, action_len(&cfg));
            let beam_len = 2 * cfg.n_antennas() * (cfg.n_legit + 1);
            let mut scaled = raw.clone();
            for x in &mut scaled[..beam_len] {
                *x *= scale;
            }
            let a = decode_action(&raw, &cfg).unwrap();
            let b = decode_action(&scaled, &cfg).unwrap();
            prop_assert_eq!(&a.moves, &b.moves);
            let diff = crate::linalg::fro2(&(&a.beams.precoders - &b.beams.precoders))
                + crate::linalg::norm2_sq(&(&a.beams.an_vector - &b.beams.an_vector));
            prop_assert!(diff.sqrt() < 1e-12);
        }
    }
}
