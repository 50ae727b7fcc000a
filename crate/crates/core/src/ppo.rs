//! On-policy actor-critic training: rollout collection, generalized
//! advantage estimation, the clipped PPO surrogate and an A2C variant, plus
//! deterministic evaluation.
//!
//! Episodes end at the slot horizon, which is a time limit rather than an
//! absorbing state, so the last transition of an episode bootstraps from
//! the critic's value of the final observation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::env::{action_len, decode_or_perturb, observation_len, DecodedAction, IsacEnv, RewardComponents};
use crate::hbf::{decompose, DecomposeOptions};
use crate::neural::{adam_step, gaussian_log_prob, AdamState, GaussianPolicy, Mlp, PolicyCheckpoint};
use crate::scenario::{rng_stream, StreamPurpose};
use crate::signal_metrics::{effective_digital, DigitalBeamformers};
use crate::{Error, Result, ScenarioConfig};

/// On-policy transitions from the current policy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub observations: Vec<Vec<f64>>,
    /// Sampled actions before clipping to the action box.
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// Critic value of the observation that followed each transition.
    pub next_values: Vec<f64>,
    /// True on the last transition of an episode, and on the last
    /// transition of the buffer.
    pub boundaries: Vec<bool>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.next_values.clear();
        self.boundaries.clear();
    }
}

/// Summary of one finished episode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeStats {
    pub total_return: f64,
    pub components: RewardComponents,
}

/// Environment plus the bookkeeping needed to continue an episode across
/// collection phases.
pub struct EpisodeRunner {
    env: IsacEnv,
    obs: Vec<f64>,
    running: EpisodeStats,
    finished: Vec<EpisodeStats>,
}

impl EpisodeRunner {
    pub fn new(cfg: ScenarioConfig, seed: u64) -> Result<Self> {
        let (env, obs) = IsacEnv::new(cfg, seed)?;
        Ok(Self { env, obs, running: EpisodeStats::default(), finished: Vec::new() })
    }

    pub fn env(&self) -> &IsacEnv {
        &self.env
    }

    /// Episodes completed since the last call.
    pub fn take_finished(&mut self) -> Vec<EpisodeStats> {
        std::mem::take(&mut self.finished)
    }
}

/// Runs the stochastic policy for exactly `batch_size` transitions.
pub fn collect_rollout<R: Rng + ?Sized>(
    runner: &mut EpisodeRunner,
    actor: &GaussianPolicy,
    critic: &Mlp,
    batch_size: usize,
    buffer: &mut RolloutBuffer,
    rng: &mut R,
) -> Result<()> {
    buffer.clear();
    for t in 0..batch_size {
        let obs = std::mem::take(&mut runner.obs);
        let value = critic.predict(&obs)?[0];
        let (action, log_prob) = actor.sample(&obs, rng)?;
        let out = runner.env.step_raw(&action)?;
        runner.running.total_return += out.reward;
        runner.running.components.communication += out.components.communication;
        runner.running.components.sensing += out.components.sensing;
        runner.running.components.qos += out.components.qos;

        let last_in_buffer = t + 1 == batch_size;
        let next_value = if out.done || last_in_buffer {
            critic.predict(&out.observation)?[0]
        } else {
            f64::NAN // filled from the next transition's value below
        };
        buffer.observations.push(obs);
        buffer.actions.push(action);
        buffer.log_probs.push(log_prob);
        buffer.rewards.push(out.reward);
        buffer.values.push(value);
        buffer.next_values.push(next_value);
        buffer.boundaries.push(out.done || last_in_buffer);

        if out.done {
            runner.finished.push(std::mem::take(&mut runner.running));
            runner.obs = runner.env.reset()?;
        } else {
            runner.obs = out.observation;
        }
    }
    for t in 0..buffer.len().saturating_sub(1) {
        if !buffer.boundaries[t] {
            buffer.next_values[t] = buffer.values[t + 1];
        }
    }
    Ok(())
}

/// Generalized advantage estimation.
///
/// `delta_t = r_t + gamma * next_value_t - V_t` and
/// `A_t = delta_t + gamma * lambda * A_{t+1}`, with the recursion cut at
/// every boundary. Returns `(advantages, returns)` where
/// `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    boundaries: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && next_values.len() == n && boundaries.len() == n, "GAE inputs misaligned");
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        if boundaries[t] {
            running = 0.0;
        }
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Per-sample clipped surrogate `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    (ratio * advantage).min(clipped * advantage)
}

/// Whether the unclipped branch is the active one, i.e. whether the
/// surrogate has a non-zero gradient in the ratio.
fn unclipped_branch_active(ratio: f64, advantage: f64, clip: f64) -> bool {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    ratio * advantage <= clipped * advantage
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Clipped surrogate, several epochs over each batch.
    Ppo,
    /// Plain policy gradient `log pi(a|s) A`, one epoch, no ratio or clip.
    A2c,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::A2c => "a2c",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ppo" => Ok(Algorithm::Ppo),
            "a2c" => Ok(Algorithm::A2c),
            other => Err(format!("unknown algorithm `{other}` (expected ppo or a2c)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOptions {
    pub algorithm: Algorithm,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
}

impl UpdateOptions {
    pub fn from_config(cfg: &ScenarioConfig, algorithm: Algorithm) -> Self {
        let rl = &cfg.rl;
        Self {
            algorithm,
            clip: rl.clip,
            epochs: match algorithm {
                Algorithm::Ppo => rl.update_epochs,
                Algorithm::A2c => 1,
            },
            minibatch_size: rl.minibatch_size,
            gamma: rl.gamma,
            gae_lambda: rl.gae_lambda,
            entropy_coef: rl.entropy_coef,
        }
    }
}

/// Optimizer state for actor (mean network and log-std) and critic.
#[derive(Debug, Clone)]
pub struct Optimizers {
    pub actor_mean: AdamState,
    pub actor_log_std: AdamState,
    pub critic: AdamState,
}

impl Optimizers {
    pub fn new(actor: &GaussianPolicy, critic: &Mlp, actor_lr: f64, critic_lr: f64) -> Self {
        Self {
            actor_mean: AdamState::new(actor.mean.n_params(), actor_lr),
            actor_log_std: AdamState::new(actor.action_dim(), actor_lr),
            critic: AdamState::new(critic.n_params(), critic_lr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    /// Mean actor loss (negated surrogate) over minibatches.
    pub actor_loss: f64,
    pub critic_loss: f64,
    /// Largest `|r - 1|` over the buffer before any parameter moved.
    pub initial_ratio_deviation: f64,
    /// Mean ratio over the buffer before any parameter moved.
    pub initial_mean_ratio: f64,
    /// Fraction of samples whose surrogate was clipped, over all epochs.
    pub clip_fraction: f64,
}

/// Probability ratios `pi(a|s) / pi_old(a|s)` for every stored transition.
pub fn probability_ratios(buffer: &RolloutBuffer, actor: &GaussianPolicy) -> Result<Vec<f64>> {
    buffer
        .observations
        .iter()
        .zip(&buffer.actions)
        .zip(&buffer.log_probs)
        .map(|((obs, a), old)| {
            let mu = actor.mean_action(obs)?;
            Ok((gaussian_log_prob(&mu, &actor.log_std, a) - old).exp())
        })
        .collect()
}

fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    if values.len() < 2 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = (*v - mean) / (std + 1e-8);
    }
}

/// One update cycle on a full buffer.
pub fn ppo_update<R: Rng + ?Sized>(
    buffer: &RolloutBuffer,
    actor: &mut GaussianPolicy,
    critic: &mut Mlp,
    opts: &UpdateOptions,
    optim: &mut Optimizers,
    rng: &mut R,
) -> Result<UpdateStats> {
    let n = buffer.len();
    if n == 0 {
        return Ok(UpdateStats::default());
    }
    let (advantages, returns) = compute_gae(
        &buffer.rewards,
        &buffer.values,
        &buffer.next_values,
        &buffer.boundaries,
        opts.gamma,
        opts.gae_lambda,
    );
    let ratios = probability_ratios(buffer, actor)?;
    let initial_ratio_deviation = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    let initial_mean_ratio = ratios.iter().sum::<f64>() / n as f64;

    let mut indices: Vec<usize> = (0..n).collect();
    let mb_size = opts.minibatch_size.max(1);
    let (mut actor_loss_sum, mut critic_loss_sum, mut n_minibatches) = (0.0, 0.0, 0usize);
    let (mut clipped, mut seen) = (0usize, 0usize);

    for _ in 0..opts.epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(mb_size) {
            let m = chunk.len() as f64;
            let mut adv: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();
            standardize(&mut adv);

            let mut g_mean = vec![0.0; actor.mean.n_params()];
            let mut g_log_std = vec![0.0; actor.action_dim()];
            let mut g_critic = vec![0.0; critic.n_params()];
            let mut actor_loss = 0.0;
            let mut critic_loss = 0.0;

            for (k, &i) in chunk.iter().enumerate() {
                let obs = &buffer.observations[i];
                let action = &buffer.actions[i];
                let a = adv[k];
                let (log_prob, mu, cache) = actor.log_prob(obs, action)?;
                let weight = match opts.algorithm {
                    Algorithm::Ppo => {
                        let ratio = (log_prob - buffer.log_probs[i]).exp();
                        actor_loss -= clipped_objective(ratio, a, opts.clip) / m;
                        seen += 1;
                        if unclipped_branch_active(ratio, a, opts.clip) {
                            -a * ratio / m
                        } else {
                            clipped += 1;
                            0.0
                        }
                    }
                    Algorithm::A2c => {
                        actor_loss -= log_prob * a / m;
                        -a / m
                    }
                };
                if weight != 0.0 {
                    actor.accumulate_log_prob_grad(&cache, &mu, action, weight, &mut g_mean, &mut g_log_std)?;
                }

                let (v, vcache) = critic.forward(obs)?;
                let err = v[0] - returns[i];
                critic_loss += err * err / m;
                critic.backward_accumulate(&vcache, &[2.0 * err / m], &mut g_critic)?;
            }
            if opts.entropy_coef != 0.0 {
                actor_loss -= opts.entropy_coef * actor.entropy();
                g_log_std.iter_mut().for_each(|g| *g -= opts.entropy_coef);
            }
            if !actor_loss.is_finite() || !critic_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "update aborted: actor loss {actor_loss}, critic loss {critic_loss}, minibatch of {}",
                    chunk.len()
                )));
            }
            adam_step(actor.mean.params_mut(), &g_mean, &mut optim.actor_mean)?;
            adam_step(&mut actor.log_std, &g_log_std, &mut optim.actor_log_std)?;
            actor.clamp_log_std();
            adam_step(critic.params_mut(), &g_critic, &mut optim.critic)?;

            actor_loss_sum += actor_loss;
            critic_loss_sum += critic_loss;
            n_minibatches += 1;
        }
    }
    let denom = n_minibatches.max(1) as f64;
    Ok(UpdateStats {
        actor_loss: actor_loss_sum / denom,
        critic_loss: critic_loss_sum / denom,
        initial_ratio_deviation,
        initial_mean_ratio,
        clip_fraction: if seen > 0 { clipped as f64 / seen as f64 } else { 0.0 },
    })
}

/// Learning curve and bookkeeping of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub episode_returns: Vec<f64>,
    pub episode_components: Vec<RewardComponents>,
    /// Loss of the update that followed each episode's collection phase.
    pub actor_losses: Vec<f64>,
    pub critic_losses: Vec<f64>,
    pub best_mean_return: Option<f64>,
    pub wall_clock_seconds: f64,
    pub evaluation: Option<EvalMetrics>,
}

impl TrainReport {
    pub fn n_episodes(&self) -> usize {
        self.episode_returns.len()
    }

    /// Mean return over episodes `range`.
    pub fn mean_return(&self, range: std::ops::Range<usize>) -> f64 {
        let slice = &self.episode_returns[range];
        slice.iter().sum::<f64>() / slice.len() as f64
    }
}

pub struct TrainOutcome {
    pub report: TrainReport,
    /// Policy that produced the best mean return in one collection phase.
    pub best: PolicyCheckpoint,
    pub last: PolicyCheckpoint,
}

pub fn init_networks(cfg: &ScenarioConfig, seed: u64) -> Result<(GaussianPolicy, Mlp)> {
    let mut rng = rng_stream(seed, StreamPurpose::NetworkInit);
    let obs_dim = observation_len(cfg);
    let actor = GaussianPolicy::new(obs_dim, action_len(cfg), &cfg.rl.hidden_sizes, cfg.rl.init_log_std, &mut rng)?;
    let mut sizes = vec![obs_dim];
    sizes.extend_from_slice(&cfg.rl.hidden_sizes);
    sizes.push(1);
    let critic = Mlp::orthogonal(&sizes, 1.0, 1.0, &mut rng)?;
    Ok((actor, critic))
}

/// Trains for `cfg.rl.episodes` episodes using `cfg.seed`.
pub fn train(cfg: &ScenarioConfig, algorithm: Algorithm) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let seed = cfg.seed;
    let (mut actor, mut critic) = init_networks(cfg, seed)?;
    let mut optim = Optimizers::new(&actor, &critic, cfg.rl.actor_lr, cfg.rl.critic_lr);
    let opts = UpdateOptions::from_config(cfg, algorithm);
    let mut sample_rng = rng_stream(seed, StreamPurpose::PolicySampling);
    let mut batch_rng = rng_stream(seed, StreamPurpose::Minibatch);
    let mut runner = EpisodeRunner::new(cfg.clone(), seed)?;
    let mut buffer = RolloutBuffer::default();

    let mut report = TrainReport {
        seed,
        algorithm,
        episode_returns: Vec::new(),
        episode_components: Vec::new(),
        actor_losses: Vec::new(),
        critic_losses: Vec::new(),
        best_mean_return: None,
        wall_clock_seconds: 0.0,
        evaluation: None,
    };
    let mut best = PolicyCheckpoint { actor: actor.clone(), critic: critic.clone() };
    let total_steps = cfg.rl.episodes * cfg.n_slots;
    let mut steps = 0;
    while steps < total_steps {
        let batch = cfg.rl.batch_size.min(total_steps - steps);
        collect_rollout(&mut runner, &actor, &critic, batch, &mut buffer, &mut sample_rng)?;
        steps += batch;
        let finished = runner.take_finished();
        if !finished.is_empty() {
            let mean = finished.iter().map(|e| e.total_return).sum::<f64>() / finished.len() as f64;
            if report.best_mean_return.is_none_or(|b| mean > b) {
                report.best_mean_return = Some(mean);
                best = PolicyCheckpoint { actor: actor.clone(), critic: critic.clone() };
            }
        }
        let stats = ppo_update(&buffer, &mut actor, &mut critic, &opts, &mut optim, &mut batch_rng)?;
        for ep in finished {
            report.episode_returns.push(ep.total_return);
            report.episode_components.push(ep.components);
            report.actor_losses.push(stats.actor_loss);
            report.critic_losses.push(stats.critic_loss);
        }
    }
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(TrainOutcome { report, best, last: PolicyCheckpoint { actor, critic } })
}

/// Picks the action for the current slot.
pub trait Controller {
    fn act(&mut self, env: &IsacEnv) -> Result<DecodedAction>;
}

/// Deterministic controller that plays the policy mean.
pub struct MeanPolicy<'a>(pub &'a GaussianPolicy);

impl Controller for MeanPolicy<'_> {
    fn act(&mut self, env: &IsacEnv) -> Result<DecodedAction> {
        let mu = self.0.mean_action(&env.observation())?;
        let clipped: Vec<f64> = mu.iter().map(|x| x.clamp(-1.0, 1.0)).collect();
        decode_or_perturb(&clipped, env.config())
    }
}

/// Aggregate evaluation metrics; rates are per-slot averages.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalMetrics {
    pub episodes: usize,
    pub slots: usize,
    pub mean_return: f64,
    pub mean_sum_secrecy: f64,
    pub per_uav_secrecy: Vec<f64>,
    /// Fraction of slots where some eavesdropper falls below its sensing threshold.
    pub sensing_violation_rate: f64,
    /// Fraction of slots where some legitimate rate falls below the QoS floor.
    pub qos_violation_rate: f64,
}

/// How beams are realized during evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamRealization {
    FullyDigital,
    /// Each slot's beams are decomposed into a hybrid beamformer first.
    Hybrid(DecomposeOptions),
}

/// Runs `episodes` episodes with `controller` on the channel stream of
/// `seed`. Slot statistics are accumulated over all episodes.
pub fn evaluate<C: Controller>(
    controller: &mut C,
    cfg: &ScenarioConfig,
    episodes: usize,
    seed: u64,
    realization: BeamRealization,
) -> Result<EvalMetrics> {
    let (mut env, _) = IsacEnv::new(cfg.clone(), seed)?;
    let mut analog_rng = rng_stream(seed, StreamPurpose::AnalogInit);
    let l = cfg.n_legit;
    let mut per_uav = vec![0.0; l];
    let (mut total_return, mut sum_secrecy, mut slots) = (0.0, 0.0, 0usize);
    let (mut sensing_viol, mut qos_viol) = (0usize, 0usize);
    for ep in 0..episodes {
        if ep > 0 {
            env.reset()?;
        }
        while !env.state().done {
            let mut action = controller.act(&env)?;
            if let BeamRealization::Hybrid(opts) = realization {
                action.beams = realize_hybrid(&action.beams, cfg, &opts, &mut analog_rng)?;
            }
            let out = env.step(&action)?;
            total_return += out.reward;
            sum_secrecy += out.secrecy.sum_secrecy;
            for (acc, r) in per_uav.iter_mut().zip(&out.secrecy.secrecy_rates) {
                *acc += r;
            }
            if out.sensing_margins.iter().any(|m| *m < 0.0) {
                sensing_viol += 1;
            }
            if out.secrecy.legit_rates.iter().any(|r| *r < cfg.qos_min_rate) {
                qos_viol += 1;
            }
            slots += 1;
        }
    }
    let denom = slots.max(1) as f64;
    Ok(EvalMetrics {
        episodes,
        slots,
        mean_return: if episodes > 0 { total_return / episodes as f64 } else { 0.0 },
        mean_sum_secrecy: sum_secrecy / denom,
        per_uav_secrecy: per_uav.iter().map(|s| s / denom).collect(),
        sensing_violation_rate: sensing_viol as f64 / denom,
        qos_violation_rate: qos_viol as f64 / denom,
    })
}

fn realize_hybrid<R: Rng + ?Sized>(
    beams: &DigitalBeamformers,
    cfg: &ScenarioConfig,
    opts: &DecomposeOptions,
    rng: &mut R,
) -> Result<DigitalBeamformers> {
    let res = decompose(
        &beams.precoders,
        &beams.an_vector,
        cfg.n_rf_chains,
        cfg.transmit_power_watts,
        opts,
        rng,
    )?;
    effective_digital(&res.hybrid)
}
