//! Scenario configuration.
//!
//! Scenarios are TOML documents. Every field of [`ScenarioConfig`] maps to a
//! top-level key; the training hyperparameters live in an `[rl]` table. The
//! carrier frequency, maximum speed, QoS floor, observation scale, seed and
//! every `[rl]` key are optional and fall back to the defaults documented on
//! the fields. See `scenarios/paper.toml` for a complete document.
//!
//! A single master seed feeds several independent random streams, one per
//! [`StreamPurpose`]. Each stream is a ChaCha8 generator seeded with the
//! master seed and switched to the stream id of its purpose, so consuming
//! draws from one purpose never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Carrier frequency used when a document leaves it out (28 GHz mmWave).
pub const DEFAULT_CARRIER_HZ: f64 = 28e9;
/// Maximum UAV speed when unspecified, m/s.
pub const DEFAULT_V_MAX_MPS: f64 = 10.0;
/// Minimum per-user rate in the QoS penalty when unspecified, bits/s/Hz.
pub const DEFAULT_QOS_MIN_RATE: f64 = 1.0;
/// Channel observation scale: the inverse of the median per-antenna channel
/// magnitude `g(d) / sqrt(N_t)` over the seven links of the default scenario.
pub const DEFAULT_OBSERVATION_SCALE: f64 = 2.606_715_151_460_855e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlHyperparams {
    #[serde(default = "RlHyperparams::default_actor_lr")]
    pub actor_lr: f64,
    #[serde(default = "RlHyperparams::default_critic_lr")]
    pub critic_lr: f64,
    #[serde(default = "RlHyperparams::default_gamma")]
    pub gamma: f64,
    /// PPO clip parameter.
    #[serde(default = "RlHyperparams::default_clip")]
    pub clip: f64,
    #[serde(default = "RlHyperparams::default_gae_lambda")]
    pub gae_lambda: f64,
    /// Transitions collected per update.
    #[serde(default = "RlHyperparams::default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "RlHyperparams::default_minibatch_size")]
    pub minibatch_size: usize,
    /// Optimization passes over each collected batch.
    #[serde(default = "RlHyperparams::default_update_epochs")]
    pub update_epochs: usize,
    /// Training budget in episodes.
    #[serde(default = "RlHyperparams::default_episodes")]
    pub episodes: usize,
    #[serde(default = "RlHyperparams::default_hidden_sizes")]
    pub hidden_sizes: Vec<usize>,
    /// Initial value of every entry of the policy log-std vector.
    #[serde(default = "RlHyperparams::default_init_log_std")]
    pub init_log_std: f64,
    /// Entropy bonus weight; zero disables it.
    #[serde(default)]
    pub entropy_coef: f64,
}

impl RlHyperparams {
    fn default_actor_lr() -> f64 {
        1e-4
    }
    fn default_critic_lr() -> f64 {
        3e-4
    }
    fn default_gamma() -> f64 {
        0.9
    }
    fn default_clip() -> f64 {
        0.2
    }
    fn default_gae_lambda() -> f64 {
        0.95
    }
    fn default_batch_size() -> usize {
        1000
    }
    fn default_minibatch_size() -> usize {
        200
    }
    fn default_update_epochs() -> usize {
        10
    }
    fn default_episodes() -> usize {
        10_000
    }
    fn default_hidden_sizes() -> Vec<usize> {
        vec![256, 256]
    }
    fn default_init_log_std() -> f64 {
        -0.5
    }
}

impl Default for RlHyperparams {
    fn default() -> Self {
        Self {
            actor_lr: Self::default_actor_lr(),
            critic_lr: Self::default_critic_lr(),
            gamma: Self::default_gamma(),
            clip: Self::default_clip(),
            gae_lambda: Self::default_gae_lambda(),
            batch_size: Self::default_batch_size(),
            minibatch_size: Self::default_minibatch_size(),
            update_epochs: Self::default_update_epochs(),
            episodes: Self::default_episodes(),
            hidden_sizes: Self::default_hidden_sizes(),
            init_log_std: Self::default_init_log_std(),
            entropy_coef: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_antennas_x: usize,
    pub n_antennas_y: usize,
    pub n_rf_chains: usize,
    pub n_legit: usize,
    pub n_eves: usize,
    pub transmit_power_watts: f64,
    pub pathloss_exponent: f64,
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    pub slot_seconds: f64,
    pub n_slots: usize,
    /// Optional total duration; when present it must equal `n_slots * slot_seconds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_seconds: Option<f64>,
    /// Receiver noise power shared by every UAV unless overridden below.
    pub noise_power_watts: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legit_noise_watts: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eve_noise_watts: Option<Vec<f64>>,
    /// Beampattern threshold per eavesdropper.
    pub sensing_threshold: Vec<f64>,
    pub sensing_penalty_weight: f64,
    #[serde(default = "default_qos")]
    pub qos_min_rate: f64,
    #[serde(default = "default_vmax")]
    pub v_max_mps: f64,
    #[serde(default = "default_obs_scale")]
    pub observation_scale: f64,
    #[serde(default)]
    pub seed: u64,
    pub base_position: [f64; 3],
    pub legit_init_positions: Vec<[f64; 3]>,
    pub eve_positions: Vec<[f64; 3]>,
    #[serde(default)]
    pub rl: RlHyperparams,
}

fn default_carrier() -> f64 {
    DEFAULT_CARRIER_HZ
}
fn default_qos() -> f64 {
    DEFAULT_QOS_MIN_RATE
}
fn default_vmax() -> f64 {
    DEFAULT_V_MAX_MPS
}
fn default_obs_scale() -> f64 {
    DEFAULT_OBSERVATION_SCALE
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario_file(path: impl AsRef<std::path::Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    load_scenario(&text)
}

/// The default scenario: 8x8 UPA, 8 RF chains, four legitimate UAVs and
/// three static eavesdroppers.
pub fn default_paper_scenario() -> ScenarioConfig {
    ScenarioConfig {
        n_antennas_x: 8,
        n_antennas_y: 8,
        n_rf_chains: 8,
        n_legit: 4,
        n_eves: 3,
        transmit_power_watts: 10.0,
        pathloss_exponent: 1.8,
        carrier_hz: DEFAULT_CARRIER_HZ,
        slot_seconds: 0.5,
        n_slots: 200,
        total_seconds: Some(100.0),
        noise_power_watts: 1e-13,
        legit_noise_watts: None,
        eve_noise_watts: None,
        sensing_threshold: vec![0.5e-5; 3],
        sensing_penalty_weight: 0.5,
        qos_min_rate: DEFAULT_QOS_MIN_RATE,
        v_max_mps: DEFAULT_V_MAX_MPS,
        observation_scale: DEFAULT_OBSERVATION_SCALE,
        seed: 0,
        base_position: [0.0, 0.0, 0.0],
        legit_init_positions: vec![
            [20.0, 80.0, 20.0],
            [20.0, 70.0, 15.0],
            [70.0, 30.0, 30.0],
            [80.0, 10.0, 15.0],
        ],
        eve_positions: vec![[20.0, 40.0, 20.0], [50.0, 50.0, 30.0], [80.0, 70.0, 40.0]],
        rl: RlHyperparams::default(),
    }
}

/// Scaled-down scenario used by the learning smoke tests: a 2x2 array, one
/// legitimate UAV, one eavesdropper and 20-slot episodes.
pub fn tiny_scenario() -> ScenarioConfig {
    ScenarioConfig {
        n_antennas_x: 2,
        n_antennas_y: 2,
        n_rf_chains: 2,
        n_legit: 1,
        n_eves: 1,
        transmit_power_watts: 10.0,
        pathloss_exponent: 1.8,
        carrier_hz: DEFAULT_CARRIER_HZ,
        slot_seconds: 0.5,
        n_slots: 20,
        total_seconds: None,
        noise_power_watts: 1e-13,
        legit_noise_watts: None,
        eve_noise_watts: None,
        sensing_threshold: vec![0.5e-5],
        sensing_penalty_weight: 0.5,
        qos_min_rate: DEFAULT_QOS_MIN_RATE,
        v_max_mps: DEFAULT_V_MAX_MPS,
        observation_scale: DEFAULT_OBSERVATION_SCALE,
        seed: 0,
        base_position: [0.0, 0.0, 0.0],
        legit_init_positions: vec![[60.0, 10.0, 20.0]],
        eve_positions: vec![[10.0, 50.0, 25.0]],
        rl: RlHyperparams {
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            batch_size: 200,
            minibatch_size: 50,
            episodes: 300,
            hidden_sizes: vec![64, 64],
            ..RlHyperparams::default()
        },
    }
}

impl ScenarioConfig {
    pub fn n_antennas(&self) -> usize {
        self.n_antennas_x * self.n_antennas_y
    }

    pub fn total_duration(&self) -> f64 {
        self.n_slots as f64 * self.slot_seconds
    }

    /// Largest per-slot displacement allowed for a legitimate UAV.
    pub fn max_step_distance(&self) -> f64 {
        self.v_max_mps * self.slot_seconds
    }

    pub fn legit_noise(&self, l: usize) -> f64 {
        self.legit_noise_watts
            .as_ref()
            .map_or(self.noise_power_watts, |v| v[l])
    }

    pub fn eve_noise(&self, e: usize) -> f64 {
        self.eve_noise_watts.as_ref().map_or(self.noise_power_watts, |v| v[e])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::Invalid(msg));
        let nt = self.n_antennas();
        if self.n_antennas_x == 0 || self.n_antennas_y == 0 {
            return invalid("antenna counts must be positive".into());
        }
        if self.n_legit == 0 {
            return invalid("n_legit must be positive".into());
        }
        if self.n_legit > self.n_rf_chains {
            return invalid(format!(
                "L ≤ N_RF violated (L={}, N_RF={})",
                self.n_legit, self.n_rf_chains
            ));
        }
        if self.n_rf_chains > nt {
            return invalid(format!(
                "N_RF ≤ N_t violated (N_RF={}, N_t={nt})",
                self.n_rf_chains
            ));
        }
        let positive = [
            ("transmit_power_watts", self.transmit_power_watts),
            ("pathloss_exponent", self.pathloss_exponent),
            ("carrier_hz", self.carrier_hz),
            ("slot_seconds", self.slot_seconds),
            ("noise_power_watts", self.noise_power_watts),
            ("v_max_mps", self.v_max_mps),
            ("observation_scale", self.observation_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive and finite (got {v})"));
            }
        }
        for (name, v) in [
            ("sensing_penalty_weight", self.sensing_penalty_weight),
            ("qos_min_rate", self.qos_min_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(format!("{name} must be non-negative (got {v})"));
            }
        }
        if self.n_slots == 0 {
            return invalid("n_slots must be positive".into());
        }
        if let Some(t) = self.total_seconds {
            let derived = self.total_duration();
            if (t - derived).abs() > 1e-9 * t.abs().max(1.0) {
                return invalid(format!(
                    "n_slots · slot_seconds = T violated ({} · {} ≠ {t})",
                    self.n_slots, self.slot_seconds
                ));
            }
        }
        if self.legit_init_positions.len() != self.n_legit {
            return invalid(format!(
                "len(legit_init_positions) = L violated ({} ≠ {})",
                self.legit_init_positions.len(),
                self.n_legit
            ));
        }
        if self.eve_positions.len() != self.n_eves {
            return invalid(format!(
                "len(eve_positions) = E violated ({} ≠ {})",
                self.eve_positions.len(),
                self.n_eves
            ));
        }
        if self.sensing_threshold.len() != self.n_eves {
            return invalid(format!(
                "len(sensing_threshold) = E violated ({} ≠ {})",
                self.sensing_threshold.len(),
                self.n_eves
            ));
        }
        if self.sensing_threshold.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return invalid("sensing thresholds must be positive".into());
        }
        for p in self.legit_init_positions.iter().chain(&self.eve_positions) {
            if p.iter().any(|c| !c.is_finite()) {
                return invalid(format!("non-finite position {p:?}"));
            }
            if p[2] <= self.base_position[2] {
                return invalid(format!("altitude must be > 0 (position {p:?})"));
            }
        }
        if let Some(v) = &self.legit_noise_watts {
            if v.len() != self.n_legit || v.iter().any(|x| !(*x > 0.0)) {
                return invalid("legit_noise_watts needs L positive entries".into());
            }
        }
        if let Some(v) = &self.eve_noise_watts {
            if v.len() != self.n_eves || v.iter().any(|x| !(*x > 0.0)) {
                return invalid("eve_noise_watts needs E positive entries".into());
            }
        }
        let rl = &self.rl;
        if rl.batch_size == 0 || rl.minibatch_size == 0 || rl.minibatch_size > rl.batch_size {
            return invalid("rl: need 0 < minibatch_size ≤ batch_size".into());
        }
        if !(0.0..=1.0).contains(&rl.gamma) || !(0.0..=1.0).contains(&rl.gae_lambda) {
            return invalid("rl: gamma and gae_lambda must lie in [0, 1]".into());
        }
        if !(rl.clip >= 0.0) || !(rl.actor_lr >= 0.0) || !(rl.critic_lr >= 0.0) {
            return invalid("rl: clip and learning rates must be non-negative".into());
        }
        if rl.hidden_sizes.iter().any(|&h| h == 0) {
            return invalid("rl: hidden layer sizes must be positive".into());
        }
        Ok(())
    }

    /// Random stream for one purpose, derived from `self.seed`.
    pub fn rng(&self, purpose: StreamPurpose) -> ChaCha8Rng {
        rng_stream(self.seed, purpose)
    }
}

/// Independent random streams split from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    ChannelFading = 1,
    PolicySampling = 2,
    NetworkInit = 3,
    AnalogInit = 4,
    Evaluation = 5,
    Minibatch = 6,
}

pub fn rng_stream(master_seed: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(purpose as u64);
    rng
}
