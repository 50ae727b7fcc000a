use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{ForwardCache, Mlp};
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian policy with an MLP mean and a state-independent,
/// learnable log-std vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    pub log_std: Vec<f64>,
}

/// Log-density of `action` under `N(mean, diag(exp(log_std))^2)`.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, s), a)| {
            let z = (a - m) * (-s).exp();
            -0.5 * z * z - s - HALF_LN_2PI
        })
        .sum()
}

impl GaussianPolicy {
    /// Mean network with tanh hidden layers; the output layer starts at 1%
    /// of the orthogonal scale so initial actions sit near zero.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        let mean = Mlp::orthogonal(&sizes, 1.0, 0.01, rng)?;
        let log_std = vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); action_dim];
        Ok(Self { mean, log_std })
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn clamp_log_std(&mut self) {
        for s in &mut self.log_std {
            *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean.predict(obs)
    }

    /// Draws `a = mu + sigma * xi` and returns it with its log-density.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mu = self.mean.predict(obs)?;
        let action: Vec<f64> = mu
            .iter()
            .zip(&self.log_std)
            .map(|(m, s)| {
                let xi: f64 = rng.sample(StandardNormal);
                m + s.exp() * xi
            })
            .collect();
        let lp = gaussian_log_prob(&mu, &self.log_std, &action);
        Ok((action, lp))
    }

    /// Log-density of `action` at `obs`, with what is needed to
    /// differentiate it.
    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<(f64, Vec<f64>, ForwardCache)> {
        if action.len() != self.action_dim() {
            return Err(Error::Dimension(format!(
                "action has {} entries, policy produces {}",
                action.len(),
                self.action_dim()
            )));
        }
        let (mu, cache) = self.mean.forward(obs)?;
        Ok((gaussian_log_prob(&mu, &self.log_std, action), mu, cache))
    }

    /// Adds `weight * d log pi(action) / d theta` to the mean-network and
    /// log-std gradient buffers.
    pub fn accumulate_log_prob_grad(
        &self,
        cache: &ForwardCache,
        mu: &[f64],
        action: &[f64],
        weight: f64,
        mean_grads: &mut [f64],
        log_std_grads: &mut [f64],
    ) -> Result<()> {
        let mut grad_mu = Vec::with_capacity(mu.len());
        for i in 0..mu.len() {
            let inv_var = (-2.0 * self.log_std[i]).exp();
            let diff = action[i] - mu[i];
            grad_mu.push(weight * diff * inv_var);
            log_std_grads[i] += weight * (diff * diff * inv_var - 1.0);
        }
        self.mean.backward_accumulate(cache, &grad_mu, mean_grads)?;
        Ok(())
    }

    /// Differential entropy, `sum_i (log sigma_i + 0.5 ln(2 pi e))`.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|s| s + HALF_LN_2PI + 0.5).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::finite_diff_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy(rng: &mut ChaCha8Rng, log_std: f64) -> GaussianPolicy {
        let mut p = GaussianPolicy::new(4, 3, &[8], log_std, rng).unwrap();
        for w in p.mean.params_mut() {
            *w += 0.3 * (rng.random::<f64>() - 0.5);
        }
        p
    }

    #[test]
    fn floor_std_samples_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = policy(&mut rng, LOG_STD_MIN);
        let obs = [0.1, 0.2, -0.3, 0.4];
        let (a, _) = p.sample(&obs, &mut rng).unwrap();
        let mu = p.mean_action(&obs).unwrap();
        for (x, m) in a.iter().zip(&mu) {
            assert!((x - m).abs() < 1e-7);
        }
    }

    #[test]
    fn density_at_mode() {
        let ls = [0.3, -1.0, 0.0];
        let mu = [1.0, 2.0, 3.0];
        let want: f64 = ls.iter().map(|s| -s - 0.5 * (2.0 * std::f64::consts::PI).ln()).sum();
        assert!((gaussian_log_prob(&mu, &ls, &mu) - want).abs() < 1e-14);
    }

    #[test]
    fn sample_mean_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = policy(&mut rng, -0.4);
        let obs = [0.5, -0.5, 0.25, 0.0];
        let mu = p.mean_action(&obs).unwrap();
        let n = 100_000;
        let mut acc = vec![0.0; 3];
        for _ in 0..n {
            let (a, _) = p.sample(&obs, &mut rng).unwrap();
            for i in 0..3 {
                acc[i] += a[i];
            }
        }
        let sigma = (-0.4_f64).exp();
        for i in 0..3 {
            let m = acc[i] / n as f64;
            assert!((m - mu[i]).abs() < 3.0 * sigma / (n as f64).sqrt(), "dim {i}");
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for &s in &[-1.5_f64, 0.0, 0.7] {
            let sigma = s.exp();
            let (lo, hi, n) = (-12.0 * sigma, 12.0 * sigma, 20_001);
            let h = (hi - lo) / (n - 1) as f64;
            let mut total = 0.0;
            for k in 0..n {
                let x = lo + k as f64 * h;
                let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                total += w * gaussian_log_prob(&[0.0], &[s], &[x]).exp();
            }
            assert!((total * h - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = policy(&mut rng, -0.3);
        let obs = [0.2, -0.1, 0.7, -0.4];
        let (action, _) = p.sample(&obs, &mut rng).unwrap();
        let (_, mu, cache) = p.log_prob(&obs, &action).unwrap();
        let n_mean = p.mean.n_params();
        let mut gm = vec![0.0; n_mean];
        let mut gs = vec![0.0; 3];
        p.accumulate_log_prob_grad(&cache, &mu, &action, 1.0, &mut gm, &mut gs).unwrap();
        let mut flat = p.mean.params().to_vec();
        flat.extend_from_slice(&p.log_std);
        let mut analytic = gm;
        analytic.extend_from_slice(&gs);
        let sizes = p.mean.sizes().to_vec();
        let loss = |theta: &[f64]| {
            let net = Mlp::from_params(&sizes, theta[..n_mean].to_vec()).unwrap();
            let m = net.predict(&obs).unwrap();
            gaussian_log_prob(&m, &theta[n_mean..], &action)
        };
        let err = finite_diff_check(loss, &flat, &analytic, 64, &mut rng);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn log_std_is_clamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = GaussianPolicy::new(2, 2, &[3], 5.0, &mut rng).unwrap();
        assert_eq!(p.log_std, vec![LOG_STD_MAX; 2]);
        p.log_std[0] = -50.0;
        p.clamp_log_std();
        assert_eq!(p.log_std[0], LOG_STD_MIN);
    }
}
