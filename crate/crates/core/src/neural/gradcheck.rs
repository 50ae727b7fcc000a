use rand::seq::index::sample;
use rand::Rng;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Lower bound on the denominator of [`relative_error`], so that vanishing
/// gradients are compared in absolute terms.
pub const FD_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Worst relative error between `analytic` and central differences of
/// `loss`, over `probes` coordinates drawn without replacement.
pub fn finite_diff_check<F, R>(loss: F, params: &[f64], analytic: &[f64], probes: usize, rng: &mut R) -> f64
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let n = params.len();
    let mut p = params.to_vec();
    let mut worst = 0.0_f64;
    for i in sample(rng, n, probes.min(n)) {
        let orig = p[i];
        p[i] = orig + FD_STEP;
        let up = loss(&p);
        p[i] = orig - FD_STEP;
        let down = loss(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}
