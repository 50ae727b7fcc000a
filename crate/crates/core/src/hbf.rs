//! Hybrid decomposition of a fully-digital beamformer by alternating
//! optimization.
//!
//! Minimizes `||F_opt - F_RF F_BB||_F^2 + ||w_opt - F_RF w||^2` over a
//! constant-modulus analog matrix `F_RF` (entries `e^{j psi} / sqrt(N_t)`)
//! and unconstrained digital parts. The digital step is an exact
//! least-squares solve; the analog step aligns each phase with its
//! correlation term and is kept only when the following digital solve
//! does not raise the objective. Power is normalized once at exit.

use std::f64::consts::TAU;

use rand::Rng;

use crate::linalg::{fro2, norm2_sq, pinv};
use crate::signal_metrics::{effective_digital, total_power, HybridBeamformers};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Smallest singular value accepted for a freshly drawn analog matrix.
pub const MIN_INIT_SINGULAR_VALUE: f64 = 1e-6;
const MAX_INIT_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    /// Stop once the relative objective change drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    /// The analog step would have raised the objective.
    AnalogRejected,
    MaxIterations,
    ZeroInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub hybrid: HybridBeamformers,
    /// Objective after each accepted digital update, before normalization.
    pub residual_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl DecompositionResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_trace.last().copied().unwrap_or(0.0)
    }
}

fn phase_entry(psi: f64, scale: f64) -> C64 {
    C64::from_polar(scale, psi)
}

/// Random constant-modulus analog matrix with uniform phases, redrawn
/// until its smallest singular value clears [`MIN_INIT_SINGULAR_VALUE`].
pub fn init_analog<R: Rng + ?Sized>(nt: usize, nrf: usize, rng: &mut R) -> Result<CMatrix> {
    if nrf == 0 || nrf > nt {
        return Err(Error::Invalid(format!("need 1 <= N_RF <= N_t, got N_RF={nrf}, N_t={nt}")));
    }
    let scale = 1.0 / (nt as f64).sqrt();
    for _ in 0..MAX_INIT_ATTEMPTS {
        let m = CMatrix::from_fn(nt, nrf, |_, _| phase_entry(rng.random::<f64>() * TAU, scale));
        let smin = m.clone().svd(false, false).singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if smin > MIN_INIT_SINGULAR_VALUE {
            return Ok(m);
        }
    }
    Err(Error::Invalid(format!(
        "no full-rank {nt}x{nrf} analog draw in {MAX_INIT_ATTEMPTS} attempts"
    )))
}

fn check_shapes(analog: &CMatrix, f_opt: &CMatrix, w_opt: &CVector) -> Result<()> {
    if f_opt.nrows() != analog.nrows() || w_opt.len() != analog.nrows() {
        return Err(Error::Dimension(format!(
            "analog has {} rows, F_opt has {}, w_opt has {}",
            analog.nrows(),
            f_opt.nrows(),
            w_opt.len()
        )));
    }
    Ok(())
}

/// Least-squares digital stage `F_BB = F_RF^+ F_opt`, `w = F_RF^+ w_opt`.
pub fn update_digital(analog: &CMatrix, f_opt: &CMatrix, w_opt: &CVector) -> Result<(CMatrix, CVector)> {
    check_shapes(analog, f_opt, w_opt)?;
    let p = pinv(analog);
    Ok((&p * f_opt, &p * w_opt))
}

/// Phase-aligned analog matrix. Entries whose correlation is exactly zero
/// keep the phase of `previous`.
pub fn update_analog(
    f_opt: &CMatrix,
    f_bb: &CMatrix,
    w_opt: &CVector,
    w: &CVector,
    previous: &CMatrix,
) -> Result<CMatrix> {
    let (nt, nrf) = previous.shape();
    if f_opt.nrows() != nt || w_opt.len() != nt || f_bb.nrows() != nrf || w.len() != nrf || f_bb.ncols() != f_opt.ncols() {
        return Err(Error::Dimension(format!(
            "analog {nt}x{nrf}, F_opt {}x{}, F_BB {}x{}, w_opt {}, w {}",
            f_opt.nrows(),
            f_opt.ncols(),
            f_bb.nrows(),
            f_bb.ncols(),
            w_opt.len(),
            w.len()
        )));
    }
    let scale = 1.0 / (nt as f64).sqrt();
    // corr[i, j] = F_opt[i, :] F_BB[j, :]^H + w_opt[i] conj(w[j])
    let corr = f_opt * f_bb.adjoint() + w_opt * w.adjoint();
    Ok(CMatrix::from_fn(nt, nrf, |i, j| {
        let c = corr[(i, j)];
        if c == C64::new(0.0, 0.0) {
            previous[(i, j)]
        } else {
            phase_entry(c.arg(), scale)
        }
    }))
}

/// Factorization objective for the given analog and digital parts.
pub fn objective(f_opt: &CMatrix, w_opt: &CVector, analog: &CMatrix, f_bb: &CMatrix, w: &CVector) -> f64 {
    fro2(&(f_opt - analog * f_bb)) + norm2_sq(&(w_opt - analog * w))
}

/// Scales the digital parts so the realized power equals `p_t`.
pub fn normalize_power(hybrid: &HybridBeamformers, p_t: f64) -> Result<HybridBeamformers> {
    let p_total = total_power(&effective_digital(hybrid)?);
    if p_total <= 0.0 || !p_total.is_finite() {
        return Err(Error::ZeroPower);
    }
    let eta = C64::new((p_t / p_total).sqrt(), 0.0);
    Ok(HybridBeamformers {
        analog: hybrid.analog.clone(),
        digital: &hybrid.digital * eta,
        an_digital: &hybrid.an_digital * eta,
    })
}

/// Guarded alternating optimization followed by one power normalization.
///
/// An all-zero input returns zero digital parts on a random analog matrix
/// without normalization, since there is no power to scale.
pub fn decompose<R: Rng + ?Sized>(
    f_opt: &CMatrix,
    w_opt: &CVector,
    nrf: usize,
    p_t: f64,
    opts: &DecomposeOptions,
    rng: &mut R,
) -> Result<DecompositionResult> {
    let nt = f_opt.nrows();
    let mut analog = init_analog(nt, nrf, rng)?;
    check_shapes(&analog, f_opt, w_opt)?;

    let target = fro2(f_opt) + norm2_sq(w_opt);
    if target == 0.0 {
        return Ok(DecompositionResult {
            hybrid: HybridBeamformers {
                analog,
                digital: CMatrix::zeros(nrf, f_opt.ncols()),
                an_digital: CVector::zeros(nrf),
            },
            residual_trace: vec![0.0],
            iterations: 1,
            converged: true,
            stop_reason: StopReason::ZeroInput,
        });
    }

    let (mut f_bb, mut w) = update_digital(&analog, f_opt, w_opt)?;
    let mut trace = vec![objective(f_opt, w_opt, &analog, &f_bb, &w)];
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 1;
    while iterations < opts.max_iter.max(1) {
        let prev = *trace.last().unwrap();
        if prev <= f64::EPSILON * f64::EPSILON * target {
            stop = StopReason::Tolerance;
            break;
        }
        iterations += 1;
        let candidate = update_analog(f_opt, &f_bb, w_opt, &w, &analog)?;
        let (cand_bb, cand_w) = update_digital(&candidate, f_opt, w_opt)?;
        let obj = objective(f_opt, w_opt, &candidate, &cand_bb, &cand_w);
        if obj > prev {
            stop = StopReason::AnalogRejected;
            break;
        }
        analog = candidate;
        f_bb = cand_bb;
        w = cand_w;
        trace.push(obj);
        if (prev - obj) / prev < opts.tol {
            stop = StopReason::Tolerance;
            break;
        }
    }

    let hybrid = normalize_power(&HybridBeamformers { analog, digital: f_bb, an_digital: w }, p_t)?;
    Ok(DecompositionResult {
        hybrid,
        residual_trace: trace,
        iterations,
        converged: stop != StopReason::MaxIterations,
        stop_reason: stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
    }

    fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> CVector {
        CVector::from_fn(n, |_, _| complex_normal(rng))
    }

    fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Least squares through the normal equations `A^H A X = A^H B`,
    /// solved by LU. Independent of the SVD route.
    fn normal_equation_solve(a: &CMatrix, b: &CMatrix) -> CMatrix {
        let gram = a.adjoint() * a;
        gram.lu().solve(&(a.adjoint() * b)).expect("gram invertible")
    }

    #[test]
    fn init_is_constant_modulus_full_rank_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = init_analog(8, 8, &mut rng).unwrap();
        let s = 1.0 / 8f64.sqrt();
        assert!(m.iter().all(|z| (z.norm() - s).abs() < 1e-15));
        let smin = m.clone().svd(false, false).singular_values.min();
        assert!(smin > 1e-6);
        let again = init_analog(8, 8, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(m, again);
        assert!(init_analog(4, 5, &mut rng).is_err());
    }

    #[test]
    fn digital_update_recovers_exact_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let analog = init_analog(16, 6, &mut rng).unwrap();
        let x = gaussian_matrix(6, 3, &mut rng);
        let wx = gaussian_vector(6, &mut rng);
        let (f_bb, w) = update_digital(&analog, &(&analog * &x), &(&analog * &wx)).unwrap();
        assert!(max_abs_diff(&f_bb, &x) < 1e-10);
        assert!((&w - &wx).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn digital_update_of_orthogonal_target_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let analog = init_analog(8, 3, &mut rng).unwrap();
        // Gram-Schmidt basis of range(F_RF), built by hand.
        let mut basis: Vec<CVector> = Vec::new();
        for j in 0..3 {
            let mut v: CVector = analog.column(j).into_owned();
            for q in &basis {
                let proj: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                v -= q * proj;
            }
            let n = v.norm();
            basis.push(v / C64::new(n, 0.0));
        }
        let mut f_opt = gaussian_matrix(8, 2, &mut rng);
        for c in 0..2 {
            for q in &basis {
                let proj: C64 = q.iter().zip(f_opt.column(c).iter()).map(|(a, b)| a.conj() * b).sum();
                let update = q * proj;
                let mut col = f_opt.column_mut(c);
                col -= update;
            }
        }
        let w_opt = CVector::zeros(8);
        let (f_bb, w) = update_digital(&analog, &f_opt, &w_opt).unwrap();
        assert!(f_bb.iter().all(|z| z.norm() < 1e-12));
        let res = objective(&f_opt, &w_opt, &analog, &f_bb, &w);
        assert!((res - fro2(&f_opt)).abs() < 1e-10 * fro2(&f_opt));
    }

    #[test]
    fn digital_update_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let analog = init_analog(12, 4, &mut rng).unwrap();
            let f_opt = gaussian_matrix(12, 3, &mut rng);
            let w_opt = gaussian_vector(12, &mut rng);
            let (f_bb, w) = update_digital(&analog, &f_opt, &w_opt).unwrap();
            assert!(max_abs_diff(&f_bb, &normal_equation_solve(&analog, &f_opt)) < 1e-9);
            let w_oracle = normal_equation_solve(&analog, &CMatrix::from_column_slice(12, 1, w_opt.as_slice()));
            assert!((0..4).all(|i| (w[i] - w_oracle[(i, 0)]).norm() < 1e-9));
        }
    }

    #[test]
    fn analog_update_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (nt, nrf, l) = (8, 3, 2);
        let prev = init_analog(nt, nrf, &mut rng).unwrap();
        let f_opt = gaussian_matrix(nt, l, &mut rng);
        let f_bb = gaussian_matrix(nrf, l, &mut rng);
        let w_opt = gaussian_vector(nt, &mut rng);
        let w = gaussian_vector(nrf, &mut rng);
        let out = update_analog(&f_opt, &f_bb, &w_opt, &w, &prev).unwrap();
        for i in 0..nt {
            for j in 0..nrf {
                let mut c = w_opt[i] * w[j].conj();
                for k in 0..l {
                    c += f_opt[(i, k)] * f_bb[(j, k)].conj();
                }
                let got = out[(i, j)].arg();
                let diff = (got - c.arg()).rem_euclid(TAU);
                assert!(diff.min(TAU - diff) < 1e-12);
                assert!((out[(i, j)].norm() - 1.0 / (nt as f64).sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn analog_update_real_positive_and_zero_cases() {
        let prev = init_analog(2, 1, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let f_opt = CMatrix::from_element(2, 1, C64::new(3.0, 0.0));
        let f_bb = CMatrix::from_element(1, 1, C64::new(2.0, 0.0));
        let zero_w = CVector::zeros(1);
        let out = update_analog(&f_opt, &f_bb, &CVector::zeros(2), &zero_w, &prev).unwrap();
        assert!(out.iter().all(|z| z.arg() == 0.0));

        let held = update_analog(&f_opt, &CMatrix::zeros(1, 1), &CVector::zeros(2), &zero_w, &prev).unwrap();
        assert_eq!(held, prev);
    }

    #[test]
    fn normalization_arithmetic() {
        // A single RF chain carrying all power on one antenna pair.
        let analog = CMatrix::from_element(4, 1, C64::new(0.5, 0.0));
        let h = HybridBeamformers {
            analog,
            digital: CMatrix::from_element(1, 1, C64::new(40f64.sqrt(), 0.0)),
            an_digital: CVector::zeros(1),
        };
        let n = normalize_power(&h, 10.0).unwrap();
        assert!((n.digital[(0, 0)].re / h.digital[(0, 0)].re - 0.5).abs() < 1e-15);
        let again = normalize_power(&n, 10.0).unwrap();
        assert!(max_abs_diff(&again.digital, &n.digital) < 1e-15);
        assert_eq!(again.analog, n.analog);

        let zero = HybridBeamformers { digital: CMatrix::zeros(1, 1), ..h };
        assert!(matches!(normalize_power(&zero, 10.0), Err(Error::ZeroPower)));
    }

    #[test]
    fn random_normalization_hits_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let h = HybridBeamformers {
                analog: init_analog(16, 4, &mut rng).unwrap(),
                digital: gaussian_matrix(4, 3, &mut rng),
                an_digital: gaussian_vector(4, &mut rng),
            };
            let p = rng.random_range(0.5..20.0);
            let n = normalize_power(&h, p).unwrap();
            let got = total_power(&effective_digital(&n).unwrap());
            assert!((got - p).abs() <= 1e-12 * p);
        }
    }

    #[test]
    fn square_analog_is_exact_after_first_digital_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f_opt = gaussian_matrix(16, 4, &mut rng);
        let w_opt = gaussian_vector(16, &mut rng);
        let res = decompose(&f_opt, &w_opt, 16, 10.0, &DecomposeOptions::default(), &mut rng).unwrap();
        assert!(res.residual_trace[0] < 1e-10 * fro2(&f_opt));
    }

    #[test]
    fn zero_input_converges_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let res = decompose(&CMatrix::zeros(8, 2), &CVector::zeros(8), 4, 10.0, &DecomposeOptions::default(), &mut rng)
            .unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        assert!(res.hybrid.digital.iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert!(res.hybrid.an_digital.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn paper_shape_is_monotone_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f_opt = gaussian_matrix(64, 4, &mut rng);
        let w_opt = gaussian_vector(64, &mut rng);
        let res = decompose(&f_opt, &w_opt, 8, 10.0, &DecomposeOptions::default(), &mut rng).unwrap();
        assert!(res.iterations <= 50);
        assert!(res.residual_trace.windows(2).all(|p| p[1] <= p[0]));
        let s = 1.0 / 8.0;
        assert!(res.hybrid.analog.iter().all(|z| (z.norm() - s).abs() < 1e-12));
        let p = total_power(&effective_digital(&res.hybrid).unwrap());
        assert!((p - 10.0).abs() < 1e-12 * 10.0);
    }

    #[test]
    fn first_trace_entry_is_digital_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f_opt = gaussian_matrix(12, 2, &mut rng);
        let w_opt = gaussian_vector(12, &mut rng);
        let mut init_rng = ChaCha8Rng::seed_from_u64(12);
        let analog = init_analog(12, 3, &mut init_rng.clone()).unwrap();
        let res = decompose(&f_opt, &w_opt, 3, 1.0, &DecomposeOptions::default(), &mut init_rng).unwrap();
        let x = normal_equation_solve(&analog, &f_opt);
        let wx = normal_equation_solve(&analog, &CMatrix::from_column_slice(12, 1, w_opt.as_slice()));
        let oracle = objective(&f_opt, &w_opt, &analog, &x, &wx.column(0).into_owned());
        assert!((res.residual_trace[0] - oracle).abs() < 1e-9 * oracle);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn trace_never_increases(seed in any::<u64>(), nrf in 2usize..6, l in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f_opt = gaussian_matrix(16, l, &mut rng);
            let w_opt = gaussian_vector(16, &mut rng);
            let res = decompose(&f_opt, &w_opt, nrf, 5.0, &DecomposeOptions::default(), &mut rng).unwrap();
            prop_assert!(res.residual_trace.windows(2).all(|p| p[1] <= p[0]));
            prop_assert!(res.iterations <= 50);
            prop_assert!(res.hybrid.analog.iter().all(|z| (z.norm() - 0.25).abs() < 1e-12));
        }
    }
}
