//! Complex linear-algebra aliases and the rank-revealing pseudo-inverse.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Moore-Penrose pseudo-inverse through the SVD.
///
/// Singular values at or below `max(rows, cols) * eps * sigma_max` are
/// treated as zero.
pub fn pinv(a: &CMatrix) -> CMatrix {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return CMatrix::zeros(cols, rows);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rows.max(cols) as f64 * f64::EPSILON * sigma_max;

    let k = svd.singular_values.len();
    let mut out = CMatrix::zeros(cols, rows);
    for s in 0..k {
        let sv = svd.singular_values[s];
        if sv <= cutoff || sv == 0.0 {
            continue;
        }
        let inv = 1.0 / sv;
        // out += v_s * inv * u_s^H
        for i in 0..cols {
            let vi = v_t[(s, i)].conj() * inv;
            for j in 0..rows {
                out[(i, j)] += vi * u[(j, s)].conj();
            }
        }
    }
    out
}

/// Squared Frobenius norm.
pub fn fro2(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm2_sq(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b` for column vectors.
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}
