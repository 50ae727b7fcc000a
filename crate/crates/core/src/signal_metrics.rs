//! Performance functionals: SINR, secrecy rates, transmit covariance,
//! beampattern and power accounting.
//!
//! Everything operates on the effective fully-digital beamformers
//! `F_dig = F_RF F_BB`, `w_dig = F_RF w`; hybrid inputs go through
//! [`effective_digital`] first. Rates are in bits/s/Hz.

use crate::channel::{steering_from_angles, ChannelSet, Geometry};
use crate::linalg::{fro2, inner, norm2_sq};
use crate::{CMatrix, CVector, Error, Result, ScenarioConfig, C64};

/// Fully-digital precoders (one column per legitimate UAV) plus the AN vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalBeamformers {
    pub precoders: CMatrix,
    pub an_vector: CVector,
}

impl DigitalBeamformers {
    pub fn new(precoders: CMatrix, an_vector: CVector) -> Result<Self> {
        if precoders.nrows() != an_vector.len() {
            return Err(Error::Dimension(format!(
                "precoders have {} rows but AN vector has {} entries",
                precoders.nrows(),
                an_vector.len()
            )));
        }
        Ok(Self { precoders, an_vector })
    }

    pub fn zeros(n_antennas: usize, n_users: usize) -> Self {
        Self {
            precoders: CMatrix::zeros(n_antennas, n_users),
            an_vector: CVector::zeros(n_antennas),
        }
    }

    pub fn n_antennas(&self) -> usize {
        self.an_vector.len()
    }

    pub fn n_users(&self) -> usize {
        self.precoders.ncols()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            precoders: &self.precoders * C64::new(factor, 0.0),
            an_vector: &self.an_vector * C64::new(factor, 0.0),
        }
    }
}

/// Analog phase-shifter matrix `F_RF` (N_t x N_RF) with digital stage
/// `F_BB` (N_RF x L) and AN weights `w` (N_RF).
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBeamformers {
    pub analog: CMatrix,
    pub digital: CMatrix,
    pub an_digital: CVector,
}

impl HybridBeamformers {
    pub fn n_antennas(&self) -> usize {
        self.analog.nrows()
    }

    pub fn n_rf_chains(&self) -> usize {
        self.analog.ncols()
    }
}

pub fn effective_digital(h: &HybridBeamformers) -> Result<DigitalBeamformers> {
    let nrf = h.analog.ncols();
    if h.digital.nrows() != nrf || h.an_digital.len() != nrf {
        return Err(Error::Dimension(format!(
            "analog has {nrf} RF chains, digital has {} rows, AN has {} entries",
            h.digital.nrows(),
            h.an_digital.len()
        )));
    }
    Ok(DigitalBeamformers {
        precoders: &h.analog * &h.digital,
        an_vector: &h.analog * &h.an_digital,
    })
}

/// `||F_dig||_F^2 + ||w_dig||^2`.
pub fn total_power(beams: &DigitalBeamformers) -> f64 {
    fro2(&beams.precoders) + norm2_sq(&beams.an_vector)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    Legit(usize),
    Eve(usize),
}

/// Receiver noise powers, one per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    pub legit: Vec<f64>,
    pub eves: Vec<f64>,
}

impl NoiseProfile {
    pub fn uniform(sigma2: f64, n_legit: usize, n_eves: usize) -> Self {
        Self { legit: vec![sigma2; n_legit], eves: vec![sigma2; n_eves] }
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            legit: (0..cfg.n_legit).map(|l| cfg.legit_noise(l)).collect(),
            eves: (0..cfg.n_eves).map(|e| cfg.eve_noise(e)).collect(),
        }
    }

    fn of(&self, rx: Receiver) -> f64 {
        match rx {
            Receiver::Legit(l) => self.legit[l],
            Receiver::Eve(e) => self.eves[e],
        }
    }
}

fn receiver_channel(channels: &ChannelSet, rx: Receiver) -> &CVector {
    match rx {
        Receiver::Legit(l) => &channels.legit[l],
        Receiver::Eve(e) => &channels.eves[e],
    }
}

/// SINR of stream `target` at `receiver`.
///
/// The other streams and the AN count as interference.
pub fn sinr(
    channels: &ChannelSet,
    beams: &DigitalBeamformers,
    target: usize,
    receiver: Receiver,
    noise: f64,
) -> f64 {
    let h = receiver_channel(channels, receiver);
    sinr_from_gains(&stream_gains(h, beams), inner(h, &beams.an_vector).norm_sqr(), target, noise)
}

fn stream_gains(h: &CVector, beams: &DigitalBeamformers) -> Vec<f64> {
    // |h^H f_j|^2 for every column j
    let g = beams.precoders.adjoint() * h;
    g.iter().map(|z| z.norm_sqr()).collect()
}

fn sinr_from_gains(gains: &[f64], an_gain: f64, target: usize, noise: f64) -> f64 {
    let interference: f64 = gains
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target)
        .map(|(_, g)| g)
        .sum();
    gains[target] / (interference + an_gain + noise)
}

/// Per-user legitimate, eavesdropper and secrecy rates for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyReport {
    pub legit_rates: Vec<f64>,
    /// `eve_rates[e][l]`: rate of eavesdropper `e` on stream `l`.
    pub eve_rates: Vec<Vec<f64>>,
    pub secrecy_rates: Vec<f64>,
    pub sum_secrecy: f64,
}

pub fn secrecy_report(
    channels: &ChannelSet,
    beams: &DigitalBeamformers,
    noise: &NoiseProfile,
) -> SecrecyReport {
    let n_users = beams.n_users();
    let rates_at = |rx: Receiver| -> Vec<f64> {
        let h = receiver_channel(channels, rx);
        let gains = stream_gains(h, beams);
        let an_gain = inner(h, &beams.an_vector).norm_sqr();
        (0..n_users)
            .map(|l| (1.0 + sinr_from_gains(&gains, an_gain, l, noise.of(rx))).log2())
            .collect()
    };
    let legit_rates: Vec<f64> = (0..n_users).map(|l| rates_at(Receiver::Legit(l))[l]).collect();
    let eve_rates: Vec<Vec<f64>> = (0..channels.n_eves()).map(|e| rates_at(Receiver::Eve(e))).collect();
    let secrecy_rates: Vec<f64> = (0..n_users)
        .map(|l| {
            let worst = eve_rates.iter().map(|r| r[l]).fold(0.0_f64, f64::max);
            (legit_rates[l] - worst).max(0.0)
        })
        .collect();
    let sum_secrecy = secrecy_rates.iter().sum();
    SecrecyReport { legit_rates, eve_rates, secrecy_rates, sum_secrecy }
}

/// `R_x = F_dig F_dig^H + w_dig w_dig^H`.
pub fn covariance(beams: &DigitalBeamformers) -> CMatrix {
    let f = &beams.precoders;
    let w = &beams.an_vector;
    f * f.adjoint() + w * w.adjoint()
}

/// Largest imaginary part of `a^H R_x a` tolerated before the covariance is
/// declared non-Hermitian, relative to `max(1, |P|)`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

pub fn beampattern(rx: &CMatrix, geom: &Geometry, nx: usize, ny: usize) -> Result<f64> {
    beampattern_at(rx, geom.azimuth_rad, geom.elevation_rad, nx, ny)
}

/// `a^H(phi, theta) R_x a(phi, theta)`.
pub fn beampattern_at(rx: &CMatrix, azimuth: f64, elevation: f64, nx: usize, ny: usize) -> Result<f64> {
    let a = steering_from_angles(azimuth, elevation, nx, ny);
    if rx.nrows() != a.len() || rx.ncols() != a.len() {
        return Err(Error::Dimension(format!(
            "covariance is {}x{}, array has {} elements",
            rx.nrows(),
            rx.ncols(),
            a.len()
        )));
    }
    let p = inner(&a, &(rx * &a));
    if p.im.abs() > HERMITIAN_TOLERANCE * p.re.abs().max(1.0) {
        return Err(Error::NonHermitian { residue: p.im.abs() });
    }
    Ok(p.re)
}

/// `P(phi_e, theta_e) d_e^-2 - Gamma_e`; non-negative when the eavesdropper
/// is illuminated strongly enough.
pub fn sensing_margin(rx: &CMatrix, eve: &Geometry, threshold: f64, nx: usize, ny: usize) -> Result<f64> {
    let p = beampattern(rx, eve, nx, ny)?;
    Ok(p / (eve.distance_m * eve.distance_m) - threshold)
}
