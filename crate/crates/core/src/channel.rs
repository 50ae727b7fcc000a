//! Line-of-sight mmWave channels from a UPA base station to the UAVs.
//!
//! `h = g(d) * alpha * a(phi, theta)` with the deterministic amplitude
//! `g(d) = c / (4 pi f_c) * d^-kappa`, a unit-variance complex-normal fading
//! gain `alpha` and the unit-norm UPA steering vector `a`.
//!
//! Angles: the array lies in the x-y plane. Azimuth is measured in that plane
//! from the x-axis; elevation is the polar angle from the array normal (+z),
//! so a node straight above the array sits at elevation zero.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CVector, Error, Result, ScenarioConfig, C64};

pub const SPEED_OF_LIGHT: f64 = 2.998e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
    pub distance_m: f64,
}

impl Geometry {
    pub fn new(azimuth_rad: f64, elevation_rad: f64, distance_m: f64) -> Self {
        Self { azimuth_rad, elevation_rad, distance_m }
    }
}

pub fn angles_from_positions(base: [f64; 3], node: [f64; 3]) -> Result<Geometry> {
    let dx = node[0] - base[0];
    let dy = node[1] - base[1];
    let dz = node[2] - base[2];
    let distance = (dx * dx + dy * dy + dz * dz).sqrt();
    if distance == 0.0 {
        return Err(Error::CoincidentPoints(node));
    }
    Ok(Geometry {
        azimuth_rad: dy.atan2(dx),
        elevation_rad: (dz / distance).clamp(-1.0, 1.0).acos(),
        distance_m: distance,
    })
}

/// UPA response toward `geom`.
///
/// Entry `n_x * ny + n_y` holds
/// `exp(-j pi sin(theta) (n_x cos(phi) + n_y sin(phi))) / sqrt(nx * ny)`,
/// i.e. the x index is the slow one.
pub fn steering_vector(geom: &Geometry, nx: usize, ny: usize) -> CVector {
    steering_from_angles(geom.azimuth_rad, geom.elevation_rad, nx, ny)
}

pub fn steering_from_angles(azimuth: f64, elevation: f64, nx: usize, ny: usize) -> CVector {
    let nt = nx * ny;
    let scale = 1.0 / (nt as f64).sqrt();
    let s = std::f64::consts::PI * elevation.sin();
    let (sin_phi, cos_phi) = azimuth.sin_cos();
    CVector::from_fn(nt, |idx, _| {
        let ix = (idx / ny) as f64;
        let iy = (idx % ny) as f64;
        let phase = -s * (ix * cos_phi + iy * sin_phi);
        C64::from_polar(scale, phase)
    })
}

/// Large-scale amplitude `g(d)`.
pub fn path_amplitude(distance_m: f64, carrier_hz: f64, kappa: f64) -> f64 {
    SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * carrier_hz) * distance_m.powf(-kappa)
}

pub fn channel_vector(
    geom: &Geometry,
    alpha: C64,
    carrier_hz: f64,
    kappa: f64,
    nx: usize,
    ny: usize,
) -> CVector {
    let g = path_amplitude(geom.distance_m, carrier_hz, kappa);
    steering_vector(geom, nx, ny) * (alpha * g)
}

/// One draw of CN(0, 1): real and imaginary parts i.i.d. N(0, 1/2).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Channels of every link for one time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub legit: Vec<CVector>,
    pub eves: Vec<CVector>,
    pub legit_geometry: Vec<Geometry>,
    pub eve_geometry: Vec<Geometry>,
    pub legit_fading: Vec<C64>,
    pub eve_fading: Vec<C64>,
}

impl ChannelSet {
    pub fn n_legit(&self) -> usize {
        self.legit.len()
    }

    pub fn n_eves(&self) -> usize {
        self.eves.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.legit.first().map_or(0, |h| h.len())
    }
}

/// Draws fresh fading for all `L + E` links and assembles their channels.
///
/// Fading is drawn for the legitimate links first, then the eavesdroppers.
pub fn realize_channels<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    legit_positions: &[[f64; 3]],
    rng: &mut R,
) -> Result<ChannelSet> {
    if legit_positions.len() != config.n_legit {
        return Err(Error::Dimension(format!(
            "expected {} legitimate positions, got {}",
            config.n_legit,
            legit_positions.len()
        )));
    }
    let (nx, ny) = (config.n_antennas_x, config.n_antennas_y);
    let mut link = |pos: &[f64; 3]| -> Result<(CVector, Geometry, C64)> {
        let geom = angles_from_positions(config.base_position, *pos)?;
        let alpha = complex_normal(rng);
        let h = channel_vector(&geom, alpha, config.carrier_hz, config.pathloss_exponent, nx, ny);
        Ok((h, geom, alpha))
    };
    let mut set = ChannelSet {
        legit: Vec::with_capacity(config.n_legit),
        eves: Vec::with_capacity(config.n_eves),
        legit_geometry: Vec::with_capacity(config.n_legit),
        eve_geometry: Vec::with_capacity(config.n_eves),
        legit_fading: Vec::with_capacity(config.n_legit),
        eve_fading: Vec::with_capacity(config.n_eves),
    };
    for pos in legit_positions {
        let (h, g, a) = link(pos)?;
        set.legit.push(h);
        set.legit_geometry.push(g);
        set.legit_fading.push(a);
    }
    for pos in &config.eve_positions {
        let (h, g, a) = link(pos)?;
        set.eves.push(h);
        set.eve_geometry.push(g);
        set.eve_fading.push(a);
    }
    Ok(set)
}
