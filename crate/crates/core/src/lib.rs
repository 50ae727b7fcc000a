//! Secure multi-UAV integrated sensing and communication (ISAC).
//!
//! A terrestrial base station with a uniform planar array serves `L`
//! legitimate UAVs over mmWave line-of-sight channels while `E` static
//! eavesdropper UAVs listen in. The base station radiates confidential
//! streams plus an artificial-noise (AN) signal that both jams the
//! eavesdroppers and illuminates them for sensing.
//!
//! The crate is organised as a two-stage pipeline:
//!
//! 1. [`ppo`] trains a Gaussian actor-critic agent on the episodic MDP in
//!    [`env`] to pick fully-digital beamformers, AN and UAV movements.
//! 2. [`hbf`] factors each fully-digital beamformer into a constant-modulus
//!    analog matrix and a low-dimensional digital stage via alternating
//!    optimization.
//!
//! [`channel`] and [`signal_metrics`] hold the physics and the performance
//! functionals; [`scenario`] holds configuration; [`harness`] and [`io`]
//! cover experiment orchestration and the on-disk formats.

pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod hbf;
pub mod io;
pub mod linalg;
pub mod neural;
pub mod ppo;
pub mod scenario;
pub mod signal_metrics;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use scenario::ScenarioConfig;
