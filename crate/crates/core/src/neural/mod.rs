//! Dense networks with hand-derived gradients.
//!
//! Everything here is `f64`. Parameters of a network live in one flat
//! vector so that the optimizer and the finite-difference checker can treat
//! every network the same way.

mod adam;
mod checkpoint;
mod gradcheck;
mod mlp;
mod policy;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_mlp, write_mlp, PolicyCheckpoint};
pub use gradcheck::{finite_diff_check, relative_error, FD_STEP, FD_FLOOR};
pub use mlp::{ForwardCache, Mlp};
pub use policy::{gaussian_log_prob, GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
