//! Contrastive soft-label variational inference.
//!
//! The crate fits a variational density `q_φ(θ)` to an unnormalized
//! posterior `p(θ, x_obs)` by soft-label classification over samples drawn
//! from `q_φ` itself, alongside ELBO and self-normalized forward-KL
//! baselines. It also ships benchmark models, reference-posterior samplers,
//! calibration metrics and an experiment harness.

pub mod descriptor;
pub mod distributions;
pub mod metrics;
pub mod error;
pub mod harness;
pub mod models;
pub mod numeric;
pub mod objectives;
pub mod reference;

pub use error::{Error, Result};
