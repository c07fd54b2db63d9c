//! Numerical primitives shared by every other module.

pub mod adam;
pub mod autodiff;
pub mod finite_diff;
pub mod params;
pub mod reduce;
pub mod rng;
pub mod samples;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use autodiff::{Real, Tape, Var};
pub use finite_diff::finite_diff_grad;
pub use params::{Layout, ParamBlock, ParamVector};
pub use reduce::{log_sum_exp, log_sum_exp_real, softmax};
pub use rng::RngKey;
pub use samples::SampleMatrix;
