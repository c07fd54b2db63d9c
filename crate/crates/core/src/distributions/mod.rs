//! Base densities, spline transforms and variational families.

pub mod base;
pub mod conditioner;
pub mod eight_schools;
pub mod family;
pub mod flow;
pub mod garch;
pub mod gaussian;
pub mod rqs;
pub mod support;

pub use base::BaseDensity;
pub use family::{PathwiseSample, VariationalFamily};
pub use rqs::{rqs_forward, rqs_inverse, RqsTransform};
pub use support::{Constraint, Support};
