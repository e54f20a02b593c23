// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod error;
pub mod field_sampler;
pub mod hermite_chaos;
pub mod normal;
pub mod quadrature;
pub mod stein_bounds;
pub mod study;
pub mod variance_theory;

pub use error::{Error, Result};
