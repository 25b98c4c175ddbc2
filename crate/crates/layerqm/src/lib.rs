// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod layer_green;
pub mod magnetic;
pub mod scattering;
pub mod specfun;
pub mod spectrum_multi;
pub mod spectrum_single;

pub use error::{Error, Result};
