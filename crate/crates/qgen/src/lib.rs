//! Exact finite-dimensional generalization bounds for learners acting on
//! classical-quantum data.
#![forbid(unsafe_code)]

pub mod bounds;
pub mod cqdata;
pub mod entropy;
pub mod error;
pub mod loss;
pub mod mgf;
pub mod qmat;
pub mod random;
pub mod scenarios;
mod sdp;
pub mod w1;

pub use error::{Error, Result};
