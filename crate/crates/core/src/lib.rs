//! Nearly-unstable multivariate Hawkes models of tick-by-tick prices and their
//! rough-volatility scaling limits.

pub mod error;
pub mod hawkes;
pub mod kernels;
pub mod matalg;
pub mod spectrum;
pub mod stats;
pub mod volterra;

pub use error::{Error, Result};
pub use matalg::{GridFunction, Matrix, Vector};
