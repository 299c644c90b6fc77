//! Hybrid GRU + Neural Turing Machine classifier for network-traffic
//! windows (Normal / DoS / DDoS), with the full data pipeline, training
//! protocol and evaluation suite.
//!
//! Everything is deterministic per seed: the RNG algorithm is fixed
//! (xoshiro256** seeded via splitmix64), reductions run in a fixed order,
//! and all math is 64-bit.

pub mod data;
pub mod error;
pub mod eval;
pub(crate) mod fileio;
pub mod layers;
mod linalg;
pub mod model;
pub mod ntm;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::Tensor;

/// Finite-difference helpers shared by the unit tests. Independent of the
/// backward-pass code they check.
#[cfg(test)]
pub(crate) mod testutil {
    /// Central difference (f(+eps) - f(-eps)) / 2 eps.
    pub fn central_diff(eps: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        (f(eps) - f(-eps)) / (2.0 * eps)
    }

    /// Relative error with denominator max(|a|, |b|, 1e-8).
    pub fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }
}
