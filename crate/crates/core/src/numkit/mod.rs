//! Deterministic numeric kernels shared by every other module.

mod rng;
mod scalar;
mod vector;

pub use rng::{derive_seed, Rng};
pub use scalar::minimize_scalar;
pub use vector::{cosine, dot, norm, orthonormalize_pair, ParamVector};
