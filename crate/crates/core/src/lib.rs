//! Dual-path data-augmented (DPDA) training with gradient alignment.
//!
//! Every training utterance is fed through two paths: its original waveform and
//! an augmented copy. The per-path gradients are compared and, when they
//! disagree, reconciled by one of the registered alignment strategies
//! ([`align::AlignerRegistry`]) before the optimizer step.
//!
//! The crate is organised bottom-up:
//!
//! - [`numkit`]: flat parameter vectors, orthogonalisation, 1-D minimisation, RNG.
//! - [`align`]: conflict detection and the PCGrad / GradVac / CAGrad strategies.
//! - [`audio`]: synthetic bona-fide/spoof waveforms, augmentation chain, features.
//! - [`model`]: a small MLP with exact backprop, optimizers and checkpoints.
//! - [`trainer`]: the dual-path loop, early stopping and CSV telemetry.
//! - [`metrics`]: equal error rate and conflict statistics.
//! - [`surface`]: 2-D loss-landscape probes.
//! - [`config`]: the JSON run configuration with dotted-key overrides.

pub mod align;
pub mod audio;
pub mod config;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numkit;
pub mod surface;
pub mod trainer;

pub use error::{DpdaError, Result};
pub use numkit::{ParamVector, Rng};
