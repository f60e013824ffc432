//! Penalized regression for multi-modality data with stability selection.
//!
//! The crate fits LASSO / Elastic-Net models where every data modality
//! (block of features from one source) can carry its own penalty factor,
//! wraps any such selector in complementary-pairs stability selection with
//! certified bounds on the expected number of false positives, and ships a
//! simulation harness that benchmarks the resulting procedures on designs
//! with known ground truth.

pub mod bounds;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod simgen;
pub mod solver;
pub mod stabsel;
pub mod tuner;

pub use data::{Dataset, Family};
pub use error::{Error, Result};
pub use solver::{FitResult, PenaltySpec, SolverOptions};
