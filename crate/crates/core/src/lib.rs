//! Author profiling: predicts an author's gender and language variety from
//! their posts with an ensemble of eight probability-calibrated linear SVMs,
//! one per character (n = 1..6) or word (n = 1, 2) n-gram scheme, fused by
//! summing class probabilities.
//!
//! The `parallel` feature (on by default) runs tuning, training and
//! prediction on the rayon pool; without it everything runs sequentially
//! with identical results.

pub mod cli;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod linsvm;
pub mod par;
pub mod sparse;

pub use error::{Error, Result};
