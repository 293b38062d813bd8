//! Bias-free multinomial logistic regression for class sets that mix
//! well-populated base classes with one-shot classes.
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! - [`linalg`]: dense matrices, stable softmax, seeded RNG
//! - [`dataset`]: synthetic base / low-shot data, oversampling, CSV
//! - [`model`]: identity or MLP extractor with manual backprop, bias-free head
//! - [`losses`]: cross entropy, the cosine-to-class-weight (CCS) feature
//!   regularizer, center loss, and the UP / shrink / equal-norm weight priors
//! - [`trainer`]: two-phase SGD and the eight-method comparison suite
//! - [`eval`]: coverage@precision, precision-coverage curves, KNN baseline
//! - [`experiment`]: config-file driven commands behind the `lowshot` binary
//!
//! Runnable walkthroughs live in `examples/`.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod trainer;

pub use error::{Error, Result};
