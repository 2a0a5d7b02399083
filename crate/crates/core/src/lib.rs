//! Hybrid convolution + quasi-recurrent threat classifier for network-flow
//! records, with its preprocessing pipeline, baseline models, evaluation
//! metrics and a training-time benchmark.

pub mod cli;
pub mod data;
pub mod error;
pub mod layers;
pub mod model;
pub mod recurrent;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, ErrorCategory, Result};
pub use rng::SeededRng;
pub use tensor::Tensor;
