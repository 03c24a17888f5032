//! Experiment bench for neural-network corporate credit-rating
//! classification on quarterly financial panels.

pub mod data_panel;
pub mod error;
pub mod experiments;
pub mod features;
pub mod model_zoo;
pub mod nn;
pub mod report;
pub mod splitters;
pub mod stats;
pub mod synthgen;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
