//! Minimal neural-network engine: layers with explicit forward/backward
//! passes, softmax cross-entropy, mini-batch SGD with dropout and early
//! stopping, and finite-difference gradient checks.

mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
mod loss;
mod lstm;
mod network;
mod params;
mod pool;
mod train;

use serde::{Deserialize, Serialize};

pub use conv::{conv1d_forward, conv2d_forward, Conv1d, Conv2d, Padding};
pub use dense::{dense_forward, Dense};
pub use dropout::{dropout_apply, Dropout};
pub use loss::{softmax, softmax_cross_entropy, LossValue};
pub use lstm::{lstm_step, Lstm};
pub use network::{Layer, Network};
pub use params::{sgd_update, LayerParams};
pub use pool::{maxpool_forward, maxpool_forward_indexed, MaxPool};
pub use train::{
    grid_search, train, EpochStats, Example, GridRow, GridSearchReport, TrainConfig, TrainHistory,
};

/// Seeded generator used for initialization, shuffling and dropout masks.
pub type NnRng = rand_chacha::ChaCha8Rng;

/// Pointwise nonlinearity applied after an affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply_in_place(self, values: &mut [f64]) {
        if let Activation::Relu = self {
            for v in values {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }

    /// Multiplies `grad` by the derivative evaluated at `pre`.
    pub fn backprop_in_place(self, pre: &[f64], grad: &mut [f64]) {
        if let Activation::Relu = self {
            for (g, &p) in grad.iter_mut().zip(pre) {
                if p <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}
