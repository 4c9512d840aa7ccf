//! Federated objective, local training of a feed-forward network, dataset
//! handling and the partial/global aggregation primitives.

mod aggregate;
mod dataset;
mod idx;
mod mlp;
mod partition;
mod synthetic;
mod train;

pub use aggregate::{
    blend, fedavg, global_aggregate, organize_and_filter, partial_aggregate, CoverageReport,
    FilteredCollection, KeptPartial, PartialModel,
};
pub use dataset::{DataShard, Dataset};
pub use idx::{load_mnist, parse_idx_images, parse_idx_labels, read_maybe_gzip, IdxError};
pub use mlp::{Activation, Gradient, MlpArchitecture, Workspace};
pub use partition::{noniid_low_orbit_count, partition_iid, partition_noniid, NONIID_LOW_CLASSES};
pub use synthetic::{gaussian_blobs, two_gaussians};
pub use train::{
    evaluate, evaluate_accuracy, global_objective, local_loss, local_train, sample_loss,
    Evaluation,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbital::SatId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearningError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid hyper-parameters: {0}")]
    InvalidHyperParams(String),
    #[error("non-finite value during training at step {step}")]
    NonFinite { step: usize },
    #[error("satellite {0} is already covered by this partial model")]
    DuplicateSatellite(SatId),
    #[error("partial model for orbit {expected} cannot absorb satellite {sat}")]
    WrongOrbit { expected: u16, sat: SatId },
    #[error("invalid aggregation input: {0}")]
    InvalidAggregation(String),
    #[error("coverage incomplete, reschedule required ({} satellites missing)", missing.len())]
    Reschedule { missing: Vec<SatId> },
    #[error("cannot partition: {0}")]
    Partition(String),
}

/// Flat parameter vector. Per layer the weight matrix (`out × in`,
/// row-major) is followed by the bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVector {
    pub values: Vec<f64>,
}

impl ModelVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self ← (1−γ)·self + γ·other`.
    pub fn mix_in(&mut self, other: &ModelVector, gamma: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = (1.0 - gamma) * *a + gamma * b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub local_epochs: u32,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            local_epochs: 1,
            batch_size: 32,
            rng_seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), LearningError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(LearningError::InvalidHyperParams(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.local_epochs == 0 {
            return Err(LearningError::InvalidHyperParams("local_epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(LearningError::InvalidHyperParams("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finaliser.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG seed for one satellite's training in one round.
pub fn derive_seed(base: u64, round: u64, sat: SatId) -> u64 {
    let id = (u64::from(sat.orbit) << 16) | u64::from(sat.slot);
    splitmix(splitmix(splitmix(base) ^ round) ^ id)
}

/// Seed for a named stream (initialisation, partitioning, ...).
pub fn stream_seed(base: u64, stream: u64) -> u64 {
    splitmix(splitmix(base) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
