//! Classifier heads over per-window feature sequences: spectral (dense +
//! softmax), longitudinal (LSTM), and joint (dense feeding the LSTM).

mod adam;
mod backward;
mod checkpoint;
mod forward;
mod init;
mod params;

pub use adam::{adam_step, OptimizerState};
pub use backward::{backward, batch_loss, sample_gradient, Sample};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use forward::{
    dense_forward, forward_sequence, forward_trace, head_forward, head_logits, log_softmax,
    loss, lstm_step, softmax, ForwardTrace,
};
pub use init::init_params;
pub use params::{DenseParams, HeadParams, LstmParams, ModelDims, ModelMode, ModelParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("target class {target} out of range for {n_classes} classes")]
    InvalidTarget { target: usize, n_classes: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error("{0}")]
    Io(String),
}

/// Class probabilities and the arg-max label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub probs: Vec<T>,
    pub label: usize,
}

impl<T: Scalar> Prediction<T> {
    /// Arg-max with the lowest index winning ties.
    pub fn from_probs(probs: Vec<T>) -> Self {
        let label = argmax(&probs);
        Self { probs, label }
    }

    pub fn from_logits(logits: &[T]) -> Self {
        Self::from_probs(softmax(logits))
    }

    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn cast<U: Scalar>(&self) -> Prediction<U> {
        Prediction {
            probs: self.probs.iter().map(|p| U::lit(p.as_f64())).collect(),
            label: self.label,
        }
    }
}

pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index() {
        let p = Prediction::from_probs(vec![0.4, 0.4, 0.2]);
        assert_eq!(p.label, 0);
        let p = Prediction::from_probs(vec![0.1, 0.45, 0.45]);
        assert_eq!(p.label, 1);
    }
}
