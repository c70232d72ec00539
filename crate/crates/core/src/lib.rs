//! # ecgfuse
//!
//! Multi-lead ECG classification built from windowed spectrograms, deep
//! feature embeddings and small trainable heads.
//!
//! The pipeline runs in stages:
//!
//! 1. [`ingest`]: parse 12-lead records (CSV + JSON sidecar or 16-bit
//!    WFDB), validate leads, resample to 500 Hz and truncate to 10 s.
//! 2. [`dsp`]: band-pass filtering, 1 s windows at 50% overlap, Hann STFT
//!    (0.1 s chunks, 90% overlap, 26×91 spectrograms) and log
//!    normalization.
//! 3. [`encoder`]: colormap + resize + embedding backend (ONNX network or a
//!    seeded random projection), with an on-disk feature cache.
//! 4. [`fusion`]: stacked-spectrogram data fusion, feature concatenation or
//!    accumulation, and decision accumulation / majority vote.
//! 5. [`model`]: dense, LSTM and dense→LSTM heads with analytic gradients
//!    and Adam.
//! 6. [`eval`]: stratified folds, class-proportional batches, AUROC and
//!    confusion-matrix metrics, cross-validated experiments.
//!
//! [`pipeline`] ties the stages to hash-stamped configs and on-disk
//! artifacts; the `ecgfuse` binary is a thin CLI over it.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod dsp;
pub mod encoder;
pub mod eval;
pub mod fusion;
pub mod ingest;
pub mod model;
pub mod pipeline;
mod scalar;

pub use scalar::Scalar;

pub use dsp::{Spectrogram, Window};
pub use encoder::{EmbeddingBackend, FeatureVector};
pub use fusion::{FusionStrategy, StackedSpectrogram};
pub use ingest::{DiagnosisLabel, EcgRecord, LeadId};
pub use model::{ModelMode, ModelParams, Prediction};

pub type Spectrogram32 = Spectrogram<f32>;
pub type Spectrogram64 = Spectrogram<f64>;
pub type FeatureVector32 = FeatureVector<f32>;
pub type FeatureVector64 = FeatureVector<f64>;
pub type ModelParams32 = ModelParams<f32>;
pub type ModelParams64 = ModelParams<f64>;
pub type Prediction64 = Prediction<f64>;

/// Number of leads in a standard ECG montage.
pub const N_LEADS: usize = 12;
