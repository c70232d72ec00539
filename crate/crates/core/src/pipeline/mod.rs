//! Hash-stamped configuration, on-disk artifacts and the stage functions
//! behind the `ecgfuse` CLI.
//!
//! Artifacts:
//!
//! * manifest JSON (ingest): source paths, labels and validation flags;
//! * spectrogram directory: `<record>.spec` binaries, optional PNGs;
//! * feature cache directory: `cache.json` index plus one `ECGF1` blob
//!   per record;
//! * `ECGM1` checkpoint with the per-fold models;
//! * metrics JSON.
//!
//! Each carries the digest of the configuration that produced it, and
//! stages refuse inputs whose digest does not match.

mod config;
mod encode;
mod manifest;
mod spectrograms;
mod sweep;
pub mod synthetic;
mod training;

pub use config::{canonical_json, sha256_hex, IngestOptions, PipelineConfig, UpstreamConfig};
pub use encode::{
    encode_record, encode_stage, labeled_records, load_cache, CacheEntry, CacheIndex, CACHE_INDEX,
};
pub use manifest::{ingest_stage, load_record, Manifest, ManifestEntry};
pub use spectrograms::{read_spectrograms, spectrogram_stage, write_spectrograms, SpectrogramIndex};
pub use sweep::{sweep_stage, SweepGrid, SweepRow};
pub use training::{
    evaluate_stage, predict_record, train_stage, CheckpointMeta, PredictOutput, TrainSummary,
};

use std::path::Path;

use thiserror::Error;

use crate::dsp::DspError;
use crate::encoder::EncoderError;
use crate::eval::EvalError;
use crate::fusion::FusionError;
use crate::ingest::IngestError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stale cache: artifact hash {found} does not match configuration hash {expected}")]
    StaleCache { expected: String, found: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl PipelineError {
    /// 1 for bad data, 2 for bad configuration or mismatched artifacts.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::StaleCache { .. } => 2,
            PipelineError::Encoder(
                EncoderError::BackendLoadFailure(_)
                | EncoderError::UnsupportedFormat(_)
                | EncoderError::TauMismatch { .. },
            ) => 2,
            PipelineError::Eval(EvalError::ConfigInvalid(_)) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// Writes via a temporary sibling and renames into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| PipelineError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// File-system safe form of a record id.
pub(crate) fn file_stem(record_id: &str) -> String {
    record_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}
