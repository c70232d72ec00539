//! Spectrogram → deep feature vector.
//!
//! A spectrogram is colormapped, fitted into the backend's input
//! resolution and embedded. Backends are either ONNX networks with an
//! exposed penultimate layer or a seeded random projection that needs no
//! weights.

mod cache;
mod fallback;
#[cfg(feature = "onnx")]
mod onnx;
mod resize;

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::dsp::{render_image, Colormap, DspError, Spectrogram};
use crate::ingest::LeadId;
use crate::Scalar;

pub use cache::{read_feature_blob, write_feature_blob, FeatureBlob, CACHE_MAGIC};
pub use fallback::RandomProjectionBackend;
#[cfg(feature = "onnx")]
pub use onnx::{load_backend, OnnxBackend, PENULTIMATE_OUTPUT};
pub use resize::fit_image;

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error("failed to load backend: {0}")]
    BackendLoadFailure(String),
    #[error("unsupported network file: {0}")]
    UnsupportedFormat(String),
    #[error("penultimate layer is {found} wide, expected {expected}")]
    TauMismatch { expected: usize, found: usize },
    #[error("backend produced {found} values, expected {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite values in encoder input or output")]
    NonFiniteOutput,
    #[error("backend inference failed: {0}")]
    Inference(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("feature cache: {0}")]
    Cache(String),
}

/// Where a feature vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSource {
    SingleLead { lead: LeadId, n: usize },
    Fused { n: usize },
}

/// τ-dimensional embedding of one spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub backend_id: String,
    pub source: FeatureSource,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn tau(&self) -> usize {
        self.values.len()
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }
}

/// An image embedding network. Implementations must be deterministic and
/// safe to call concurrently.
pub trait EmbeddingBackend: Send + Sync {
    fn id(&self) -> &str;
    fn tau(&self) -> usize;
    /// Expected input as `(width, height)`, three channels.
    fn input_size(&self) -> (u32, u32);
    /// Embeds an image already sized to [`input_size`](Self::input_size).
    fn embed(&self, image: &RgbImage) -> Result<Vec<f32>, EncoderError>;
}

impl<B: EmbeddingBackend + ?Sized> EmbeddingBackend for Box<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn tau(&self) -> usize {
        (**self).tau()
    }
    fn input_size(&self) -> (u32, u32) {
        (**self).input_size()
    }
    fn embed(&self, image: &RgbImage) -> Result<Vec<f32>, EncoderError> {
        (**self).embed(image)
    }
}

/// Colormap, fit to the backend's input and embed a normalized
/// spectrogram (single-lead or stacked).
pub fn encode<T: Scalar, B: EmbeddingBackend + ?Sized>(
    backend: &B,
    spec: &Spectrogram<T>,
    colormap: Colormap,
    source: FeatureSource,
) -> Result<FeatureVector<T>, EncoderError> {
    if !spec.is_finite() {
        return Err(EncoderError::NonFiniteOutput);
    }
    let rendered = render_image(spec, colormap)?;
    let (w, h) = backend.input_size();
    let input = fit_image(&rendered.image, w, h, colormap.zero_color());
    let raw = backend.embed(&input)?;
    if raw.len() != backend.tau() {
        return Err(EncoderError::ShapeMismatch {
            expected: backend.tau(),
            found: raw.len(),
        });
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(EncoderError::NonFiniteOutput);
    }
    Ok(FeatureVector {
        values: raw.into_iter().map(|v| T::lit(v as f64)).collect(),
        backend_id: backend.id().to_string(),
        source,
    })
}

/// Network family of an ONNX backend, fixing the expected embedding width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    InceptionClass,
    MnasnetClass,
}

impl BackendKind {
    pub fn tau(self) -> usize {
        match self {
            BackendKind::InceptionClass => 2048,
            BackendKind::MnasnetClass => 1056,
        }
    }

    /// Native square input side used when the file leaves it symbolic.
    pub fn default_input_side(self) -> u32 {
        match self {
            BackendKind::InceptionClass => 299,
            BackendKind::MnasnetClass => 224,
        }
    }

    pub fn from_tau(tau: usize) -> Option<Self> {
        match tau {
            2048 => Some(BackendKind::InceptionClass),
            1056 => Some(BackendKind::MnasnetClass),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::InceptionClass => "inception",
            BackendKind::MnasnetClass => "mnasnet",
        }
    }
}

/// Textual backend selector, e.g. `fallback:64:7`, `onnx:net.onnx`,
/// `onnx-mnasnet:net.onnx`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum BackendSpec {
    Fallback { tau: usize, seed: u64 },
    /// `kind = None` infers the family from the penultimate width.
    Onnx { path: String, kind: Option<BackendKind> },
}

impl BackendSpec {
    pub fn build(&self) -> Result<Box<dyn EmbeddingBackend>, EncoderError> {
        match self {
            BackendSpec::Fallback { tau, seed } => {
                Ok(Box::new(RandomProjectionBackend::new(*tau, *seed)))
            }
            #[cfg(feature = "onnx")]
            BackendSpec::Onnx { path, kind } => {
                Ok(Box::new(onnx::load_backend_inferred(std::path::Path::new(path), *kind)?))
            }
            #[cfg(not(feature = "onnx"))]
            BackendSpec::Onnx { .. } => Err(EncoderError::BackendLoadFailure(
                "built without the `onnx` feature".into(),
            )),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Fallback { tau, seed } => write!(f, "fallback:{tau}:{seed}"),
            BackendSpec::Onnx { path, kind: None } => write!(f, "onnx:{path}"),
            BackendSpec::Onnx { path, kind: Some(k) } => write!(f, "onnx-{}:{path}", k.name()),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("backend `{s}` needs the form kind:args"))?;
        match head {
            "fallback" => {
                let (tau, seed) = rest
                    .split_once(':')
                    .ok_or_else(|| format!("fallback backend needs tau:seed, got `{rest}`"))?;
                let tau: usize = tau.parse().map_err(|_| format!("bad tau `{tau}`"))?;
                if tau == 0 {
                    return Err("tau must be positive".into());
                }
                let seed = seed.parse().map_err(|_| format!("bad seed `{seed}`"))?;
                Ok(BackendSpec::Fallback { tau, seed })
            }
            "onnx" => Ok(BackendSpec::Onnx { path: rest.into(), kind: None }),
            "onnx-inception" => Ok(BackendSpec::Onnx {
                path: rest.into(),
                kind: Some(BackendKind::InceptionClass),
            }),
            "onnx-mnasnet" => Ok(BackendSpec::Onnx {
                path: rest.into(),
                kind: Some(BackendKind::MnasnetClass),
            }),
            other => Err(format!("unknown backend kind `{other}`")),
        }
    }
}

impl From<BackendSpec> for String {
    fn from(b: BackendSpec) -> String {
        b.to_string()
    }
}

impl TryFrom<String> for BackendSpec {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
