//! Band-pass preprocessing, windowing, STFT spectrograms, log
//! normalization and colormap rendering.

mod filter;
mod render;
mod spectrogram;
mod window;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{EcgRecord, LeadId};
use crate::Scalar;

pub use filter::{bandpass, gaussian_kernel, gaussian_smooth, highpass};
pub use render::{colormap_indices, render_image, save_png, Colormap, RenderWarning, Rendered};
pub use spectrogram::{hann_window, normalize_spectrogram, stft, Spectrogram, Stft};
pub use window::{segment_windows, window_count, window_geometry, Window};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DspError {
    #[error("invalid filter parameters: cutoff {cutoff_hz} Hz at rate {rate} Hz, sigma {sigma_s} s")]
    InvalidCutoff { cutoff_hz: f64, rate: f64, sigma_s: f64 },
    #[error("signal is empty")]
    EmptySignal,
    #[error("window of {window} samples exceeds signal of {signal}")]
    WindowTooLong { window: usize, signal: usize },
    #[error("overlap fraction {0} outside [0, 1)")]
    InvalidOverlap(f64),
    #[error("STFT chunk of {chunk} samples exceeds window of {window}")]
    ChunkTooLong { chunk: usize, window: usize },
    #[error("STFT chunk of {0} samples is shorter than 2")]
    ChunkTooShort(usize),
    #[error("spectrogram is already normalized")]
    AlreadyNormalized,
    #[error("spectrogram must be normalized first")]
    NotNormalized,
    #[error("spectrogram holds non-finite values")]
    NonFinite,
    #[error("expected {expected:?} cells, found {found}")]
    ShapeMismatch { expected: (usize, usize), found: usize },
    #[error("leads yield different window counts")]
    UnevenWindows,
    #[error("i/o: {0}")]
    Io(String),
}

/// Preprocessing and spectrogram parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub window_s: f64,
    pub overlap: f64,
    pub chunk_s: f64,
    pub chunk_overlap: f64,
    pub hp_cutoff_hz: f64,
    pub gauss_sigma_s: f64,
    pub floor_eps: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            overlap: 0.5,
            chunk_s: 0.1,
            chunk_overlap: 0.9,
            hp_cutoff_hz: 0.5,
            gauss_sigma_s: 0.002,
            floor_eps: 1e-6,
        }
    }
}

/// Per-lead window sequences of one record, all of equal length γ.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet<S> {
    pub record_id: String,
    /// Canonical lead order.
    pub per_lead: [Vec<S>; 12],
}

impl<S> WindowSet<S> {
    pub fn new(record_id: impl Into<String>, per_lead: [Vec<S>; 12]) -> Result<Self, DspError> {
        let g = per_lead[0].len();
        if per_lead.iter().any(|l| l.len() != g) {
            return Err(DspError::UnevenWindows);
        }
        Ok(Self {
            record_id: record_id.into(),
            per_lead,
        })
    }

    pub fn gamma(&self) -> usize {
        self.per_lead[0].len()
    }

    pub fn lead(&self, lead: LeadId) -> &[S] {
        &self.per_lead[lead.index()]
    }

    /// The 12 entries of window `n`, canonical lead order.
    pub fn at(&self, n: usize) -> [&S; 12] {
        std::array::from_fn(|j| &self.per_lead[j][n])
    }
}

/// Band-pass + windowing for one lead.
pub fn lead_windows<T: Scalar>(signal: &[f64], rate: f64, cfg: &DspConfig) -> Result<Vec<Window<T>>, DspError> {
    let x: Vec<T> = signal.iter().map(|&v| T::lit(v)).collect();
    let filtered = bandpass(&x, rate, cfg.hp_cutoff_hz, cfg.gauss_sigma_s)?;
    segment_windows(&filtered, rate, cfg.window_s, cfg.overlap)
}

/// Full per-record DSP: filter each lead, cut windows, STFT and normalize.
/// Leads are processed in parallel; the result does not depend on
/// scheduling.
pub fn record_spectrograms<T: Scalar>(
    rec: &EcgRecord,
    cfg: &DspConfig,
) -> Result<WindowSet<Spectrogram<T>>, DspError> {
    let rate = rec.sampling_rate() as f64;
    let stft = Stft::<T>::new(rate, cfg.chunk_s, cfg.chunk_overlap)?;
    let per_lead: Vec<Vec<Spectrogram<T>>> = LeadId::ALL
        .par_iter()
        .map(|&lead| {
            lead_windows::<T>(rec.lead(lead), rate, cfg)?
                .iter()
                .map(|w| normalize_spectrogram(&stft.transform(&w.samples)?, cfg.floor_eps))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let per_lead: [Vec<Spectrogram<T>>; 12] = per_lead.try_into().expect("12 leads");
    WindowSet::new(rec.record_id(), per_lead)
}
