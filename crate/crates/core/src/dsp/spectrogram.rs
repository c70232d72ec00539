use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::Scalar;

use super::{window_count, DspError};

/// Frequency × time magnitude array. Rows are frequency bins (low → high),
/// columns are time frames (early → late), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
    /// Width of one frequency bin in Hz.
    pub bin_hz: f64,
    /// Hop between frames in seconds.
    pub frame_s: f64,
    pub normalized: bool,
}

impl<T: Scalar> Spectrogram<T> {
    pub fn from_values(
        rows: usize,
        cols: usize,
        values: Vec<T>,
        bin_hz: f64,
        frame_s: f64,
        normalized: bool,
    ) -> Result<Self, DspError> {
        if values.len() != rows * cols {
            return Err(DspError::ShapeMismatch {
                expected: (rows, cols),
                found: values.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            values,
            bin_hz,
            frame_s,
            normalized,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![T::zero(); rows * cols],
            bin_hz: 0.0,
            frame_s: 0.0,
            normalized: false,
        }
    }

    /// `(rows, cols)` = (frequency bins, time frames).
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.values[row * self.cols + col] = v;
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }
}

/// Reusable short-time Fourier transform: Hann-windowed chunks of `C`
/// samples at a fixed hop, one-sided magnitudes (`C/2 + 1` bins).
pub struct Stft<T: Scalar> {
    chunk: usize,
    hop: usize,
    rate: f64,
    hann: Vec<T>,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Stft<T> {
    pub fn new(rate: f64, chunk_s: f64, chunk_overlap: f64) -> Result<Self, DspError> {
        if !(0.0..1.0).contains(&chunk_overlap) {
            return Err(DspError::InvalidOverlap(chunk_overlap));
        }
        let chunk = (chunk_s * rate).round() as usize;
        if chunk < 2 {
            return Err(DspError::ChunkTooShort(chunk));
        }
        let hop = ((chunk as f64) * (1.0 - chunk_overlap)).round().max(1.0) as usize;
        let fft = FftPlanner::new().plan_fft_forward(chunk);
        Ok(Self {
            chunk,
            hop,
            rate,
            hann: hann_window(chunk),
            fft,
        })
    }

    pub fn chunk_len(&self) -> usize {
        self.chunk
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn n_bins(&self) -> usize {
        self.chunk / 2 + 1
    }

    pub fn n_frames(&self, window_len: usize) -> usize {
        window_count(window_len, self.chunk, self.hop)
    }

    pub fn hann(&self) -> &[T] {
        &self.hann
    }

    pub fn transform(&self, samples: &[T]) -> Result<Spectrogram<T>, DspError> {
        if samples.len() < self.chunk {
            return Err(DspError::ChunkTooLong {
                chunk: self.chunk,
                window: samples.len(),
            });
        }
        let frames = self.n_frames(samples.len());
        let bins = self.n_bins();
        let mut out = Spectrogram::zeros(bins, frames);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.chunk];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.fft.get_inplace_scratch_len()];
        for f in 0..frames {
            let start = f * self.hop;
            for (b, (&x, &w)) in buf
                .iter_mut()
                .zip(samples[start..start + self.chunk].iter().zip(&self.hann))
            {
                *b = Complex::new(x * w, T::zero());
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..bins {
                out.set(k, f, buf[k].norm());
            }
        }
        out.bin_hz = self.rate / self.chunk as f64;
        out.frame_s = self.hop as f64 / self.rate;
        Ok(out)
    }
}

/// Periodic Hann taps: `0.5 − 0.5·cos(2πn / C)`.
pub fn hann_window<T: Scalar>(len: usize) -> Vec<T> {
    (0..len)
        .map(|n| T::lit(0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()))
        .collect()
}

/// One-off STFT of a window; see [`Stft`] to reuse the FFT plan.
pub fn stft<T: Scalar>(
    samples: &[T],
    rate: f64,
    chunk_s: f64,
    chunk_overlap: f64,
) -> Result<Spectrogram<T>, DspError> {
    Stft::new(rate, chunk_s, chunk_overlap)?.transform(samples)
}

/// Max-normalized log magnitude: `ln(max(F / max F, floor) · 255)`.
///
/// An all-zero input maps to the constant `ln(floor · 255)`.
pub fn normalize_spectrogram<T: Scalar>(
    spec: &Spectrogram<T>,
    floor_eps: f64,
) -> Result<Spectrogram<T>, DspError> {
    if spec.normalized {
        return Err(DspError::AlreadyNormalized);
    }
    let max = spec.max();
    let floor = T::lit(floor_eps);
    let full = T::lit(255.0);
    let mut out = spec.clone();
    if max > T::zero() {
        out.values
            .iter_mut()
            .for_each(|v| *v = ((*v / max).max(floor) * full).ln());
    } else {
        let c = (floor * full).ln();
        out.values.iter_mut().for_each(|v| *v = c);
    }
    out.normalized = true;
    Ok(out)
}
