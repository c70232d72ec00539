use std::f64::consts::PI;

use crate::Scalar;

use super::DspError;

/// First-order recursive high-pass (RC form):
/// `y[n] = a·(y[n-1] + x[n] − x[n-1])`, `a = RC / (RC + dt)`, `RC = 1 / (2π·fc)`.
///
/// The state starts at DC steady state (`x[-1] = x[0]`, `y[-1] = 0`), so a
/// constant input produces an exactly zero output.
pub fn highpass<T: Scalar>(signal: &[T], rate: f64, cutoff_hz: f64) -> Vec<T> {
    let rc = 1.0 / (2.0 * PI * cutoff_hz);
    let dt = 1.0 / rate;
    let a = T::lit(rc / (rc + dt));
    let mut out = Vec::with_capacity(signal.len());
    let (mut prev_x, mut prev_y) = match signal.first() {
        Some(&x0) => (x0, T::zero()),
        None => return out,
    };
    for &x in signal {
        let y = a * (prev_y + x - prev_x);
        out.push(y);
        prev_x = x;
        prev_y = y;
    }
    out
}

/// Normalized Gaussian taps for `sigma` samples, radius `ceil(4σ)`.
pub fn gaussian_kernel<T: Scalar>(sigma: f64) -> Vec<T> {
    let radius = (4.0 * sigma).ceil().max(1.0) as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| T::lit(w / sum)).collect()
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Convolution with a truncated Gaussian of `sigma` samples, reflect-padded.
pub fn gaussian_smooth<T: Scalar>(signal: &[T], sigma: f64) -> Vec<T> {
    let kernel = gaussian_kernel::<T>(sigma);
    let radius = (kernel.len() / 2) as isize;
    let n = signal.len();
    (0..n as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, &w)| w * signal[reflect_index(i + k as isize - radius, n)])
                .sum()
        })
        .collect()
}

/// High-pass at `hp_cutoff_hz` followed by Gaussian smoothing with a
/// standard deviation of `gauss_sigma_s` seconds. Output length equals
/// input length.
pub fn bandpass<T: Scalar>(
    signal: &[T],
    rate: f64,
    hp_cutoff_hz: f64,
    gauss_sigma_s: f64,
) -> Result<Vec<T>, DspError> {
    if !(rate > 0.0) || !(hp_cutoff_hz > 0.0) || hp_cutoff_hz >= rate / 2.0 || !(gauss_sigma_s > 0.0)
    {
        return Err(DspError::InvalidCutoff {
            cutoff_hz: hp_cutoff_hz,
            rate,
            sigma_s: gauss_sigma_s,
        });
    }
    if signal.is_empty() {
        return Err(DspError::EmptySignal);
    }
    let hp = highpass(signal, rate, hp_cutoff_hz);
    Ok(gaussian_smooth(&hp, gauss_sigma_s * rate))
}
