use crate::Scalar;

use super::DspError;

/// One fixed-length segment of a lead.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T> {
    /// 0-based position in the window sequence.
    pub index: usize,
    /// Offset of the first sample within the source signal.
    pub start: usize,
    pub samples: Vec<T>,
}

/// Window length and hop in samples for a given rate.
pub fn window_geometry(rate: f64, window_s: f64, overlap_fraction: f64) -> Result<(usize, usize), DspError> {
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(DspError::InvalidOverlap(overlap_fraction));
    }
    let len = (window_s * rate).round() as usize;
    if len == 0 {
        return Err(DspError::WindowTooLong { window: 0, signal: 0 });
    }
    let hop = ((len as f64) * (1.0 - overlap_fraction)).round().max(1.0) as usize;
    Ok((len, hop))
}

/// Number of full windows of `len` at `hop` within `n` samples.
pub fn window_count(n: usize, len: usize, hop: usize) -> usize {
    if n < len {
        0
    } else {
        (n - len) / hop + 1
    }
}

/// Splits `signal` into windows starting at 0, hop, 2·hop, …; a trailing
/// remainder shorter than a window is dropped.
pub fn segment_windows<T: Scalar>(
    signal: &[T],
    rate: f64,
    window_s: f64,
    overlap_fraction: f64,
) -> Result<Vec<Window<T>>, DspError> {
    let (len, hop) = window_geometry(rate, window_s, overlap_fraction)?;
    if len > signal.len() {
        return Err(DspError::WindowTooLong {
            window: len,
            signal: signal.len(),
        });
    }
    Ok((0..window_count(signal.len(), len, hop))
        .map(|index| {
            let start = index * hop;
            Window {
                index,
                start,
                samples: signal[start..start + len].to_vec(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_seconds_give_nineteen_windows() {
        let x = vec![0.0f64; 5000];
        let w = segment_windows(&x, 500.0, 1.0, 0.5).unwrap();
        assert_eq!(w.len(), 19);
        assert!(w.iter().all(|w| w.samples.len() == 500));
        assert_eq!(w[18].start, 4500);
    }

    #[test]
    fn zero_overlap_tiles_exactly() {
        let x: Vec<f64> = (0..5000).map(|k| k as f64).collect();
        let w = segment_windows(&x, 500.0, 1.0, 0.0).unwrap();
        assert_eq!(w.len(), 10);
        let joined: Vec<f64> = w.iter().flat_map(|w| w.samples.clone()).collect();
        assert_eq!(joined, x);
    }

    #[test]
    fn window_equal_to_signal() {
        let x: Vec<f32> = (0..500).map(|k| k as f32).collect();
        let w = segment_windows(&x, 500.0, 1.0, 0.5).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].samples, x);
    }

    #[test]
    fn overlap_is_exact() {
        let x: Vec<f64> = (0..5000).map(|k| k as f64).collect();
        let w = segment_windows(&x, 500.0, 1.0, 0.5).unwrap();
        for pair in w.windows(2) {
            assert_eq!(pair[0].samples[250..], pair[1].samples[..250]);
        }
    }

    #[test]
    fn too_long_window() {
        let x = vec![0.0f64; 499];
        assert!(matches!(
            segment_windows(&x, 500.0, 1.0, 0.5),
            Err(DspError::WindowTooLong { window: 500, signal: 499 })
        ));
        assert!(matches!(
            segment_windows(&x, 500.0, 0.1, 1.0),
            Err(DspError::InvalidOverlap(_))
        ));
    }

    proptest! {
        #[test]
        fn count_matches_closed_form(n in 1usize..3000, len in 1usize..400, hop in 1usize..400) {
            prop_assume!(len <= n && hop <= len);
            let overlap = 1.0 - hop as f64 / len as f64;
            let x = vec![0.0f64; n];
            let (l, h) = window_geometry(len as f64, 1.0, overlap).unwrap();
            prop_assert_eq!((l, h), (len, hop));
            let w = segment_windows(&x, len as f64, 1.0, overlap).unwrap();
            prop_assert_eq!(w.len(), (n - len) / hop + 1);
        }
    }
}
