//! Synthetic 12-lead records whose dominant frequency depends on the
//! class, for smoke tests and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{DiagnosisLabel, EcgRecord, RecordLabel};
use crate::N_LEADS;

/// Dominant frequency (Hz) per class, indexed like [`DiagnosisLabel::ALL`].
pub const CLASS_FREQ_HZ: [f64; 4] = [12.0, 31.0, 52.0, 73.0];

/// One record at `rate` Hz lasting `seconds`: per lead a sinusoid at the
/// class frequency (shifted by up to 2 Hz per lead), a weaker 5 Hz
/// component, baseline wander and white noise.
pub fn synthetic_record(id: &str, label: DiagnosisLabel, rate: u32, seconds: f64, seed: u64) -> EcgRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.15).unwrap();
    let n = (rate as f64 * seconds).round() as usize;
    let dt = 1.0 / rate as f64;
    let f0 = CLASS_FREQ_HZ[label.index()];
    let leads: [Vec<f64>; N_LEADS] = std::array::from_fn(|j| {
        let f = f0 + 0.5 * (j % 5) as f64 + rng.random_range(-0.5..0.5);
        let amp = rng.random_range(0.6..1.2);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let bg_phase = rng.random_range(0.0..std::f64::consts::TAU);
        let wander = rng.random_range(-0.3..0.3);
        (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                amp * (std::f64::consts::TAU * f * t + phase).sin()
                    + 0.3 * (std::f64::consts::TAU * 5.0 * t + bg_phase).sin()
                    + wander * (std::f64::consts::TAU * 0.2 * t).sin()
                    + noise.sample(&mut rng)
            })
            .collect()
    });
    EcgRecord::new(id, rate, leads, Some(RecordLabel::Onset(label))).expect("consistent leads")
}

/// `n` records cycling through the four classes.
pub fn synthetic_dataset(n: usize, seed: u64) -> Vec<EcgRecord> {
    (0..n)
        .map(|i| {
            let label = DiagnosisLabel::ALL[i % 4];
            synthetic_record(&format!("syn{i:04}"), label, 500, 10.0, seed.wrapping_mul(1_000_003).wrapping_add(i as u64))
        })
        .collect()
}
