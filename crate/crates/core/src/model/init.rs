use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Scalar;

use super::{ModelDims, ModelMode, ModelParams};

fn glorot<T: Scalar>(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, out: &mut [T]) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = T::lit(rng.random_range(-a..a));
    }
}

/// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1. The LSTM
/// input and recurrent column blocks are initialized with their own fan-in.
pub fn init_params<T: Scalar>(mode: ModelMode, dims: ModelDims, seed: u64) -> ModelParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::zeros(mode, dims);
    if let Some(d) = &mut p.dense {
        glorot(&mut rng, d.input_dim, d.kappa, &mut d.weights);
    }
    if let Some(l) = &mut p.lstm {
        let cols = l.concat_dim();
        let mut wx = vec![T::zero(); 4 * l.nu * l.input_dim];
        let mut wh = vec![T::zero(); 4 * l.nu * l.nu];
        glorot(&mut rng, l.input_dim, 4 * l.nu, &mut wx);
        glorot(&mut rng, l.nu, 4 * l.nu, &mut wh);
        for r in 0..4 * l.nu {
            let row = &mut l.weights[r * cols..(r + 1) * cols];
            row[..l.input_dim].copy_from_slice(&wx[r * l.input_dim..(r + 1) * l.input_dim]);
            row[l.input_dim..].copy_from_slice(&wh[r * l.nu..(r + 1) * l.nu]);
        }
        for b in &mut l.bias[l.nu..2 * l.nu] {
            *b = T::one();
        }
    }
    let h = &mut p.head;
    glorot(&mut rng, h.input_dim, h.n_classes, &mut h.weights);
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let d = ModelDims::new(40, 4);
        for mode in ModelMode::ALL {
            assert_eq!(init_params::<f64>(mode, d, 9), init_params::<f64>(mode, d, 9));
            assert_ne!(init_params::<f64>(mode, d, 9), init_params::<f64>(mode, d, 10));
        }
    }

    #[test]
    fn dense_bounds() {
        let p = init_params::<f64>(ModelMode::Spectral, ModelDims::new(1056, 4), 0);
        let bound = (6.0f64 / 1072.0).sqrt();
        let w = &p.dense.as_ref().unwrap().weights;
        assert!(w.iter().all(|v| v.abs() <= bound));
        let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max > 0.99 * bound);
    }

    #[test]
    fn biases() {
        let p = init_params::<f64>(ModelMode::Joint, ModelDims::new(20, 4), 1);
        assert!(p.dense.as_ref().unwrap().bias.iter().all(|&b| b == 0.0));
        let l = p.lstm.as_ref().unwrap();
        for (k, &b) in l.bias.iter().enumerate() {
            let want = if (16..32).contains(&k) { 1.0 } else { 0.0 };
            assert_eq!(b, want);
        }
    }
}
