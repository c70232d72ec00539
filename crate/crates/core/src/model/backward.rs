use crate::Scalar;

use super::forward::{forward_trace, softmax};
use super::{ModelError, ModelMode, ModelParams};

/// One training sequence and its class.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, T> {
    pub inputs: &'a [Vec<T>],
    pub target: usize,
}

/// `acc[c] += Σ_r w[r·cols + c]·v[r]`
fn matvec_t_acc<T: Scalar>(w: &[T], cols: usize, v: &[T], acc: &mut [T]) {
    for (r, &vr) in v.iter().enumerate() {
        if vr == T::zero() {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (a, &wv) in acc.iter_mut().zip(row) {
            *a += wv * vr;
        }
    }
}

/// `g[r·cols + c] += v[r]·x[c]`
fn outer_acc<T: Scalar>(g: &mut [T], cols: usize, v: &[T], x: &[T]) {
    for (r, &vr) in v.iter().enumerate() {
        if vr == T::zero() {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (a, &xv) in row.iter_mut().zip(x) {
            *a += vr * xv;
        }
    }
}

fn dlogits<T: Scalar>(z: &[T], target: usize, scale: T) -> Vec<T> {
    let mut d = softmax(z);
    d[target] -= T::one();
    d.iter_mut().for_each(|v| *v *= scale);
    d
}

/// Adds `scale · ∂loss/∂θ` for one sequence into `grads`; returns the
/// unscaled loss.
pub fn sample_gradient<T: Scalar>(
    inputs: &[Vec<T>],
    target: usize,
    p: &ModelParams<T>,
    grads: &mut ModelParams<T>,
    scale: T,
) -> Result<T, ModelError> {
    if !p.same_shape(grads) {
        return Err(ModelError::ShapeMismatch {
            what: "gradient buffer",
            expected: p.n_params(),
            found: grads.n_params(),
        });
    }
    let trace = forward_trace(inputs, p)?;
    let l = trace.loss(target)?;
    let head_in = p.head.input_dim;

    // gradient w.r.t. each dense output (spectral: from the head; joint:
    // from the LSTM)
    let mut d_dense: Vec<Vec<T>> = Vec::new();

    match p.mode {
        ModelMode::Spectral => {
            let s = scale / T::lit(trace.logits.len() as f64);
            for (z, r) in trace.logits.iter().zip(&trace.dense_out) {
                let dz = dlogits(z, target, s);
                outer_acc(&mut grads.head.weights, head_in, &dz, r);
                let mut dr = vec![T::zero(); head_in];
                matvec_t_acc(&p.head.weights, head_in, &dz, &mut dr);
                d_dense.push(dr);
            }
        }
        ModelMode::Longitudinal | ModelMode::Joint => {
            let lp = p.lstm.as_ref().expect("LSTM parameters present");
            let lg = grads.lstm.as_mut().expect("LSTM gradients present");
            let nu = lp.nu;
            let in_dim = lp.input_dim;
            let cols = lp.concat_dim();
            let h_last = trace.hidden.last().expect("non-empty sequence");
            let dz = dlogits(&trace.logits[0], target, scale);
            outer_acc(&mut grads.head.weights, head_in, &dz, h_last);
            let mut dh = vec![T::zero(); nu];
            matvec_t_acc(&p.head.weights, head_in, &dz, &mut dh);
            let mut dc = vec![T::zero(); nu];
            if p.mode == ModelMode::Joint {
                d_dense = vec![Vec::new(); trace.steps.len()];
            }
            let mut da = vec![T::zero(); 4 * nu];
            for (t, st) in trace.steps.iter().enumerate().rev() {
                for k in 0..nu {
                    let tc = st.tanh_c[k];
                    let d_o = dh[k] * tc;
                    let dck = dc[k] + dh[k] * st.o[k] * (T::one() - tc * tc);
                    let d_i = dck * st.g[k];
                    let d_g = dck * st.i[k];
                    let d_f = dck * st.c_prev[k];
                    dc[k] = dck * st.f[k];
                    da[k] = d_i * st.i[k] * (T::one() - st.i[k]);
                    da[nu + k] = d_f * st.f[k] * (T::one() - st.f[k]);
                    da[2 * nu + k] = d_o * st.o[k] * (T::one() - st.o[k]);
                    da[3 * nu + k] = d_g * (T::one() - st.g[k] * st.g[k]);
                }
                outer_acc(&mut lg.weights, cols, &da, &st.z);
                for (b, &v) in lg.bias.iter_mut().zip(&da) {
                    *b += v;
                }
                let mut dzc = vec![T::zero(); cols];
                matvec_t_acc(&lp.weights, cols, &da, &mut dzc);
                dh.copy_from_slice(&dzc[in_dim..]);
                if p.mode == ModelMode::Joint {
                    dzc.truncate(in_dim);
                    d_dense[t] = dzc;
                }
            }
        }
    }

    if let (Some(dp), Some(dg)) = (p.dense.as_ref(), grads.dense.as_mut()) {
        for ((x, r), dr) in inputs.iter().zip(&trace.dense_out).zip(&d_dense) {
            // ReLU mask: r == 0 means the pre-activation was ≤ 0
            let dpre: Vec<T> = dr
                .iter()
                .zip(r)
                .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                .collect();
            outer_acc(&mut dg.weights, dp.input_dim, &dpre, x);
            for (b, &v) in dg.bias.iter_mut().zip(&dpre) {
                *b += v;
            }
        }
    }
    Ok(l)
}

/// Gradient of the mean batch loss; returns `(mean loss, gradients)`.
pub fn backward<T: Scalar>(
    batch: &[Sample<'_, T>],
    p: &ModelParams<T>,
) -> Result<(T, ModelParams<T>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut grads = p.zeros_like();
    let scale = T::one() / T::lit(batch.len() as f64);
    let mut total = T::zero();
    for s in batch {
        total += sample_gradient(s.inputs, s.target, p, &mut grads, scale)?;
    }
    Ok((total * scale, grads))
}

/// Mean batch loss without gradients.
pub fn batch_loss<T: Scalar>(
    batch: &[Sample<'_, T>],
    p: &ModelParams<T>,
) -> Result<T, ModelError> {
    let mut total = T::zero();
    for s in batch {
        total += forward_trace(s.inputs, p)?.loss(s.target)?;
    }
    Ok(total / T::lit(batch.len() as f64))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelDims};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..len)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    fn check_mode(mode: ModelMode, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = ModelDims { input_dim: 10, kappa: 6, nu: 5, n_classes: 4 };
        let mut p = init_params::<f64>(mode, dims, seed);
        // push biases off zero so ReLU kinks are avoided with high probability
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        let a = seq(&mut rng, 7, 10);
        let b = seq(&mut rng, 7, 10);
        let batch = [Sample { inputs: &a, target: 1 }, Sample { inputs: &b, target: 3 }];
        let (_, g) = backward(&batch, &p).unwrap();
        let flat = p.flatten();
        let gflat = g.flatten();
        let h = 1e-5;
        let mut q = p.clone();
        for k in 0..flat.len() {
            let mut f = flat.clone();
            f[k] += h;
            q.load_flat(&f).unwrap();
            let lp = batch_loss(&batch, &q).unwrap();
            f[k] -= 2.0 * h;
            q.load_flat(&f).unwrap();
            let lm = batch_loss(&batch, &q).unwrap();
            let num = (lp - lm) / (2.0 * h);
            let err = (num - gflat[k]).abs() / num.abs().max(gflat[k].abs()).max(1e-7);
            assert!(err < 1e-4, "{mode:?} param {k}: {num} vs {}", gflat[k]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for mode in ModelMode::ALL {
            check_mode(mode, 1);
        }
    }

    #[test]
    fn duplicated_batch_equals_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = init_params::<f64>(ModelMode::Joint, ModelDims::new(8, 4), 4);
        let a = seq(&mut rng, 5, 8);
        let (l1, g1) = backward(&[Sample { inputs: &a, target: 2 }], &p).unwrap();
        let s = Sample { inputs: &a, target: 2 };
        let (l2, g2) = backward(&[s, s], &p).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (x, y) in g1.flatten().iter().zip(g2.flatten()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn confident_correct_batch_has_tiny_gradient() {
        let mut p = ModelParams::<f64>::zeros(ModelMode::Spectral, ModelDims::new(2, 4));
        let d = p.dense.as_mut().unwrap();
        d.bias[0] = 1.0;
        p.head.weights[0] = 60.0;
        let a = vec![vec![0.3, -0.2]];
        let (l, g) = backward(&[Sample { inputs: &a, target: 0 }], &p).unwrap();
        assert!(l < 1e-10);
        assert!(g.norm_sq().sqrt() < 1e-8);
    }
}
