use crate::Scalar;

use super::{DenseParams, HeadParams, LstmParams, ModelError, ModelMode, ModelParams, Prediction};

fn check(what: &'static str, expected: usize, found: usize) -> Result<(), ModelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::ShapeMismatch { what, expected, found })
    }
}

/// `out[r] = Σ_c w[r·cols + c]·x[c]`
pub(crate) fn matvec<T: Scalar>(w: &[T], cols: usize, x: &[T], out: &mut [T]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = T::zero();
        for (a, b) in row.iter().zip(x) {
            acc += *a * *b;
        }
        *o = acc;
    }
}

pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / s).collect()
}

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Cross-entropy of `softmax(logits)` against `target`.
pub fn loss<T: Scalar>(logits: &[T], target: usize) -> Result<T, ModelError> {
    if target >= logits.len() {
        return Err(ModelError::InvalidTarget {
            target,
            n_classes: logits.len(),
        });
    }
    Ok(-log_softmax(logits)[target])
}

/// `ReLU(W·d + b)`.
pub fn dense_forward<T: Scalar>(d: &[T], p: &DenseParams<T>) -> Result<Vec<T>, ModelError> {
    check("dense input", p.input_dim, d.len())?;
    let mut r = vec![T::zero(); p.kappa];
    matvec(&p.weights, p.input_dim, d, &mut r);
    for (v, b) in r.iter_mut().zip(&p.bias) {
        *v = (*v + *b).max(T::zero());
    }
    Ok(r)
}

pub fn head_logits<T: Scalar>(r: &[T], p: &HeadParams<T>) -> Result<Vec<T>, ModelError> {
    check("head input", p.input_dim, r.len())?;
    let mut z = vec![T::zero(); p.n_classes];
    matvec(&p.weights, p.input_dim, r, &mut z);
    Ok(z)
}

pub fn head_forward<T: Scalar>(r: &[T], p: &HeadParams<T>) -> Result<Prediction<T>, ModelError> {
    Ok(Prediction::from_logits(&head_logits(r, p)?))
}

/// Intermediate values of one LSTM step, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache<T> {
    /// `x ⊕ h_prev`
    pub z: Vec<T>,
    pub i: Vec<T>,
    pub f: Vec<T>,
    pub o: Vec<T>,
    pub g: Vec<T>,
    pub c_prev: Vec<T>,
    pub tanh_c: Vec<T>,
}

pub(crate) fn lstm_step_cached<T: Scalar>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    p: &LstmParams<T>,
) -> Result<(Vec<T>, Vec<T>, StepCache<T>), ModelError> {
    check("LSTM input", p.input_dim, x.len())?;
    check("LSTM hidden state", p.nu, h_prev.len())?;
    check("LSTM cell state", p.nu, c_prev.len())?;
    let nu = p.nu;
    let mut z = Vec::with_capacity(p.concat_dim());
    z.extend_from_slice(x);
    z.extend_from_slice(h_prev);
    let mut a = vec![T::zero(); 4 * nu];
    matvec(&p.weights, p.concat_dim(), &z, &mut a);
    for (v, b) in a.iter_mut().zip(&p.bias) {
        *v += *b;
    }
    let i: Vec<T> = a[..nu].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<T> = a[nu..2 * nu].iter().map(|&v| sigmoid(v)).collect();
    let o: Vec<T> = a[2 * nu..3 * nu].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<T> = a[3 * nu..].iter().map(|&v| v.tanh()).collect();
    let c: Vec<T> = (0..nu).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<T> = (0..nu).map(|k| o[k] * tanh_c[k]).collect();
    let cache = StepCache {
        z,
        i,
        f,
        o,
        g,
        c_prev: c_prev.to_vec(),
        tanh_c,
    };
    Ok((h, c, cache))
}

/// One LSTM step; returns `(h, c)`.
pub fn lstm_step<T: Scalar>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    p: &LstmParams<T>,
) -> Result<(Vec<T>, Vec<T>), ModelError> {
    lstm_step_cached(x, h_prev, c_prev, p).map(|(h, c, _)| (h, c))
}

/// Everything computed on the way from a sequence to its logits.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    /// Dense outputs per window (spectral and joint modes).
    pub dense_out: Vec<Vec<T>>,
    /// LSTM hidden states per window (longitudinal and joint modes).
    pub hidden: Vec<Vec<T>>,
    /// One logit vector per window in spectral mode, one for the whole
    /// sequence otherwise.
    pub logits: Vec<Vec<T>>,
    pub(crate) steps: Vec<StepCache<T>>,
}

pub fn forward_trace<T: Scalar, V: AsRef<[T]>>(
    inputs: &[V],
    p: &ModelParams<T>,
) -> Result<ForwardTrace<T>, ModelError> {
    if inputs.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    let mut trace = ForwardTrace {
        dense_out: Vec::new(),
        hidden: Vec::new(),
        logits: Vec::new(),
        steps: Vec::new(),
    };
    if let Some(d) = &p.dense {
        trace.dense_out = inputs
            .iter()
            .map(|x| dense_forward(x.as_ref(), d))
            .collect::<Result<_, _>>()?;
    }
    match p.mode {
        ModelMode::Spectral => {
            trace.logits = trace
                .dense_out
                .iter()
                .map(|r| head_logits(r, &p.head))
                .collect::<Result<_, _>>()?;
        }
        ModelMode::Longitudinal | ModelMode::Joint => {
            let l = p.lstm.as_ref().expect("LSTM parameters present");
            let mut h = vec![T::zero(); l.nu];
            let mut c = vec![T::zero(); l.nu];
            let seq: Vec<&[T]> = if p.mode == ModelMode::Joint {
                trace.dense_out.iter().map(|v| v.as_slice()).collect()
            } else {
                inputs.iter().map(|v| v.as_ref()).collect()
            };
            for x in seq {
                let (h2, c2, cache) = lstm_step_cached(x, &h, &c, l)?;
                h = h2;
                c = c2;
                trace.hidden.push(h.clone());
                trace.steps.push(cache);
            }
            trace.logits.push(head_logits(&h, &p.head)?);
        }
    }
    Ok(trace)
}

impl<T: Scalar> ForwardTrace<T> {
    /// Sequence-level prediction; spectral-mode window probabilities are
    /// averaged.
    pub fn prediction(&self) -> Prediction<T> {
        if self.logits.len() == 1 {
            return Prediction::from_logits(&self.logits[0]);
        }
        let n_c = self.logits[0].len();
        let mut mean = vec![T::zero(); n_c];
        for z in &self.logits {
            for (m, p) in mean.iter_mut().zip(softmax(z)) {
                *m += p;
            }
        }
        let n = T::lit(self.logits.len() as f64);
        Prediction::from_probs(mean.into_iter().map(|m| m / n).collect())
    }

    /// Training objective for one sequence: cross-entropy at the final
    /// step, or the mean per-window cross-entropy in spectral mode.
    pub fn loss(&self, target: usize) -> Result<T, ModelError> {
        let mut total = T::zero();
        for z in &self.logits {
            total += loss(z, target)?;
        }
        Ok(total / T::lit(self.logits.len() as f64))
    }
}

pub fn forward_sequence<T: Scalar, V: AsRef<[T]>>(
    inputs: &[V],
    p: &ModelParams<T>,
) -> Result<Prediction<T>, ModelError> {
    Ok(forward_trace(inputs, p)?.prediction())
}
