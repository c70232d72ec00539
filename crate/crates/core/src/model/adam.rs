use crate::Scalar;

use super::{ModelError, ModelParams};

/// Adam moments and hyper-parameters. `m` and `v` share the layout of the
/// parameters they track.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
}

impl<T: Scalar> OptimizerState<T> {
    /// lr 0.01, β₁ 0.9, β₂ 0.999, ε 1e-8.
    pub fn new(params: &ModelParams<T>) -> Self {
        Self::with_lr(params, T::lit(0.01))
    }

    pub fn with_lr(params: &ModelParams<T>, lr: T) -> Self {
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> OptimizerState<U> {
        OptimizerState {
            lr: U::lit(self.lr.as_f64()),
            beta1: U::lit(self.beta1.as_f64()),
            beta2: U::lit(self.beta2.as_f64()),
            eps: U::lit(self.eps.as_f64()),
            step: self.step,
            m: self.m.cast(),
            v: self.v.cast(),
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut OptimizerState<T>,
) -> Result<(), ModelError> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) || !params.same_shape(&state.v) {
        return Err(ModelError::ShapeMismatch {
            what: "optimizer update",
            expected: params.n_params(),
            found: grads.n_params(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let (lr, eps) = (state.lr, state.eps);
    let ps = params.tensors_mut();
    let gs = grads.tensors();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, g), m), v) in ps.into_iter().zip(gs).zip(ms).zip(vs) {
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (T::one() - b1) * g[k];
            v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
            let mh = m[k] / c1;
            let vh = v[k] / c2;
            p[k] -= lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelDims, ModelMode};

    #[test]
    fn first_step_moves_by_lr_sign() {
        let p0 = init_params::<f64>(ModelMode::Joint, ModelDims::new(5, 4), 2);
        let mut p = p0.clone();
        let mut g = p.zeros_like();
        let gflat: Vec<f64> = (0..g.n_params())
            .map(|k| if k % 3 == 0 { 0.37 } else { -2.1e-3 })
            .collect();
        g.load_flat(&gflat).unwrap();
        let mut st = OptimizerState::new(&p);
        adam_step(&mut p, &g, &mut st).unwrap();
        for ((a, b), gk) in p.flatten().iter().zip(p0.flatten()).zip(&gflat) {
            assert!(((a - b) + 0.01 * gk.signum()).abs() < 1e-6);
        }
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let p0 = init_params::<f64>(ModelMode::Spectral, ModelDims::new(5, 4), 2);
        let mut p = p0.clone();
        let g = p.zeros_like();
        let mut st = OptimizerState::new(&p);
        for _ in 0..50 {
            adam_step(&mut p, &g, &mut st).unwrap();
        }
        assert_eq!(p, p0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = init_params::<f64>(ModelMode::Spectral, ModelDims::new(5, 4), 2);
        let g = init_params::<f64>(ModelMode::Spectral, ModelDims::new(6, 4), 2);
        let mut st = OptimizerState::new(&p);
        assert!(adam_step(&mut p, &g, &mut st).is_err());
    }
}
