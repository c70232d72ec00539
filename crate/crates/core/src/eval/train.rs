use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{
    adam_step, forward_sequence, sample_gradient, ModelParams, OptimizerState, Prediction, Sample,
};
use crate::Scalar;

use super::{balanced_batches, macro_auroc, one_vs_all_auroc, EvalError};

/// Samples per gradient work unit. Fixed so the summation order does not
/// depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs without validation AUROC improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            lr: 0.01,
            patience: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters at the best validation epoch (or the last epoch when
    /// there is no usable validation set).
    pub params: ModelParams<T>,
    pub optimizer: OptimizerState<T>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_auroc: Option<f64>,
    pub train_loss: Vec<f64>,
}

pub fn predict_all<T: Scalar>(
    params: &ModelParams<T>,
    inputs: &[&[Vec<T>]],
) -> Result<Vec<Prediction<T>>, EvalError> {
    inputs
        .par_iter()
        .map(|x| forward_sequence(x, params).map_err(EvalError::from))
        .collect()
}

fn batch_gradient<T: Scalar>(
    batch: &[Sample<'_, T>],
    params: &ModelParams<T>,
) -> Result<(T, ModelParams<T>), EvalError> {
    let scale = T::one() / T::lit(batch.len() as f64);
    let parts: Vec<(T, ModelParams<T>)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = params.zeros_like();
            let mut l = T::zero();
            for s in chunk {
                l += sample_gradient(s.inputs, s.target, params, &mut g, scale)?;
            }
            Ok((l, g))
        })
        .collect::<Result<_, EvalError>>()?;
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        for (a, b) in grads.tensors_mut().into_iter().zip(g.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }
    Ok((loss * scale, grads))
}

/// Validation macro AUROC and mean negative log-likelihood.
fn val_score<T: Scalar>(
    params: &ModelParams<T>,
    val: &[Sample<'_, T>],
) -> Result<Option<(f64, f64)>, EvalError> {
    if val.is_empty() {
        return Ok(None);
    }
    let inputs: Vec<&[Vec<T>]> = val.iter().map(|s| s.inputs).collect();
    let probs: Vec<Vec<f64>> = predict_all(params, &inputs)?
        .into_iter()
        .map(|p| p.probs.iter().map(|v| v.as_f64()).collect())
        .collect();
    let truth: Vec<usize> = val.iter().map(|s| s.target).collect();
    let nll = probs
        .iter()
        .zip(&truth)
        .map(|(p, &t)| -p[t].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / val.len() as f64;
    Ok(macro_auroc(&one_vs_all_auroc(&probs, &truth, params.dims.n_classes)).map(|a| (a, nll)))
}

/// Mini-batch Adam with class-proportional batches and early stopping on
/// validation macro AUROC, ties broken by validation loss.
pub fn fit<T: Scalar>(
    init: ModelParams<T>,
    train: &[Sample<'_, T>],
    val: &[Sample<'_, T>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>, EvalError> {
    if train.is_empty() {
        return Err(EvalError::EmptyTrainingSet);
    }
    let n_classes = init.dims.n_classes;
    let labels: Vec<usize> = train.iter().map(|s| s.target).collect();
    let mut params = init;
    let mut opt = OptimizerState::with_lr(&params, T::lit(cfg.lr));
    let mut best = (params.clone(), opt.clone());
    let mut best_score: Option<(f64, f64)> = None;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut epochs_run = 0;
    let mut train_loss = Vec::new();
    for epoch in 0..cfg.epochs {
        let batches = balanced_batches(&labels, n_classes, cfg.batch_size, cfg.seed.wrapping_add(epoch as u64))?;
        let mut epoch_loss = 0.0;
        for b in &batches {
            let batch: Vec<Sample<'_, T>> = b.iter().map(|&i| train[i]).collect();
            let (l, g) = batch_gradient(&batch, &params)?;
            adam_step(&mut params, &g, &mut opt)?;
            epoch_loss += l.as_f64() * batch.len() as f64;
        }
        train_loss.push(epoch_loss / train.len() as f64);
        epochs_run = epoch + 1;
        match val_score(&params, val)? {
            Some((a, nll)) => {
                if best_score.is_none_or(|(ba, bl)| a > ba || (a == ba && nll < bl)) {
                    best_score = Some((a, nll));
                    best_epoch = epochs_run;
                    best = (params.clone(), opt.clone());
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= cfg.patience {
                        break;
                    }
                }
            }
            None => {
                best_epoch = epochs_run;
                best = (params.clone(), opt.clone());
            }
        }
    }
    Ok(TrainOutcome {
        params: best.0,
        optimizer: best.1,
        epochs_run,
        best_epoch,
        best_val_auroc: best_score.map(|(a, _)| a),
        train_loss,
    })
}
