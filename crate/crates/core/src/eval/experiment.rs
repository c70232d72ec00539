use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fusion::{decision_accumulate, majority_vote, vote_shares, FusionStrategy, LeadPredictionBundle};
use crate::ingest::LeadId;
use crate::model::{init_params, ModelDims, ModelMode, ModelParams, OptimizerState, Prediction, Sample};
use crate::{Scalar, N_LEADS};

use super::{
    fit, predict_all, stratified_kfold, AggregateMetrics, DecisionComparison, EvalError,
    FoldAssignment, FoldMetrics, MetricsReport, TrainConfig,
};

/// One record's model inputs: a single feature sequence, or one sequence
/// per lead (canonical lead order) for decision fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord<T> {
    pub record_id: String,
    pub target: usize,
    pub sequences: Vec<Vec<Vec<T>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub fusion: FusionStrategy,
    pub mode: ModelMode,
    pub class_names: Vec<String>,
    pub kappa: usize,
    pub nu: usize,
    pub folds: usize,
    /// Inner stratified split of each training fold; one part is held out
    /// for early stopping. Below 2 disables early stopping.
    pub inner_folds: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub config_hash: String,
}

impl ExperimentConfig {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn models_per_fold(&self) -> usize {
        if self.fusion.is_decision() {
            N_LEADS
        } else {
            1
        }
    }
}

/// Trained per-fold models; `models[fold][m]` with one model per lead
/// under decision fusion.
#[derive(Debug, Clone)]
pub struct TrainedFolds<T> {
    pub assignment: FoldAssignment,
    pub models: Vec<Vec<ModelParams<T>>>,
    pub optimizers: Vec<Vec<OptimizerState<T>>>,
    pub epochs: Vec<Vec<usize>>,
}

/// SplitMix64 over a base seed and two tags.
pub(crate) fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn validate<T: Scalar>(records: &[LabeledRecord<T>], cfg: &ExperimentConfig) -> Result<usize, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyTrainingSet);
    }
    let want = cfg.models_per_fold();
    let mut ids = BTreeSet::new();
    let mut dim = None;
    for r in records {
        if !ids.insert(r.record_id.as_str()) {
            return Err(EvalError::ConfigInvalid(format!("duplicate record id {}", r.record_id)));
        }
        if r.target >= cfg.n_classes() {
            return Err(EvalError::ConfigInvalid(format!(
                "record {} has class {} but the task has {} classes",
                r.record_id,
                r.target,
                cfg.n_classes()
            )));
        }
        if r.sequences.len() != want {
            return Err(EvalError::ConfigInvalid(format!(
                "record {} has {} sequences, {} expected for {}",
                r.record_id,
                r.sequences.len(),
                want,
                cfg.fusion
            )));
        }
        for s in &r.sequences {
            for x in s {
                if *dim.get_or_insert(x.len()) != x.len() {
                    return Err(EvalError::ConfigInvalid(format!(
                        "record {} mixes feature widths",
                        r.record_id
                    )));
                }
            }
        }
    }
    dim.ok_or_else(|| EvalError::ConfigInvalid("records have no windows".into()))
}

fn inner_split(
    ids: &[usize],
    records: &[LabeledRecord<impl Scalar>],
    k: usize,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    if k < 2 {
        return (ids.to_vec(), Vec::new());
    }
    let labels: BTreeMap<String, usize> = ids
        .iter()
        .map(|&i| (records[i].record_id.clone(), records[i].target))
        .collect();
    match stratified_kfold(&labels, k, seed) {
        Ok(a) => ids
            .iter()
            .partition(|&&i| a.fold_of(&records[i].record_id) != Some(0)),
        Err(_) => (ids.to_vec(), Vec::new()),
    }
}

pub fn train_folds<T: Scalar>(
    records: &[LabeledRecord<T>],
    cfg: &ExperimentConfig,
) -> Result<TrainedFolds<T>, EvalError> {
    let input_dim = validate(records, cfg)?;
    let labels: BTreeMap<String, usize> =
        records.iter().map(|r| (r.record_id.clone(), r.target)).collect();
    let assignment = stratified_kfold(&labels, cfg.folds, cfg.seed)?;
    let dims = ModelDims {
        input_dim,
        kappa: cfg.kappa,
        nu: cfg.nu,
        n_classes: cfg.n_classes(),
    };
    let n_models = cfg.models_per_fold();

    type FoldOut<T> = (Vec<ModelParams<T>>, Vec<OptimizerState<T>>, Vec<usize>);
    let per_fold: Vec<FoldOut<T>> = (0..cfg.folds)
        .into_par_iter()
        .map(|fold| {
            let train_ids: Vec<usize> = (0..records.len())
                .filter(|&i| assignment.fold_of(&records[i].record_id) != Some(fold))
                .collect();
            let test: BTreeSet<&str> = assignment.test_ids(fold).into_iter().collect();
            if let Some(&i) = train_ids.iter().find(|&&i| test.contains(records[i].record_id.as_str())) {
                return Err(EvalError::Leakage(records[i].record_id.clone()));
            }
            let (fit_ids, val_ids) =
                inner_split(&train_ids, records, cfg.inner_folds, derive_seed(cfg.seed, fold as u64, 1));
            let outs: Vec<_> = (0..n_models)
                .into_par_iter()
                .map(|m| {
                    let samples = |ids: &[usize]| -> Vec<Sample<'_, T>> {
                        ids.iter()
                            .map(|&i| Sample {
                                inputs: &records[i].sequences[m],
                                target: records[i].target,
                            })
                            .collect()
                    };
                    let init = init_params(cfg.mode, dims, derive_seed(cfg.seed, fold as u64, 100 + m as u64));
                    let tc = TrainConfig {
                        seed: derive_seed(cfg.seed, fold as u64, 200 + m as u64),
                        ..cfg.train
                    };
                    fit(init, &samples(&fit_ids), &samples(&val_ids), &tc)
                })
                .collect::<Result<_, _>>()?;
            let mut models = Vec::with_capacity(n_models);
            let mut opts = Vec::with_capacity(n_models);
            let mut epochs = Vec::with_capacity(n_models);
            for o in outs {
                models.push(o.params);
                opts.push(o.optimizer);
                epochs.push(o.epochs_run);
            }
            Ok((models, opts, epochs))
        })
        .collect::<Result<_, EvalError>>()?;

    let mut out = TrainedFolds {
        assignment,
        models: Vec::new(),
        optimizers: Vec::new(),
        epochs: Vec::new(),
    };
    for (m, o, e) in per_fold {
        out.models.push(m);
        out.optimizers.push(o);
        out.epochs.push(e);
    }
    Ok(out)
}

/// Record-level prediction under the configured fusion; also returns the
/// majority-vote label and the accumulated label for decision fusion.
pub(crate) fn combine_leads<T: Scalar>(
    per_lead: Vec<Prediction<T>>,
    fusion: FusionStrategy,
) -> Result<(Prediction<f64>, Option<(usize, usize)>), EvalError> {
    if !fusion.is_decision() {
        let p = per_lead.into_iter().next().expect("one prediction");
        return Ok((p.cast(), None));
    }
    let bundle = LeadPredictionBundle {
        index: 0,
        predictions: LeadId::ALL.iter().copied().zip(per_lead).collect(),
    };
    let fusion_err = |e: crate::fusion::FusionError| EvalError::ConfigInvalid(e.to_string());
    let acc = decision_accumulate(&bundle).map_err(fusion_err)?;
    let vote = majority_vote(&bundle).map_err(fusion_err)?;
    let pred = match fusion {
        FusionStrategy::DecisionVote => Prediction {
            probs: vote_shares(&bundle).map_err(fusion_err)?.iter().map(|v| v.as_f64()).collect(),
            label: vote,
        },
        _ => acc.cast(),
    };
    Ok((pred, Some((acc.label, vote))))
}

/// Predicts each record with the models of the fold that held it out.
pub fn evaluate_folds<T: Scalar>(
    records: &[LabeledRecord<T>],
    trained: &TrainedFolds<T>,
    cfg: &ExperimentConfig,
) -> Result<MetricsReport, EvalError> {
    validate(records, cfg)?;
    let n_classes = cfg.n_classes();
    let k = trained.assignment.k;
    if trained.models.len() != k {
        return Err(EvalError::ConfigInvalid(format!(
            "{} fold models for {k} folds",
            trained.models.len()
        )));
    }
    let mut by_fold: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, r) in records.iter().enumerate() {
        let f = trained.assignment.fold_of(&r.record_id).ok_or_else(|| {
            EvalError::ConfigInvalid(format!("record {} is not in the fold assignment", r.record_id))
        })?;
        by_fold[f].push(i);
    }

    type Row = (usize, Prediction<f64>, Option<(usize, usize)>);
    let results: Vec<Vec<Row>> = by_fold
        .par_iter()
        .enumerate()
        .map(|(f, ids)| {
            let models = &trained.models[f];
            let mut per_model: Vec<Vec<Prediction<T>>> = Vec::with_capacity(models.len());
            for (m, params) in models.iter().enumerate() {
                let inputs: Vec<&[Vec<T>]> =
                    ids.iter().map(|&i| records[i].sequences[m].as_slice()).collect();
                per_model.push(predict_all(params, &inputs)?);
            }
            ids.iter()
                .enumerate()
                .map(|(j, &i)| {
                    let leads: Vec<Prediction<T>> = per_model.iter().map(|p| p[j].clone()).collect();
                    let (p, d) = combine_leads(leads, cfg.fusion)?;
                    Ok((i, p, d))
                })
                .collect()
        })
        .collect::<Result<_, EvalError>>()?;

    let mut per_fold = Vec::with_capacity(k);
    let mut all_probs = Vec::new();
    let mut all_preds = Vec::new();
    let mut all_truth = Vec::new();
    let mut acc_labels = Vec::new();
    let mut vote_labels = Vec::new();
    for (f, rows) in results.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let probs: Vec<Vec<f64>> = rows.iter().map(|r| r.1.probs.clone()).collect();
        let preds: Vec<usize> = rows.iter().map(|r| r.1.label).collect();
        let truth: Vec<usize> = rows.iter().map(|r| records[r.0].target).collect();
        per_fold.push(FoldMetrics {
            fold: f,
            n_train: records.len() - rows.len(),
            n_test: rows.len(),
            epochs: trained.epochs.get(f).cloned().unwrap_or_default(),
            metrics: AggregateMetrics::compute(&probs, &preds, &truth, n_classes)?,
        });
        for r in rows {
            if let Some((a, v)) = r.2 {
                acc_labels.push(a);
                vote_labels.push(v);
            }
        }
        all_probs.extend(probs);
        all_preds.extend(preds);
        all_truth.extend(truth);
    }
    let decision_comparison = if cfg.fusion.is_decision() {
        let cm = |labels: &[usize]| -> Result<Vec<Vec<u64>>, EvalError> {
            Ok(super::classification_metrics(labels, &all_truth, n_classes)?.confusion_matrix)
        };
        Some(DecisionComparison {
            accumulation: cm(&acc_labels)?,
            vote: cm(&vote_labels)?,
        })
    } else {
        None
    };
    Ok(MetricsReport {
        config_hash: cfg.config_hash.clone(),
        class_names: cfg.class_names.clone(),
        per_fold,
        aggregate: AggregateMetrics::compute(&all_probs, &all_preds, &all_truth, n_classes)?,
        decision_comparison,
    })
}

/// Cross-validated training and record-level evaluation.
pub fn run_experiment<T: Scalar>(
    records: &[LabeledRecord<T>],
    cfg: &ExperimentConfig,
) -> Result<MetricsReport, EvalError> {
    let trained = train_folds(records, cfg)?;
    evaluate_folds(records, &trained, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(fusion: FusionStrategy, mode: ModelMode) -> ExperimentConfig {
        ExperimentConfig {
            fusion,
            mode,
            class_names: vec!["a".into(), "b".into(), "c".into()],
            kappa: 8,
            nu: 8,
            folds: 3,
            inner_folds: 4,
            seed: 7,
            train: TrainConfig { epochs: 15, batch_size: 16, ..TrainConfig::default() },
            config_hash: "test".into(),
        }
    }

    fn dataset(n: usize, n_seq: usize, seed: u64) -> Vec<LabeledRecord<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let target = i % 3;
                let sequences = (0..n_seq)
                    .map(|_| {
                        (0..4)
                            .map(|_| {
                                (0..6)
                                    .map(|k| {
                                        let mean = if k % 3 == target { 1.0 } else { 0.0 };
                                        mean + rng.random_range(-0.4..0.4)
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                LabeledRecord { record_id: format!("rec{i:03}"), target, sequences }
            })
            .collect()
    }

    #[test]
    fn separable_data_scores_high() {
        let recs = dataset(60, 1, 1);
        for mode in ModelMode::ALL {
            let r = run_experiment(&recs, &config(FusionStrategy::FeatureConcat, mode)).unwrap();
            assert!(r.aggregate.auroc_macro.unwrap() > 0.95, "{mode:?} {:?} {:?}", r.aggregate.auroc_macro, r.per_fold.iter().map(|f| f.epochs.clone()).collect::<Vec<_>>());
            assert_eq!(r.per_fold.len(), 3);
            let total: u64 = r.aggregate.confusion_matrix.iter().flatten().sum();
            assert_eq!(total, 60);
        }
    }

    #[test]
    fn decision_fusion_reports_both_rules() {
        let recs = dataset(30, 12, 2);
        let cfg = ExperimentConfig {
            train: TrainConfig { epochs: 4, batch_size: 8, ..TrainConfig::default() },
            ..config(FusionStrategy::DecisionVote, ModelMode::Spectral)
        };
        let r = run_experiment(&recs, &cfg).unwrap();
        let dc = r.decision_comparison.unwrap();
        assert_eq!(dc.vote, r.aggregate.confusion_matrix);
        assert_eq!(dc.accumulation.iter().flatten().sum::<u64>(), 30);
    }

    #[test]
    fn deterministic_report() {
        let recs = dataset(30, 1, 3);
        let cfg = config(FusionStrategy::FeatureAccum, ModelMode::Joint);
        let a = run_experiment(&recs, &cfg).unwrap().to_json();
        let b = run_experiment(&recs, &cfg).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_records() {
        let mut recs = dataset(30, 1, 3);
        let cfg = config(FusionStrategy::DecisionAccum, ModelMode::Joint);
        assert!(matches!(run_experiment(&recs, &cfg), Err(EvalError::ConfigInvalid(_))));
        recs[1].record_id = recs[0].record_id.clone();
        let cfg = config(FusionStrategy::FeatureConcat, ModelMode::Joint);
        assert!(matches!(run_experiment(&recs, &cfg), Err(EvalError::ConfigInvalid(_))));
    }
}
