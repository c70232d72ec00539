use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eval::{combine_leads, evaluate_folds, train_folds, FoldAssignment, MetricsReport, TrainedFolds};
use crate::ingest::RecordFormat;
use crate::model::{forward_sequence, Checkpoint, ModelParams, Prediction};

use super::encode::fuse_blob;
use super::{encode_record, labeled_records, load_cache, load_record, write_atomic, PipelineConfig, PipelineError};

/// JSON metadata stored inside a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: PipelineConfig,
    pub cache_hash: String,
    pub backend_id: String,
    pub tau: usize,
    pub gamma: usize,
    pub class_names: Vec<String>,
    pub models_per_fold: usize,
    pub assignment: FoldAssignment,
    pub epochs: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub config_hash: String,
    pub n_records: usize,
    pub folds: usize,
    pub epochs: Vec<Vec<usize>>,
}

/// `{label, probs}` as printed by `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictOutput {
    pub label: String,
    pub probs: Vec<f64>,
}

fn read_checkpoint(path: &Path) -> Result<(Checkpoint, CheckpointMeta), PipelineError> {
    let ckpt = Checkpoint::read(path)?;
    let meta: CheckpointMeta = serde_json::from_str(&ckpt.meta)
        .map_err(|e| PipelineError::Config(format!("{}: bad checkpoint metadata: {e}", path.display())))?;
    if meta.config.hash() != ckpt.config_hash {
        return Err(PipelineError::StaleCache {
            expected: meta.config.hash(),
            found: ckpt.config_hash.clone(),
        });
    }
    let k = meta.assignment.k;
    if ckpt.models.len() != k * meta.models_per_fold || ckpt.optimizers.len() != ckpt.models.len() {
        return Err(PipelineError::Config(format!("{}: model count does not match folds", path.display())));
    }
    Ok((ckpt, meta))
}

fn trained_folds(ckpt: Checkpoint, meta: &CheckpointMeta) -> TrainedFolds<f64> {
    let m = meta.models_per_fold;
    TrainedFolds {
        assignment: meta.assignment.clone(),
        models: ckpt.models.chunks(m).map(|c| c.to_vec()).collect(),
        optimizers: ckpt.optimizers.chunks(m).map(|c| c.to_vec()).collect(),
        epochs: meta.epochs.clone(),
    }
}

/// Cross-validated training on a feature cache. The cache's own upstream
/// settings are adopted; when `upstream_given` is set they must also match
/// `cfg`.
pub fn train_stage(
    cache: &Path,
    cfg: &PipelineConfig,
    upstream_given: bool,
    out: &Path,
) -> Result<TrainSummary, PipelineError> {
    let index = load_cache(cache)?;
    let mut cfg = cfg.clone();
    if upstream_given {
        let mut probe = cfg.upstream();
        probe.fusion_input = index.upstream.fusion_input;
        if probe.hash() != index.config_hash {
            return Err(PipelineError::StaleCache {
                expected: probe.hash(),
                found: index.config_hash,
            });
        }
    }
    cfg.set_upstream(index.upstream.clone());
    cfg.validate()?;
    let records = labeled_records(cache, &index, cfg.fusion, cfg.task)?;
    let exp = cfg.experiment();
    let trained = train_folds(&records, &exp)?;
    let first = &trained.models[0][0];
    let meta = CheckpointMeta {
        config: cfg.clone(),
        cache_hash: index.config_hash.clone(),
        backend_id: index.backend_id.clone(),
        tau: index.tau,
        gamma: index.gamma,
        class_names: exp.class_names.clone(),
        models_per_fold: trained.models[0].len(),
        assignment: trained.assignment.clone(),
        epochs: trained.epochs.clone(),
    };
    let ckpt = Checkpoint {
        mode: first.mode,
        dims: first.dims,
        seed: cfg.seed,
        config_hash: exp.config_hash.clone(),
        meta: serde_json::to_string(&meta).expect("serializable"),
        models: trained.models.iter().flatten().cloned().collect(),
        optimizers: trained.optimizers.iter().flatten().cloned().collect(),
    };
    write_atomic(out, &ckpt.to_bytes())?;
    Ok(TrainSummary {
        config_hash: exp.config_hash,
        n_records: records.len(),
        folds: cfg.folds,
        epochs: trained.epochs,
    })
}

/// Out-of-fold evaluation of a checkpoint against the cache it was
/// trained on.
pub fn evaluate_stage(ckpt_path: &Path, cache: &Path, report: &Path) -> Result<MetricsReport, PipelineError> {
    let (ckpt, meta) = read_checkpoint(ckpt_path)?;
    let index = load_cache(cache)?;
    if index.config_hash != meta.cache_hash {
        return Err(PipelineError::StaleCache {
            expected: meta.cache_hash,
            found: index.config_hash,
        });
    }
    let records = labeled_records(cache, &index, meta.config.fusion, meta.config.task)?;
    let exp = meta.config.experiment();
    let trained = trained_folds(ckpt, &meta);
    let r = evaluate_folds(&records, &trained, &exp)?;
    write_atomic(report, r.to_json().as_bytes())?;
    Ok(r)
}

/// Classifies one record with every fold's model(s) and averages the
/// fold-level probabilities.
pub fn predict_record(
    ckpt_path: &Path,
    record: &Path,
    format: RecordFormat,
) -> Result<PredictOutput, PipelineError> {
    let (ckpt, meta) = read_checkpoint(ckpt_path)?;
    let cfg = &meta.config;
    let backend = cfg.backend.build()?;
    if backend.id() != meta.backend_id {
        return Err(PipelineError::StaleCache {
            expected: meta.backend_id.clone(),
            found: backend.id().to_string(),
        });
    }
    let rec = load_record(record, format, &cfg.ingest)?;
    let blob = encode_record(&rec, &cfg.dsp, cfg.colormap, cfg.fusion.input(), &backend)?;
    if blob.gamma != meta.gamma {
        return Err(PipelineError::Validation(format!(
            "record yields {} windows, model expects {}",
            blob.gamma, meta.gamma
        )));
    }
    let seqs = fuse_blob(&blob, cfg.fusion)?;
    let n_c = meta.class_names.len();
    let mut mean = vec![0.0; n_c];
    let folds: Vec<&[ModelParams<f64>]> = ckpt.models.chunks(meta.models_per_fold).collect();
    for models in &folds {
        let per: Vec<Prediction<f64>> = models
            .iter()
            .zip(&seqs)
            .map(|(p, s)| forward_sequence(s, p))
            .collect::<Result<_, _>>()?;
        let (p, _) = combine_leads(per, cfg.fusion)?;
        mean.iter_mut().zip(&p.probs).for_each(|(m, v)| *m += v);
    }
    let k = folds.len() as f64;
    let p = Prediction::from_probs(mean.into_iter().map(|m| m / k).collect::<Vec<f64>>());
    Ok(PredictOutput {
        label: meta.class_names[p.label].clone(),
        probs: p.probs,
    })
}
