use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{record_spectrograms, Colormap, DspConfig};
use crate::encoder::{encode, read_feature_blob, write_feature_blob, EmbeddingBackend, FeatureBlob, FeatureSource, FeatureVector};
use crate::eval::LabeledRecord;
use crate::fusion::{data_fuse_leads, feature_accumulate, feature_concat, FusionInput, FusionStrategy, LeadFeatureBundle};
use crate::ingest::{EcgRecord, LeadId, RecordLabel, Task};

use super::{file_stem, load_record, read_json, write_json, Manifest, PipelineError, UpstreamConfig};

pub const CACHE_INDEX: &str = "cache.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub record_id: String,
    pub label: Option<RecordLabel>,
    pub file: String,
}

/// `cache.json`: what built the cache and which blobs it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheIndex {
    pub config_hash: String,
    pub upstream: UpstreamConfig,
    pub backend_id: String,
    pub tau: usize,
    pub gamma: usize,
    pub n_leads: usize,
    pub records: Vec<CacheEntry>,
}

/// Spectrograms → embeddings for one record. Per-lead input gives a blob
/// of 12 lead slots; stacked input gives one slot.
pub fn encode_record<B: EmbeddingBackend + ?Sized>(
    rec: &EcgRecord,
    dsp: &DspConfig,
    colormap: Colormap,
    input: FusionInput,
    backend: &B,
) -> Result<FeatureBlob, PipelineError> {
    let set = record_spectrograms::<f64>(rec, dsp)?;
    let gamma = set.gamma();
    let tau = backend.tau();
    let mut values = Vec::with_capacity(tau * gamma * input.n_leads());
    match input {
        FusionInput::PerLead => {
            for lead in LeadId::ALL {
                for (n, s) in set.lead(lead).iter().enumerate() {
                    let f = encode(backend, s, colormap, FeatureSource::SingleLead { lead, n })?;
                    values.extend(f.values.iter().map(|&v| v as f32));
                }
            }
        }
        FusionInput::Stacked => {
            for n in 0..gamma {
                let stacked = data_fuse_leads(set.at(n), n)?;
                let f = encode(backend, stacked.as_spectrogram(), colormap, FeatureSource::Fused { n })?;
                values.extend(f.values.iter().map(|&v| v as f32));
            }
        }
    }
    Ok(FeatureBlob::new(tau, gamma, input.n_leads(), values)?)
}

pub fn load_cache(dir: &Path) -> Result<CacheIndex, PipelineError> {
    let p = dir.join(CACHE_INDEX);
    if !p.exists() {
        return Err(PipelineError::Config(format!("no feature cache at {}", dir.display())));
    }
    read_json(&p)
}

/// Encodes every accepted manifest record into `cache`. An existing cache
/// built under the same upstream hash is extended in place; one built
/// under a different hash is rejected.
pub fn encode_stage(
    manifest: &Manifest,
    upstream: &UpstreamConfig,
    cache: &Path,
) -> Result<CacheIndex, PipelineError> {
    if upstream.ingest != manifest.ingest {
        return Err(PipelineError::StaleCache {
            expected: upstream.ingest.hash(),
            found: manifest.config_hash.clone(),
        });
    }
    let hash = upstream.hash();
    let existing = if cache.join(CACHE_INDEX).exists() {
        let idx = load_cache(cache)?;
        if idx.config_hash != hash {
            return Err(PipelineError::StaleCache {
                expected: hash,
                found: idx.config_hash,
            });
        }
        Some(idx)
    } else {
        None
    };
    std::fs::create_dir_all(cache).map_err(|e| PipelineError::io(cache, e))?;
    let backend = upstream.backend.build()?;
    let done: BTreeMap<&str, &CacheEntry> = existing
        .iter()
        .flat_map(|i| i.records.iter())
        .filter(|e| cache.join(&e.file).exists())
        .map(|e| (e.record_id.as_str(), e))
        .collect();

    let entries: Vec<_> = manifest.accepted().collect();
    let results: Vec<(CacheEntry, Option<usize>)> = entries
        .par_iter()
        .map(|e| -> Result<(CacheEntry, Option<usize>), PipelineError> {
            let file = format!("{}.ecgf", file_stem(&e.record_id));
            let entry = CacheEntry {
                record_id: e.record_id.clone(),
                label: e.label,
                file: file.clone(),
            };
            if done.contains_key(e.record_id.as_str()) {
                return Ok((entry, None));
            }
            let rec = load_record(&e.path, manifest.format, &manifest.ingest)?;
            let blob = encode_record(&rec, &upstream.dsp, upstream.colormap, upstream.fusion_input, &backend)?;
            write_feature_blob(&cache.join(&file), &blob)?;
            Ok((entry, Some(blob.gamma)))
        })
        .collect::<Result<_, _>>()?;

    let mut gamma = existing.as_ref().map(|i| i.gamma);
    for (e, g) in &results {
        if let Some(g) = g {
            if *gamma.get_or_insert(*g) != *g {
                return Err(PipelineError::Validation(format!("{}: {g} windows, expected {}", e.record_id, gamma.unwrap())));
            }
        }
    }
    let mut records: BTreeMap<String, CacheEntry> = existing
        .map(|i| i.records.into_iter().map(|e| (e.record_id.clone(), e)).collect())
        .unwrap_or_default();
    for (e, _) in results {
        records.insert(e.record_id.clone(), e);
    }
    let index = CacheIndex {
        config_hash: hash,
        upstream: upstream.clone(),
        backend_id: backend.id().to_string(),
        tau: backend.tau(),
        gamma: gamma.unwrap_or(0),
        n_leads: upstream.fusion_input.n_leads(),
        records: records.into_values().collect(),
    };
    write_json(&cache.join(CACHE_INDEX), &index)?;
    Ok(index)
}

fn blob_path(cache: &Path, e: &CacheEntry) -> PathBuf {
    cache.join(&e.file)
}

/// Turns one blob into the model inputs of `fusion`.
pub(crate) fn fuse_blob(blob: &FeatureBlob, fusion: FusionStrategy) -> Result<Vec<Vec<Vec<f64>>>, PipelineError> {
    let to64 = |v: &[f32]| -> Vec<f64> { v.iter().map(|&x| x as f64).collect() };
    if blob.n_leads != fusion.input().n_leads() {
        return Err(PipelineError::Config(format!(
            "{fusion} needs {} input, cache holds {} lead slot(s)",
            fusion.input().name(),
            blob.n_leads
        )));
    }
    let g = blob.gamma;
    Ok(match fusion {
        FusionStrategy::Data => vec![(0..g).map(|n| to64(blob.get(0, n))).collect()],
        FusionStrategy::DecisionAccum | FusionStrategy::DecisionVote => (0..12)
            .map(|l| (0..g).map(|n| to64(blob.get(l, n))).collect())
            .collect(),
        FusionStrategy::FeatureConcat | FusionStrategy::FeatureAccum => {
            let seq = (0..g)
                .map(|n| {
                    let bundle = LeadFeatureBundle {
                        n,
                        features: LeadId::ALL
                            .iter()
                            .map(|&lead| {
                                let fv = FeatureVector {
                                    values: to64(blob.get(lead.index(), n)),
                                    backend_id: String::new(),
                                    source: FeatureSource::SingleLead { lead, n },
                                };
                                (lead, fv)
                            })
                            .collect(),
                    };
                    let f = if fusion == FusionStrategy::FeatureConcat {
                        feature_concat(&bundle)?
                    } else {
                        feature_accumulate(&bundle)?
                    };
                    Ok(f.values)
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            vec![seq]
        }
    })
}

/// Loads the cached features as labeled records for `fusion` and `task`.
/// Records without a label usable for `task` are skipped.
pub fn labeled_records(
    cache: &Path,
    index: &CacheIndex,
    fusion: FusionStrategy,
    task: Task,
) -> Result<Vec<LabeledRecord<f64>>, PipelineError> {
    if fusion.input() != index.upstream.fusion_input {
        return Err(PipelineError::Config(format!(
            "{fusion} needs {} features but the cache holds {}",
            fusion.input().name(),
            index.upstream.fusion_input.name()
        )));
    }
    let usable: Vec<(&CacheEntry, usize)> = index
        .records
        .iter()
        .filter_map(|e| match e.label.and_then(|l| l.class_index(task)) {
            Some(c) => Some((e, c)),
            None => {
                log::warn!("{}: no {} label, skipped", e.record_id, task.name());
                None
            }
        })
        .collect();
    usable
        .par_iter()
        .map(|(e, target)| {
            let blob = read_feature_blob(&blob_path(cache, e))?;
            if blob.tau != index.tau || blob.gamma != index.gamma {
                return Err(PipelineError::Validation(format!("{}: blob shape disagrees with the cache index", e.record_id)));
            }
            Ok(LabeledRecord {
                record_id: e.record_id.clone(),
                target: *target,
                sequences: fuse_blob(&blob, fusion)?,
            })
        })
        .collect()
}
