use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eval::run_experiment;
use crate::fusion::FusionStrategy;
use crate::model::ModelMode;

use super::{encode_stage, labeled_records, write_atomic, Manifest, PipelineConfig, PipelineError};

fn all_fusions() -> Vec<FusionStrategy> {
    FusionStrategy::ALL.to_vec()
}

fn all_models() -> Vec<ModelMode> {
    ModelMode::ALL.to_vec()
}

/// Sweep description; relative paths are resolved against the grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub manifest: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub cache_root: Option<PathBuf>,
    /// Partial configuration applied to every cell.
    #[serde(default)]
    pub config: Option<serde_json::Value>,
    #[serde(default = "all_fusions")]
    pub fusions: Vec<FusionStrategy>,
    #[serde(default = "all_models")]
    pub models: Vec<ModelMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub fusion: FusionStrategy,
    pub model: ModelMode,
    pub method: String,
    pub auroc_per_class: Vec<Option<f64>>,
    pub auroc_macro: Option<f64>,
    pub accuracy: f64,
    pub config_hash: String,
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.1}", 100.0 * x)).unwrap_or_else(|| "-".into())
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Runs every fusion × model cell, encoding each needed feature cache
/// once. Writes `sweep.csv`, `sweep.txt` and one metrics JSON per cell.
pub fn sweep_stage(
    grid: &SweepGrid,
    base_dir: &Path,
    default_cache_root: Option<PathBuf>,
) -> Result<Vec<SweepRow>, PipelineError> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
    let manifest = Manifest::read(&resolve(&grid.manifest))?;
    let out = resolve(&grid.out);
    let cache_root = grid
        .cache_root
        .as_deref()
        .map(resolve)
        .or(default_cache_root)
        .unwrap_or_else(|| out.join("cache"));
    let mut base = PipelineConfig {
        ingest: manifest.ingest.clone(),
        ..PipelineConfig::default()
    };
    if let Some(c) = &grid.config {
        base = base.overlay_json(&c.to_string())?;
    }
    base.validate()?;
    if grid.fusions.is_empty() || grid.models.is_empty() {
        return Err(PipelineError::Config("sweep grid has no cells".into()));
    }

    let mut rows = Vec::new();
    let mut class_names = Vec::new();
    for &fusion in &grid.fusions {
        let mut cfg = base.clone();
        cfg.fusion = fusion;
        cfg.fusion_input = fusion.input();
        let up = cfg.upstream();
        let cache = cache_root.join(format!("{}-{}", up.fusion_input.name(), &up.hash()[..12]));
        let index = encode_stage(&manifest, &up, &cache)?;
        let records = labeled_records(&cache, &index, fusion, cfg.task)?;
        for &model in &grid.models {
            cfg.model = model;
            let exp = cfg.experiment();
            log::info!("sweep: {} {}", fusion.title(), model.title());
            let report = run_experiment(&records, &exp)?;
            write_atomic(
                &out.join(format!("{}__{}.json", fusion.name(), model.name())),
                report.to_json().as_bytes(),
            )?;
            class_names = report.class_names.clone();
            rows.push(SweepRow {
                fusion,
                model,
                method: format!("{} {}", fusion.title(), model.title()),
                auroc_per_class: report.aggregate.auroc_per_class.clone(),
                auroc_macro: report.aggregate.auroc_macro,
                accuracy: report.aggregate.accuracy,
                config_hash: report.config_hash.clone(),
            });
        }
    }

    let mut csv = String::from("method,fusion,model");
    for c in &class_names {
        let _ = write!(csv, ",auroc_{c}");
    }
    csv.push_str(",auroc_global,accuracy,config_hash\n");
    let width = rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
    let mut txt = format!("{:<width$}", "Method");
    for c in &class_names {
        let _ = write!(txt, " {c:>8}");
    }
    txt.push_str("   Global\n");
    for r in &rows {
        let _ = write!(csv, "{},{},{}", r.method, r.fusion.name(), r.model.name());
        let _ = write!(txt, "{:<width$}", r.method);
        for v in &r.auroc_per_class {
            let _ = write!(csv, ",{}", num(*v));
            let _ = write!(txt, " {:>8}", pct(*v));
        }
        let _ = writeln!(csv, ",{},{},{}", num(r.auroc_macro), r.accuracy, r.config_hash);
        let _ = writeln!(txt, " {:>8}", pct(r.auroc_macro));
    }
    write_atomic(&out.join("sweep.csv"), csv.as_bytes())?;
    write_atomic(&out.join("sweep.txt"), txt.as_bytes())?;
    Ok(rows)
}
