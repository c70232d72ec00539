use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ingest::{canonicalize, parse_record, validate_record, EcgRecord, RecordFormat, RecordLabel};

use super::{write_json, IngestOptions, PipelineError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub record_id: String,
    pub path: PathBuf,
    pub label: Option<RecordLabel>,
    pub source_rate_hz: u32,
    pub source_seconds: f64,
    pub accepted: bool,
    /// Reasons for rejection: flagged leads or a too-short signal.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub ingest: IngestOptions,
    pub format: RecordFormat,
    pub records: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn accepted(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.records.iter().filter(|e| e.accepted)
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        super::read_json(path)
    }
}

/// Parses and canonicalizes one record.
pub fn load_record(path: &Path, format: RecordFormat, opts: &IngestOptions) -> Result<EcgRecord, PipelineError> {
    let rec = parse_record(path, format)?;
    Ok(canonicalize(&rec, opts.rate_hz, opts.seconds)?)
}

fn list_inputs(dir: &Path, format: RecordFormat) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))? {
        let p = entry.map_err(|e| PipelineError::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case(format.extension())) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Parses every record in `input`, validates it and writes the manifest.
/// Records with flagged leads or too little signal are listed but marked
/// as not accepted.
pub fn ingest_stage(
    input: &Path,
    format: RecordFormat,
    opts: &IngestOptions,
    out: &Path,
) -> Result<Manifest, PipelineError> {
    let files = list_inputs(input, format)?;
    if files.is_empty() {
        return Err(PipelineError::Validation(format!(
            "no .{} records in {}",
            format.extension(),
            input.display()
        )));
    }
    let mut seen = BTreeSet::new();
    let mut records = Vec::with_capacity(files.len());
    for path in files {
        let rec = parse_record(&path, format)?;
        if !seen.insert(rec.record_id().to_string()) {
            return Err(PipelineError::Validation(format!(
                "duplicate record id {} ({})",
                rec.record_id(),
                path.display()
            )));
        }
        let mut issues = Vec::new();
        let report = validate_record(&rec, opts.flatline_eps_mv, opts.range_limit_mv);
        for (lead, f) in report.flagged_leads() {
            let mut what = Vec::new();
            if f.missing {
                what.push("missing");
            }
            if f.flatline {
                what.push("flatline");
            }
            if f.out_of_range {
                what.push("out of range");
            }
            issues.push(format!("{lead}: {}", what.join(", ")));
        }
        if let Err(e) = canonicalize(&rec, opts.rate_hz, opts.seconds) {
            issues.push(e.to_string());
        }
        if !issues.is_empty() {
            log::warn!("{}: rejected ({})", rec.record_id(), issues.join("; "));
        }
        let path = fs::canonicalize(&path).unwrap_or(path);
        records.push(ManifestEntry {
            record_id: rec.record_id().to_string(),
            path,
            label: rec.label(),
            source_rate_hz: rec.sampling_rate(),
            source_seconds: rec.duration_s(),
            accepted: issues.is_empty(),
            issues,
        });
    }
    let manifest = Manifest {
        config_hash: opts.hash(),
        ingest: opts.clone(),
        format,
        records,
    };
    if manifest.accepted().next().is_none() {
        return Err(PipelineError::Validation("every record was rejected".into()));
    }
    write_json(out, &manifest)?;
    Ok(manifest)
}
