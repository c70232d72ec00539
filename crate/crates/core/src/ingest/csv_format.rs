//! Comma-delimited lead table plus a `<name>.meta.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EcgRecord, IngestError, LeadId, RecordLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub record_id: String,
    pub sampling_rate_hz: u32,
    #[serde(default)]
    pub label: Option<RecordLabel>,
}

/// `dir/rec.csv` → `dir/rec.meta.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    let stem = data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    data.with_file_name(format!("{stem}.meta.json"))
}

pub(crate) fn read_sidecar(path: &Path) -> Result<Sidecar, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::unreadable(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| IngestError::MalformedHeader(format!("{}: {e}", path.display())))
}

pub fn read_csv(path: &Path) -> Result<EcgRecord, IngestError> {
    let meta = read_sidecar(&sidecar_path(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IngestError::from_csv(path, e))?;

    let headers = rdr.headers().map_err(|e| IngestError::from_csv(path, e))?.clone();
    // column -> canonical lead slot
    let mut slots = Vec::with_capacity(headers.len());
    let mut seen = [false; 12];
    for h in headers.iter() {
        let lead: LeadId = h
            .parse()
            .map_err(|e| IngestError::MalformedHeader(format!("{}: {e}", path.display())))?;
        if seen[lead.index()] {
            return Err(IngestError::MalformedHeader(format!(
                "{}: lead {lead} appears twice",
                path.display()
            )));
        }
        seen[lead.index()] = true;
        slots.push(lead.index());
    }
    let found = seen.iter().filter(|s| **s).count();
    if found < 12 {
        return Err(IngestError::MissingLead {
            path: path.to_path_buf(),
            found,
        });
    }

    let mut leads: [Vec<f64>; 12] = Default::default();
    for (row_no, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| IngestError::from_csv(path, e))?;
        if row.len() != slots.len() {
            return Err(IngestError::MalformedHeader(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                row_no + 2,
                row.len(),
                slots.len()
            )));
        }
        for (field, &slot) in row.iter().zip(&slots) {
            let v: f64 = field.parse().map_err(|_| {
                IngestError::MalformedHeader(format!(
                    "{}: row {}: `{field}` is not a number",
                    path.display(),
                    row_no + 2
                ))
            })?;
            leads[slot].push(v);
        }
    }
    EcgRecord::new(meta.record_id, meta.sampling_rate_hz, leads, meta.label)
}

/// Writes `path` and its sidecar. Values use shortest round-trip
/// formatting, so reading the pair back yields a bit-identical record.
pub fn write_csv(rec: &EcgRecord, path: &Path) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| IngestError::from_csv(path, e))?;
    w.write_record(LeadId::ALL.iter().map(|l| l.name()))
        .map_err(|e| IngestError::from_csv(path, e))?;
    let mut row = Vec::with_capacity(12);
    for k in 0..rec.n_samples() {
        row.clear();
        row.extend(rec.leads().map(|(_, s)| format!("{:?}", s[k])));
        w.write_record(&row).map_err(|e| IngestError::from_csv(path, e))?;
    }
    w.flush().map_err(|e| IngestError::unreadable(path, e))?;

    let meta = Sidecar {
        record_id: rec.record_id().to_string(),
        sampling_rate_hz: rec.sampling_rate(),
        label: rec.label(),
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    fs::write(&side, json).map_err(|e| IngestError::unreadable(&side, e))
}
