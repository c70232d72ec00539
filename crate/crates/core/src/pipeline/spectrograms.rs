//! `<record>.spec` layout (little-endian): magic `ECGS1`, `u32` rows,
//! `u32` cols, `u32` gamma, `f64` bin width (Hz), `f64` frame hop (s), then
//! `f64` values lead-major, window-major, row-major, canonical lead order.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{record_spectrograms, render_image, save_png, Colormap, DspConfig, Spectrogram, WindowSet};
use crate::ingest::LeadId;

use super::{canonical_json, file_stem, load_record, sha256_hex, write_atomic, write_json, Manifest, PipelineError};

const SPEC_MAGIC: &[u8; 5] = b"ECGS1";
const HEADER: usize = 5 + 12 + 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramIndex {
    pub config_hash: String,
    pub manifest_hash: String,
    pub dsp: DspConfig,
    pub records: Vec<String>,
}

pub fn write_spectrograms(set: &WindowSet<Spectrogram<f64>>, path: &Path) -> Result<(), PipelineError> {
    let first = &set.per_lead[0][0];
    let (rows, cols) = first.shape();
    let mut out = Vec::with_capacity(HEADER + 8 * rows * cols * set.gamma() * 12);
    out.extend_from_slice(SPEC_MAGIC);
    for v in [rows, cols, set.gamma()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&first.bin_hz.to_le_bytes());
    out.extend_from_slice(&first.frame_s.to_le_bytes());
    for lead in &set.per_lead {
        for s in lead {
            for v in s.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    write_atomic(path, &out)
}

pub fn read_spectrograms(path: &Path, record_id: &str) -> Result<WindowSet<Spectrogram<f64>>, PipelineError> {
    let buf = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    let bad = || PipelineError::Validation(format!("{}: malformed spectrogram file", path.display()));
    if buf.len() < HEADER || &buf[..5] != SPEC_MAGIC {
        return Err(bad());
    }
    let u = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap()) as usize;
    let f = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let (rows, cols, gamma) = (u(5), u(9), u(13));
    let (bin_hz, frame_s) = (f(17), f(25));
    if gamma == 0 || buf.len() != HEADER + 8 * rows * cols * gamma * 12 {
        return Err(bad());
    }
    let mut vals = buf[HEADER..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let per_lead: [Vec<Spectrogram<f64>>; 12] = std::array::from_fn(|_| {
        (0..gamma)
            .map(|_| {
                let v: Vec<f64> = vals.by_ref().take(rows * cols).collect();
                Spectrogram::from_values(rows, cols, v, bin_hz, frame_s, true).expect("sized")
            })
            .collect()
    });
    Ok(WindowSet::new(record_id, per_lead)?)
}

/// Computes normalized spectrograms for every accepted record; with
/// `png` also writes `<out>/<record>/<lead>/<n>.png`.
pub fn spectrogram_stage(
    manifest: &Manifest,
    dsp: &DspConfig,
    colormap: Colormap,
    out: &Path,
    png: bool,
) -> Result<SpectrogramIndex, PipelineError> {
    fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
    let entries: Vec<_> = manifest.accepted().collect();
    entries.par_iter().try_for_each(|e| -> Result<(), PipelineError> {
        let rec = load_record(&e.path, manifest.format, &manifest.ingest)?;
        let set = record_spectrograms::<f64>(&rec, dsp)?;
        let stem = file_stem(&e.record_id);
        write_spectrograms(&set, &out.join(format!("{stem}.spec")))?;
        if png {
            for lead in LeadId::ALL {
                let dir = out.join(&stem).join(lead.name());
                fs::create_dir_all(&dir).map_err(|err| PipelineError::io(&dir, err))?;
                for (n, s) in set.lead(lead).iter().enumerate() {
                    let r = render_image(s, colormap)?;
                    save_png(&r.image, &dir.join(format!("{n}.png")))?;
                }
            }
        }
        Ok(())
    })?;
    let index = SpectrogramIndex {
        config_hash: sha256_hex(canonical_json(&(&manifest.ingest, dsp)).as_bytes()),
        manifest_hash: manifest.config_hash.clone(),
        dsp: dsp.clone(),
        records: entries.iter().map(|e| e.record_id.clone()).collect(),
    };
    write_json(&out.join("spectrograms.json"), &index)?;
    Ok(index)
}
