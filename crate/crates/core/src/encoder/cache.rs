//! Per-record feature blob.
//!
//! Layout (little-endian):
//!
//! | bytes | field                      |
//! |-------|----------------------------|
//! | 5     | magic `ECGF1`              |
//! | 4     | tau (`u32`)                |
//! | 4     | gamma (`u32`)              |
//! | 4     | n_leads (`u32`)            |
//! | 4·N   | `f32` values, lead-major then window-major |
//!
//! `n_leads` is 12 for per-lead features (canonical lead order) and 1 for
//! stacked-spectrogram features.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::EncoderError;

pub const CACHE_MAGIC: &[u8; 5] = b"ECGF1";
const HEADER_LEN: usize = 5 + 12;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlob {
    pub tau: usize,
    pub gamma: usize,
    pub n_leads: usize,
    pub values: Vec<f32>,
}

impl FeatureBlob {
    pub fn new(tau: usize, gamma: usize, n_leads: usize, values: Vec<f32>) -> Result<Self, EncoderError> {
        if values.len() != tau * gamma * n_leads {
            return Err(EncoderError::Cache(format!(
                "{} values for tau={tau} gamma={gamma} n_leads={n_leads}",
                values.len()
            )));
        }
        Ok(Self {
            tau,
            gamma,
            n_leads,
            values,
        })
    }

    /// Feature vector of `lead_slot` at window `n`.
    pub fn get(&self, lead_slot: usize, n: usize) -> &[f32] {
        let start = (lead_slot * self.gamma + n) * self.tau;
        &self.values[start..start + self.tau]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(CACHE_MAGIC);
        for v in [self.tau, self.gamma, self.n_leads] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncoderError> {
        if bytes.len() < HEADER_LEN || &bytes[..5] != CACHE_MAGIC {
            return Err(EncoderError::Cache("bad magic".into()));
        }
        let word = |i: usize| {
            let o = 5 + 4 * i;
            u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
        };
        let (tau, gamma, n_leads) = (word(0), word(1), word(2));
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * tau * gamma * n_leads {
            return Err(EncoderError::Cache(format!(
                "body of {} bytes, header implies {}",
                body.len(),
                4 * tau * gamma * n_leads
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            tau,
            gamma,
            n_leads,
            values,
        })
    }
}

/// Writes atomically: temp file in the same directory, then rename.
pub fn write_feature_blob(path: &Path, blob: &FeatureBlob) -> Result<(), EncoderError> {
    let err = |e: std::io::Error| EncoderError::Cache(format!("{}: {e}", path.display()));
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(err)?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().unwrap_or_default().to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(err)?;
        f.write_all(&blob.to_bytes()).map_err(err)?;
        f.sync_all().map_err(err)?;
    }
    fs::rename(&tmp, path).map_err(err)
}

pub fn read_feature_blob(path: &Path) -> Result<FeatureBlob, EncoderError> {
    let bytes = fs::read(path).map_err(|e| EncoderError::Cache(format!("{}: {e}", path.display())))?;
    FeatureBlob::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let blob = FeatureBlob::new(2, 3, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = blob.to_bytes();
        assert_eq!(&b[..5], b"ECGF1");
        assert_eq!(&b[5..9], &[2, 0, 0, 0]);
        assert_eq!(&b[9..13], &[3, 0, 0, 0]);
        assert_eq!(&b[13..17], &[1, 0, 0, 0]);
        assert_eq!(&b[17..21], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 17 + 24);
        assert_eq!(FeatureBlob::from_bytes(&b).unwrap(), blob);
        assert_eq!(blob.get(0, 2), &[5.0, 6.0]);
    }

    #[test]
    fn lead_major_indexing() {
        let values: Vec<f32> = (0..12 * 19 * 4).map(|v| v as f32).collect();
        let blob = FeatureBlob::new(4, 19, 12, values).unwrap();
        assert_eq!(blob.get(1, 0)[0], (19 * 4) as f32);
        assert_eq!(blob.get(11, 18)[3], (12 * 19 * 4 - 1) as f32);
    }

    #[test]
    fn truncated_blob_rejected() {
        let blob = FeatureBlob::new(2, 2, 2, vec![0.0; 8]).unwrap();
        let b = blob.to_bytes();
        assert!(FeatureBlob::from_bytes(&b[..b.len() - 1]).is_err());
        assert!(FeatureBlob::from_bytes(b"ECGF2....").is_err());
    }

    #[test]
    fn atomic_write_and_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/r1.bin");
        let blob = FeatureBlob::new(3, 1, 1, vec![0.5, -1.0, 2.25]).unwrap();
        write_feature_blob(&p, &blob).unwrap();
        assert_eq!(read_feature_blob(&p).unwrap(), blob);
    }
}
