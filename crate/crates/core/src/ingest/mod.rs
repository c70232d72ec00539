//! Record parsing, validation and canonicalization.
//!
//! Every downstream stage assumes 500 Hz × 10 s records; [`canonicalize`]
//! gets any parsed record there (linear resampling, then truncation).

mod csv_format;
mod label;
mod lead;
mod record;
mod wfdb;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use csv_format::{read_csv, sidecar_path, write_csv, Sidecar};
pub use label::{BinaryLabel, DiagnosisLabel, RecordLabel, Task};
pub use lead::{LeadId, UnknownLead};
pub use record::EcgRecord;
pub use wfdb::{parse_header as parse_wfdb_header, read_wfdb, write_wfdb, WfdbHeader};

pub const CANONICAL_RATE_HZ: u32 = 500;
pub const CANONICAL_SECONDS: f64 = 10.0;
pub const DEFAULT_FLATLINE_EPS_MV: f64 = 0.01;
pub const DEFAULT_RANGE_LIMIT_MV: f64 = 25.0;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{}: only {found} of the 12 standard leads present", path.display())]
    MissingLead { path: PathBuf, found: usize },
    #[error("lead {lead} has {found} samples, expected {expected}")]
    LengthMismatch {
        lead: LeadId,
        expected: usize,
        found: usize,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("cannot read {}: {source}", path.display())]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid sampling rate {0}")]
    InvalidRate(f64),
    #[error("record has no samples")]
    EmptySignal,
    #[error("record lasts {have_s} s, {need_s} s requested")]
    TooShort { have_s: f64, need_s: f64 },
}

impl IngestError {
    pub(crate) fn unreadable(path: &Path, source: std::io::Error) -> Self {
        IngestError::UnreadableFile {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn from_csv(path: &Path, e: csv::Error) -> Self {
        if let csv::ErrorKind::Io(_) = e.kind() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Self::unreadable(path, io),
                _ => unreachable!(),
            }
        } else {
            IngestError::MalformedHeader(format!("{}: {e}", path.display()))
        }
    }
}

/// On-disk record layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    /// Comma-delimited lead table with a JSON sidecar.
    Csv,
    /// Format-16 WFDB header + data pair.
    Wfdb,
}

impl std::str::FromStr for RecordFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" | "delimited_text" => Ok(RecordFormat::Csv),
            "wfdb" | "wfdb_binary" => Ok(RecordFormat::Wfdb),
            other => Err(format!("unknown record format `{other}`")),
        }
    }
}

impl RecordFormat {
    /// File extension that identifies a record of this format in a directory.
    pub fn extension(self) -> &'static str {
        match self {
            RecordFormat::Csv => "csv",
            RecordFormat::Wfdb => "hea",
        }
    }
}

pub fn parse_record(path: &Path, format: RecordFormat) -> Result<EcgRecord, IngestError> {
    match format {
        RecordFormat::Csv => read_csv(path),
        RecordFormat::Wfdb => read_wfdb(path),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeadFlags {
    pub missing: bool,
    pub flatline: bool,
    pub out_of_range: bool,
}

impl LeadFlags {
    pub fn any(&self) -> bool {
        self.missing || self.flatline || self.out_of_range
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub record_id: String,
    pub flags: [LeadFlags; 12],
    pub accepted: bool,
}

impl ValidationReport {
    pub fn flagged_leads(&self) -> impl Iterator<Item = (LeadId, LeadFlags)> + '_ {
        LeadId::ALL
            .iter()
            .map(|&l| (l, self.flags[l.index()]))
            .filter(|(_, f)| f.any())
    }
}

/// Flags erratic leads. A lead is *missing* when it is empty or holds a
/// non-finite sample, *flatline* when its peak-to-peak span is below
/// `flatline_eps`, and *out of range* when any |sample| exceeds
/// `range_limit` (all in mV).
pub fn validate_record(rec: &EcgRecord, flatline_eps: f64, range_limit: f64) -> ValidationReport {
    let flags: [LeadFlags; 12] = std::array::from_fn(|i| {
        let s = rec.lead(LeadId::ALL[i]);
        let missing = s.is_empty() || s.iter().any(|v| !v.is_finite());
        if missing {
            return LeadFlags {
                missing,
                ..Default::default()
            };
        }
        let (lo, hi) = s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        LeadFlags {
            missing,
            flatline: hi - lo < flatline_eps,
            out_of_range: s.iter().any(|v| v.abs() > range_limit),
        }
    });
    ValidationReport {
        record_id: rec.record_id().to_string(),
        accepted: !flags.iter().any(LeadFlags::any),
        flags,
    }
}

/// Linear-interpolation resampling of every lead to `target_hz`.
///
/// Output sample `k` sits at time `k / target_hz`; the output holds
/// `floor(n · target / rate)` samples (at least one), so its duration
/// matches the input to within one output sample period.
pub fn resample(rec: &EcgRecord, target_hz: u32) -> Result<EcgRecord, IngestError> {
    if target_hz == 0 {
        return Err(IngestError::InvalidRate(0.0));
    }
    let n = rec.n_samples();
    if n == 0 {
        return Err(IngestError::EmptySignal);
    }
    let rate = rec.sampling_rate();
    if target_hz == rate {
        return Ok(rec.clone());
    }
    let m = ((n as u64 * target_hz as u64) / rate as u64).max(1) as usize;
    let step = rate as f64 / target_hz as f64;
    rec.map_leads(target_hz, |s| {
        (0..m)
            .map(|k| {
                let pos = k as f64 * step;
                let i = (pos.floor() as usize).min(n - 1);
                let t = pos - i as f64;
                if i + 1 >= n || t == 0.0 {
                    s[i]
                } else {
                    // a + (b - a)·t keeps constant runs exact
                    s[i] + (s[i + 1] - s[i]) * t
                }
            })
            .collect()
    })
}

/// Keeps the first `floor(seconds · rate)` samples of every lead.
pub fn truncate(rec: &EcgRecord, seconds: f64) -> Result<EcgRecord, IngestError> {
    let keep = (seconds * rec.sampling_rate() as f64).floor() as usize;
    if !(seconds > 0.0) || keep > rec.n_samples() {
        return Err(IngestError::TooShort {
            have_s: rec.duration_s(),
            need_s: seconds,
        });
    }
    if keep == rec.n_samples() {
        return Ok(rec.clone());
    }
    rec.map_leads(rec.sampling_rate(), |s| s[..keep].to_vec())
}

/// Resample to `rate_hz`, then keep the first `seconds`.
pub fn canonicalize(rec: &EcgRecord, rate_hz: u32, seconds: f64) -> Result<EcgRecord, IngestError> {
    truncate(&resample(rec, rate_hz)?, seconds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(rate: u32, n: usize, f: impl Fn(usize, usize) -> f64) -> EcgRecord {
        let leads = std::array::from_fn(|j| (0..n).map(|k| f(j, k)).collect());
        EcgRecord::new("r", rate, leads, None).unwrap()
    }

    #[test]
    fn unequal_leads_rejected() {
        let mut leads: [Vec<f64>; 12] = std::array::from_fn(|_| vec![0.0; 10]);
        leads[4].pop();
        match EcgRecord::new("r", 500, leads, None) {
            Err(IngestError::LengthMismatch { lead, .. }) => assert_eq!(lead, LeadId::AVL),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flatline_lead_is_flagged() {
        let rec = record(500, 5000, |j, k| {
            if j == LeadId::II.index() {
                0.0
            } else {
                (k as f64 * 0.01).sin()
            }
        });
        let rep = validate_record(&rec, 0.01, 25.0);
        assert!(!rep.accepted);
        let flagged: Vec<_> = rep.flagged_leads().collect();
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].0, LeadId::II);
        assert!(flagged[0].1.flatline);
    }

    #[test]
    fn in_range_record_is_accepted() {
        let rec = record(500, 5000, |j, k| 4.0 * ((k + j) as f64 * 0.07).sin());
        assert!(validate_record(&rec, 0.01, 25.0).accepted);
    }

    #[test]
    fn spike_is_out_of_range() {
        let rec = record(500, 5000, |j, k| {
            if j == LeadId::V3.index() && k == 1234 {
                100.0
            } else {
                (k as f64 * 0.05).cos()
            }
        });
        let rep = validate_record(&rec, 0.01, 25.0);
        assert!(!rep.accepted);
        assert!(rep.flags[LeadId::V3.index()].out_of_range);
        assert_eq!(rep.flagged_leads().count(), 1);
    }

    #[test]
    fn nan_marks_missing() {
        let rec = record(500, 100, |j, k| if j == 0 && k == 3 { f64::NAN } else { k as f64 });
        assert!(validate_record(&rec, 0.01, 1e9).flags[0].missing);
    }

    #[test]
    fn decimation_halves_length() {
        let rec = record(1000, 10000, |_, k| k as f64);
        let out = resample(&rec, 500).unwrap();
        assert_eq!(out.n_samples(), 5000);
        assert_eq!(out.sampling_rate(), 500);
        assert_eq!(out.lead(LeadId::V6)[10], 20.0);
    }

    #[test]
    fn resample_same_rate_is_identity() {
        let rec = record(500, 300, |j, k| (j * k) as f64 * 0.3);
        assert_eq!(resample(&rec, 500).unwrap(), rec);
    }

    #[test]
    fn resample_preserves_constants() {
        let rec = record(360, 3600, |_, _| 0.123_456_789);
        for target in [500, 250, 1000, 257] {
            let out = resample(&rec, target).unwrap();
            assert!(out.leads().all(|(_, s)| s.iter().all(|&v| v == 0.123_456_789)));
            assert!((out.duration_s() - rec.duration_s()).abs() <= 1.0 / target as f64);
        }
    }

    #[test]
    fn upsampling_interpolates_linearly() {
        let rec = record(250, 10, |_, k| 2.0 * k as f64);
        let out = resample(&rec, 500).unwrap();
        assert_eq!(out.n_samples(), 20);
        assert_eq!(out.lead(LeadId::I)[3], 3.0);
    }

    #[test]
    fn truncate_keeps_prefix() {
        let rec = record(500, 16000, |_, k| k as f64);
        let out = truncate(&rec, 10.0).unwrap();
        assert_eq!(out.n_samples(), 5000);
        assert_eq!(out.lead(LeadId::I)[4999], 4999.0);
        assert_eq!(truncate(&out, 10.0).unwrap(), out);
        let short = record(500, 2500, |_, _| 0.0);
        assert!(matches!(truncate(&short, 10.0), Err(IngestError::TooShort { .. })));
    }
}
