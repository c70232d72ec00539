//! Minimal WFDB reader: one `.hea` header plus one format-16 `.dat` file.
//!
//! Supported profile: single-segment records whose signals all live in the
//! same data file as interleaved 16-bit little-endian two's complement
//! samples. Leads outside the standard twelve (e.g. Frank leads vx/vy/vz)
//! are read past and dropped.

use std::fs;
use std::path::Path;

use super::csv_format::{read_sidecar, sidecar_path};
use super::{BinaryLabel, EcgRecord, IngestError, LeadId, RecordLabel};

const DEFAULT_GAIN: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub file_name: String,
    pub format: u32,
    /// ADC units per physical unit.
    pub gain: f64,
    pub baseline: i32,
    pub units: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfdbHeader {
    pub record_name: String,
    pub sampling_rate: f64,
    pub n_samples: Option<usize>,
    pub signals: Vec<SignalSpec>,
    pub comments: Vec<String>,
}

fn malformed(msg: impl Into<String>) -> IngestError {
    IngestError::MalformedHeader(msg.into())
}

pub fn parse_header(text: &str) -> Result<WfdbHeader, IngestError> {
    let mut comments = Vec::new();
    let mut body = Vec::new();
    for l in text.lines().map(str::trim) {
        if let Some(c) = l.strip_prefix('#') {
            comments.push(c.trim().to_string());
        } else if !l.is_empty() {
            body.push(l.to_string());
        }
    }
    let mut lines = body.into_iter();

    let record_line = lines.next().ok_or_else(|| malformed("empty header"))?;
    let mut tok = record_line.split_whitespace();
    let record_name = tok.next().ok_or_else(|| malformed("missing record name"))?;
    if record_name.contains('/') {
        return Err(malformed("multi-segment records are not supported"));
    }
    let n_sig: usize = tok
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| malformed("missing signal count"))?;
    // "fs[/counter_freq[(base)]]"
    let sampling_rate = match tok.next() {
        Some(t) => t
            .split('/')
            .next()
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| malformed(format!("bad sampling frequency `{t}`")))?,
        None => 250.0,
    };
    let n_samples = tok.next().and_then(|t| t.parse().ok());

    let mut signals = Vec::with_capacity(n_sig);
    for _ in 0..n_sig {
        let line = lines.next().ok_or_else(|| malformed("fewer signal lines than declared"))?;
        signals.push(parse_signal_line(&line)?);
    }
    drop(lines);

    Ok(WfdbHeader {
        record_name: record_name.to_string(),
        sampling_rate,
        n_samples,
        signals,
        comments,
    })
}

fn parse_signal_line(line: &str) -> Result<SignalSpec, IngestError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(malformed(format!("signal line too short: `{line}`")));
    }
    let file_name = fields[0].to_string();
    let format: u32 = fields[1]
        .split(['x', ':', '+'])
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| malformed(format!("bad format field `{}`", fields[1])))?;

    // gain[(baseline)][/units]
    let (mut gain, mut baseline, mut units) = (DEFAULT_GAIN, None, "mV".to_string());
    if let Some(g) = fields.get(2) {
        let (num, unit) = match g.split_once('/') {
            Some((n, u)) => (n, Some(u)),
            None => (*g, None),
        };
        let (gnum, base) = match num.split_once('(') {
            Some((n, b)) => (n, Some(b.trim_end_matches(')'))),
            None => (num, None),
        };
        gain = gnum
            .parse()
            .map_err(|_| malformed(format!("bad gain `{g}`")))?;
        if gain == 0.0 {
            gain = DEFAULT_GAIN;
        }
        if let Some(b) = base {
            baseline = Some(b.parse().map_err(|_| malformed(format!("bad baseline `{g}`")))?);
        }
        if let Some(u) = unit {
            units = u.to_string();
        }
    }
    let adc_zero: i32 = fields.get(4).and_then(|t| t.parse().ok()).unwrap_or(0);
    let description = if fields.len() > 8 {
        fields[8..].join(" ")
    } else {
        String::new()
    };
    Ok(SignalSpec {
        file_name,
        format,
        gain,
        baseline: baseline.unwrap_or(adc_zero),
        units,
        description,
    })
}

/// PTB-style comment lines ("Reason for admission: ...") carry a coarse
/// diagnosis that only supports the binary view.
fn label_from_comments(comments: &[String]) -> Option<RecordLabel> {
    comments.iter().find_map(|c| {
        let (key, value) = c.split_once(':')?;
        if !key.trim().eq_ignore_ascii_case("reason for admission") {
            return None;
        }
        let v = value.trim().to_ascii_lowercase();
        if v.starts_with("myocardial infarction") {
            Some(RecordLabel::Binary(BinaryLabel::Mi))
        } else if v.starts_with("healthy control") {
            Some(RecordLabel::Binary(BinaryLabel::Normal))
        } else {
            None
        }
    })
}

fn millivolt_scale(units: &str) -> Result<f64, IngestError> {
    match units.to_ascii_lowercase().as_str() {
        "mv" => Ok(1.0),
        "uv" | "µv" => Ok(1e-3),
        "v" => Ok(1e3),
        other => Err(malformed(format!("unsupported units `{other}`"))),
    }
}

/// Reads `<stem>.hea` and its data file. `path` may point at either the
/// header or the `.dat` file. An optional `<stem>.meta.json` sidecar
/// overrides the record id and label.
pub fn read_wfdb(path: &Path) -> Result<EcgRecord, IngestError> {
    let hea = path.with_extension("hea");
    let text = fs::read_to_string(&hea).map_err(|e| IngestError::unreadable(&hea, e))?;
    let header = parse_header(&text)?;

    if header.sampling_rate <= 0.0 || header.sampling_rate.fract() != 0.0 {
        return Err(IngestError::InvalidRate(header.sampling_rate));
    }
    let n_sig = header.signals.len();
    if n_sig == 0 {
        return Err(malformed("record has no signals"));
    }
    let data_file = &header.signals[0].file_name;
    for s in &header.signals {
        if s.format != 16 {
            return Err(malformed(format!("signal format {} is not supported", s.format)));
        }
        if &s.file_name != data_file {
            return Err(malformed("signals spread over several data files"));
        }
    }

    let mut slot_of_signal = vec![None; n_sig];
    let mut seen = [false; 12];
    for (i, s) in header.signals.iter().enumerate() {
        if let Ok(lead) = s.description.parse::<LeadId>() {
            if !seen[lead.index()] {
                seen[lead.index()] = true;
                slot_of_signal[i] = Some(lead.index());
            }
        }
    }
    let found = seen.iter().filter(|s| **s).count();
    if found < 12 {
        return Err(IngestError::MissingLead {
            path: hea,
            found,
        });
    }

    let dat = hea.with_file_name(data_file);
    let bytes = fs::read(&dat).map_err(|e| IngestError::unreadable(&dat, e))?;
    let frame_bytes = 2 * n_sig;
    let mut n_frames = bytes.len() / frame_bytes;
    if let Some(declared) = header.n_samples {
        if declared > n_frames {
            return Err(IngestError::LengthMismatch {
                lead: LeadId::I,
                expected: declared,
                found: n_frames,
            });
        }
        if declared > 0 {
            n_frames = declared;
        }
    }

    let scales: Vec<f64> = header
        .signals
        .iter()
        .map(|s| millivolt_scale(&s.units).map(|u| u / s.gain))
        .collect::<Result<_, _>>()?;

    let mut leads: [Vec<f64>; 12] = std::array::from_fn(|_| Vec::with_capacity(n_frames));
    for frame in bytes.chunks_exact(frame_bytes).take(n_frames) {
        for (i, pair) in frame.chunks_exact(2).enumerate() {
            if let Some(slot) = slot_of_signal[i] {
                let adc = i16::from_le_bytes([pair[0], pair[1]]) as i32;
                let s = &header.signals[i];
                leads[slot].push((adc - s.baseline) as f64 * scales[i]);
            }
        }
    }

    let side = sidecar_path(&hea);
    let (record_id, label) = if side.exists() {
        let meta = read_sidecar(&side)?;
        (meta.record_id, meta.label)
    } else {
        (header.record_name.clone(), label_from_comments(&header.comments))
    };
    EcgRecord::new(record_id, header.sampling_rate as u32, leads, label)
}

/// Writes a format-16 record (header + data). Samples are quantized at
/// `gain` ADC units per mV, so a round trip is exact only to 1/gain mV.
pub fn write_wfdb(rec: &EcgRecord, dir: &Path, gain: f64) -> Result<(), IngestError> {
    let name = rec.record_id();
    let dat_name = format!("{name}.dat");
    let mut hea = format!(
        "{name} 12 {} {}\n",
        rec.sampling_rate(),
        rec.n_samples()
    );
    for lead in LeadId::ALL {
        hea.push_str(&format!(
            "{dat_name} 16 {gain}/mV 16 0 0 0 0 {}\n",
            lead.name().to_ascii_lowercase()
        ));
    }
    if let Some(l) = rec.label() {
        let reason = match l.binary() {
            BinaryLabel::Mi => "Myocardial infarction",
            BinaryLabel::Normal => "Healthy control",
        };
        hea.push_str(&format!("# Reason for admission: {reason}\n"));
    }
    let mut data = Vec::with_capacity(rec.n_samples() * 24);
    for k in 0..rec.n_samples() {
        for (_, s) in rec.leads() {
            let adc = (s[k] * gain).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
            data.extend_from_slice(&adc.to_le_bytes());
        }
    }
    let hea_path = dir.join(format!("{name}.hea"));
    fs::write(&hea_path, hea).map_err(|e| IngestError::unreadable(&hea_path, e))?;
    let dat_path = dir.join(dat_name);
    fs::write(&dat_path, data).map_err(|e| IngestError::unreadable(&dat_path, e))
}
