use super::{IngestError, LeadId, RecordLabel};

/// One patient's synchronized 12-lead recording, in millivolts.
///
/// Leads are stored in canonical [`LeadId`] order and always have equal
/// length. Records are immutable once built; the transforms in this module
/// return new records.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    record_id: String,
    sampling_rate: u32,
    leads: [Vec<f64>; 12],
    label: Option<RecordLabel>,
}

impl EcgRecord {
    pub fn new(
        record_id: impl Into<String>,
        sampling_rate: u32,
        leads: [Vec<f64>; 12],
        label: Option<RecordLabel>,
    ) -> Result<Self, IngestError> {
        if sampling_rate == 0 {
            return Err(IngestError::InvalidRate(0.0));
        }
        let n = leads[0].len();
        if let Some((i, l)) = leads.iter().enumerate().find(|(_, l)| l.len() != n) {
            return Err(IngestError::LengthMismatch {
                lead: LeadId::ALL[i],
                expected: n,
                found: l.len(),
            });
        }
        Ok(Self {
            record_id: record_id.into(),
            sampling_rate,
            leads,
            label,
        })
    }

    pub fn record_id(&self) -> &str {
        &self.record_id
    }

    pub fn sampling_rate(&self) -> u32 {
        self.sampling_rate
    }

    pub fn label(&self) -> Option<RecordLabel> {
        self.label
    }

    pub fn with_label(mut self, label: Option<RecordLabel>) -> Self {
        self.label = label;
        self
    }

    pub fn lead(&self, lead: LeadId) -> &[f64] {
        &self.leads[lead.index()]
    }

    /// Leads in canonical order.
    pub fn leads(&self) -> impl Iterator<Item = (LeadId, &[f64])> {
        LeadId::ALL.iter().map(move |&l| (l, self.lead(l)))
    }

    pub fn n_samples(&self) -> usize {
        self.leads[0].len()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate as f64
    }

    pub(crate) fn map_leads(
        &self,
        sampling_rate: u32,
        mut f: impl FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<Self, IngestError> {
        let leads: [Vec<f64>; 12] = std::array::from_fn(|i| f(&self.leads[i]));
        EcgRecord::new(self.record_id.clone(), sampling_rate, leads, self.label)
    }
}
