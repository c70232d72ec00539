//! Multi-lead fusion at data, feature and decision level.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::Spectrogram;
use crate::encoder::{FeatureSource, FeatureVector};
use crate::ingest::LeadId;
use crate::model::Prediction;
use crate::{Scalar, N_LEADS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("lead {0} missing")]
    MissingLead(LeadId),
    #[error("lead {lead} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        lead: LeadId,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("lead {lead} has tau {found}, expected {expected}")]
    TauMismatch { lead: LeadId, expected: usize, found: usize },
    #[error("prediction of lead {lead} sums to {sum}")]
    NotNormalized { lead: LeadId, sum: f64 },
    #[error("spectrogram must be normalized before stacking")]
    NotNormalizedSpectrogram,
}

/// Grid position of every lead in the stacked layout, as `(row, col)` with
/// row 0 drawn at the top:
///
/// ```text
///   I    aVR  V1  V4
///   II   aVL  V2  V5
///   III  aVF  V3  V6
/// ```
pub const STACK_GRID: [[LeadId; 4]; 3] = [
    [LeadId::I, LeadId::AVR, LeadId::V1, LeadId::V4],
    [LeadId::II, LeadId::AVL, LeadId::V2, LeadId::V5],
    [LeadId::III, LeadId::AVF, LeadId::V3, LeadId::V6],
];

/// Spectrograms of all 12 leads for one window, tiled on a 3 × 4 grid.
///
/// The underlying array keeps the spectrogram convention (array row 0 is
/// the bottom of the rendered image), so grid row 0 occupies the highest
/// array rows; each tile is stored unmodified.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSpectrogram<T> {
    spec: Spectrogram<T>,
    tile_rows: usize,
    tile_cols: usize,
    pub n: usize,
}

impl<T: Scalar> StackedSpectrogram<T> {
    pub fn as_spectrogram(&self) -> &Spectrogram<T> {
        &self.spec
    }

    pub fn tile_shape(&self) -> (usize, usize) {
        (self.tile_rows, self.tile_cols)
    }

    fn array_row0(&self, grid_row: usize) -> usize {
        (2 - grid_row) * self.tile_rows
    }

    /// Copy of the tile at `(grid_row, grid_col)`.
    pub fn tile(&self, grid_row: usize, grid_col: usize) -> Spectrogram<T> {
        let (tr, tc) = (self.tile_rows, self.tile_cols);
        let r0 = self.array_row0(grid_row);
        let c0 = grid_col * tc;
        let mut values = Vec::with_capacity(tr * tc);
        for r in 0..tr {
            values.extend_from_slice(&self.spec.row(r0 + r)[c0..c0 + tc]);
        }
        Spectrogram::from_values(tr, tc, values, self.spec.bin_hz, self.spec.frame_s, true)
            .expect("tile shape")
    }

    /// Tile belonging to `lead`.
    pub fn lead_tile(&self, lead: LeadId) -> Spectrogram<T> {
        for (r, row) in STACK_GRID.iter().enumerate() {
            if let Some(c) = row.iter().position(|&l| l == lead) {
                return self.tile(r, c);
            }
        }
        unreachable!("every lead has a grid cell")
    }
}

/// Stacks 12 normalized spectrograms (canonical lead order) into the grid.
pub fn data_fuse_leads<T: Scalar>(
    specs: [&Spectrogram<T>; N_LEADS],
    n: usize,
) -> Result<StackedSpectrogram<T>, FusionError> {
    let (tr, tc) = specs[0].shape();
    for (lead, s) in LeadId::ALL.iter().zip(specs.iter()) {
        if !s.normalized {
            return Err(FusionError::NotNormalizedSpectrogram);
        }
        if s.shape() != (tr, tc) {
            return Err(FusionError::ShapeMismatch {
                lead: *lead,
                expected: (tr, tc),
                found: s.shape(),
            });
        }
    }
    let (rows, cols) = (3 * tr, 4 * tc);
    let mut values = vec![T::zero(); rows * cols];
    for (gr, grid_row) in STACK_GRID.iter().enumerate() {
        let r0 = (2 - gr) * tr;
        for (gc, lead) in grid_row.iter().enumerate() {
            let tile = specs[lead.index()];
            for r in 0..tr {
                let dst = (r0 + r) * cols + gc * tc;
                values[dst..dst + tc].copy_from_slice(tile.row(r));
            }
        }
    }
    let spec = Spectrogram::from_values(rows, cols, values, specs[0].bin_hz, specs[0].frame_s, true)
        .expect("grid shape");
    Ok(StackedSpectrogram {
        spec,
        tile_rows: tr,
        tile_cols: tc,
        n,
    })
}

fn complete<'a, V>(map: &'a BTreeMap<LeadId, V>) -> Result<[&'a V; N_LEADS], FusionError> {
    for lead in LeadId::ALL {
        if !map.contains_key(&lead) {
            return Err(FusionError::MissingLead(lead));
        }
    }
    Ok(std::array::from_fn(|j| &map[&LeadId::ALL[j]]))
}

/// Map form of [`data_fuse_leads`].
pub fn data_fuse<T: Scalar>(
    specs: &BTreeMap<LeadId, Spectrogram<T>>,
    n: usize,
) -> Result<StackedSpectrogram<T>, FusionError> {
    data_fuse_leads(complete(specs)?, n)
}

/// Per-lead feature vectors of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadFeatureBundle<T> {
    pub n: usize,
    pub features: BTreeMap<LeadId, FeatureVector<T>>,
}

impl<T: Scalar> LeadFeatureBundle<T> {
    fn checked(&self) -> Result<([&FeatureVector<T>; N_LEADS], usize), FusionError> {
        let all = complete(&self.features)?;
        let tau = all[0].tau();
        for (lead, f) in LeadId::ALL.iter().zip(all.iter()) {
            if f.tau() != tau {
                return Err(FusionError::TauMismatch {
                    lead: *lead,
                    expected: tau,
                    found: f.tau(),
                });
            }
        }
        Ok((all, tau))
    }
}

/// Concatenation in canonical lead order; length 12·τ.
pub fn feature_concat<T: Scalar>(bundle: &LeadFeatureBundle<T>) -> Result<FeatureVector<T>, FusionError> {
    let (all, tau) = bundle.checked()?;
    let mut values = Vec::with_capacity(N_LEADS * tau);
    for f in all {
        values.extend_from_slice(&f.values);
    }
    Ok(FeatureVector {
        values,
        backend_id: all[0].backend_id.clone(),
        source: FeatureSource::Fused { n: bundle.n },
    })
}

/// Elementwise mean over the 12 leads; length τ.
pub fn feature_accumulate<T: Scalar>(bundle: &LeadFeatureBundle<T>) -> Result<FeatureVector<T>, FusionError> {
    let (all, _) = bundle.checked()?;
    let values = mean_rows(all.iter().map(|f| f.values.as_slice()));
    Ok(FeatureVector {
        values,
        backend_id: all[0].backend_id.clone(),
        source: FeatureSource::Fused { n: bundle.n },
    })
}

/// Elementwise mean of equally long rows.
pub(crate) fn mean_rows<'a, T: Scalar>(rows: impl IntoIterator<Item = &'a [T]>) -> Vec<T> {
    let mut it = rows.into_iter();
    let first = it.next().expect("at least one row");
    let mut acc = first.to_vec();
    let mut count = 1usize;
    for r in it {
        acc.iter_mut().zip(r).for_each(|(a, &v)| *a += v);
        count += 1;
    }
    let n = T::lit(count as f64);
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Per-lead predictions for one window or sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadPredictionBundle<T> {
    pub index: usize,
    pub predictions: BTreeMap<LeadId, Prediction<T>>,
}

const SIMPLEX_TOL: f64 = 1e-6;
const MEAN_TIE_TOL: f64 = 1e-12;

/// Mean of the 12 probability vectors.
pub fn decision_accumulate<T: Scalar>(bundle: &LeadPredictionBundle<T>) -> Result<Prediction<T>, FusionError> {
    let all = complete(&bundle.predictions)?;
    for (lead, p) in LeadId::ALL.iter().zip(all.iter()) {
        let sum: f64 = p.probs.iter().map(|v| v.as_f64()).sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(FusionError::NotNormalized { lead: *lead, sum });
        }
    }
    Ok(Prediction::from_probs(mean_rows(all.iter().map(|p| p.probs.as_slice()))))
}

/// Each lead votes for its argmax class; the most votes wins. Ties go to
/// the class with the higher mean probability over all 12 leads, then to
/// the lower class index.
pub fn majority_vote<T: Scalar>(bundle: &LeadPredictionBundle<T>) -> Result<usize, FusionError> {
    let all = complete(&bundle.predictions)?;
    let n_classes = all[0].probs.len();
    let mut votes = vec![0usize; n_classes];
    for p in &all {
        votes[p.label] += 1;
    }
    let mean = mean_rows(all.iter().map(|p| p.probs.as_slice()));
    // means equal up to summation order count as tied
    let tol = T::lit(MEAN_TIE_TOL);
    let mut best = 0;
    for c in 1..n_classes {
        if votes[c] > votes[best] || (votes[c] == votes[best] && mean[c] > mean[best] + tol) {
            best = c;
        }
    }
    Ok(best)
}

/// Vote share per class; used as the ranking score under majority voting.
pub fn vote_shares<T: Scalar>(bundle: &LeadPredictionBundle<T>) -> Result<Vec<T>, FusionError> {
    let all = complete(&bundle.predictions)?;
    let mut shares = vec![T::zero(); all[0].probs.len()];
    let w = T::lit(1.0 / N_LEADS as f64);
    for p in &all {
        shares[p.label] += w;
    }
    Ok(shares)
}

/// Which representation the encoder must produce for a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionInput {
    PerLead,
    Stacked,
}

impl FusionInput {
    pub fn name(self) -> &'static str {
        match self {
            FusionInput::PerLead => "per-lead",
            FusionInput::Stacked => "stacked",
        }
    }

    pub fn n_leads(self) -> usize {
        match self {
            FusionInput::PerLead => N_LEADS,
            FusionInput::Stacked => 1,
        }
    }
}

impl FromStr for FusionInput {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").to_ascii_lowercase().as_str() {
            "per-lead" => Ok(FusionInput::PerLead),
            "stacked" => Ok(FusionInput::Stacked),
            other => Err(format!("unknown fusion input `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    /// Stacked spectrogram encoded as one image.
    Data,
    FeatureConcat,
    FeatureAccum,
    /// One model per lead, probabilities averaged.
    DecisionAccum,
    /// One model per lead, majority vote over argmax labels.
    DecisionVote,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 5] = [
        FusionStrategy::Data,
        FusionStrategy::FeatureConcat,
        FusionStrategy::FeatureAccum,
        FusionStrategy::DecisionAccum,
        FusionStrategy::DecisionVote,
    ];

    pub fn input(self) -> FusionInput {
        match self {
            FusionStrategy::Data => FusionInput::Stacked,
            _ => FusionInput::PerLead,
        }
    }

    pub fn is_decision(self) -> bool {
        matches!(self, FusionStrategy::DecisionAccum | FusionStrategy::DecisionVote)
    }

    /// Model input width given the encoder's τ.
    pub fn input_dim(self, tau: usize) -> usize {
        match self {
            FusionStrategy::FeatureConcat => N_LEADS * tau,
            _ => tau,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FusionStrategy::Data => "data",
            FusionStrategy::FeatureConcat => "feature_concat",
            FusionStrategy::FeatureAccum => "feature_accum",
            FusionStrategy::DecisionAccum => "decision_accum",
            FusionStrategy::DecisionVote => "decision_vote",
        }
    }

    /// Human-readable label as used in comparison tables.
    pub fn title(self) -> &'static str {
        match self {
            FusionStrategy::Data => "Data",
            FusionStrategy::FeatureConcat => "Concatenation-Feature",
            FusionStrategy::FeatureAccum => "Accumulation-Feature",
            FusionStrategy::DecisionAccum => "Accumulation-Decision",
            FusionStrategy::DecisionVote => "Majority-Vote-Decision",
        }
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_").to_ascii_lowercase();
        FusionStrategy::ALL
            .iter()
            .copied()
            .find(|f| f.name() == norm)
            .ok_or_else(|| format!("unknown fusion strategy `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::Spectrogram;

    fn tile(seed: usize, rows: usize, cols: usize) -> Spectrogram<f64> {
        let v = (0..rows * cols).map(|i| (seed * 1000 + i) as f64 * 0.001).collect();
        Spectrogram::from_values(rows, cols, v, 10.0, 0.01, true).unwrap()
    }

    fn tiles() -> BTreeMap<LeadId, Spectrogram<f64>> {
        LeadId::ALL.iter().map(|&l| (l, tile(l.index(), 26, 91))).collect()
    }

    fn fv(values: Vec<f64>) -> FeatureVector<f64> {
        FeatureVector {
            values,
            backend_id: "t".into(),
            source: FeatureSource::Fused { n: 0 },
        }
    }

    fn pred(p: &[f64]) -> Prediction<f64> {
        Prediction::from_probs(p.to_vec())
    }

    #[test]
    fn stacked_shape_and_tiles() {
        let t = tiles();
        let s = data_fuse(&t, 3).unwrap();
        assert_eq!(s.as_spectrogram().shape(), (78, 364));
        assert_eq!(s.n, 3);
        assert_eq!(s.tile(0, 1), t[&LeadId::AVR]);
        for lead in LeadId::ALL {
            assert_eq!(s.lead_tile(lead), t[&lead]);
        }
        // grid row 0 sits in the top band of the rendered image
        assert_eq!(s.as_spectrogram().get(52, 0), t[&LeadId::I].get(0, 0));
    }

    #[test]
    fn stacking_errors() {
        let mut t = tiles();
        t.remove(&LeadId::V5);
        assert_eq!(data_fuse(&t, 0).unwrap_err(), FusionError::MissingLead(LeadId::V5));
        let mut t = tiles();
        t.insert(LeadId::II, tile(1, 26, 90));
        assert!(matches!(data_fuse(&t, 0), Err(FusionError::ShapeMismatch { lead: LeadId::II, .. })));
    }

    #[test]
    fn concat_lengths() {
        for tau in [1056usize, 2048] {
            let b = LeadFeatureBundle {
                n: 0,
                features: LeadId::ALL.iter().map(|&l| (l, fv(vec![0.0; tau]))).collect(),
            };
            let c = feature_concat(&b).unwrap();
            assert_eq!(c.tau(), 12 * tau);
            assert!(c.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn accumulate_identical_and_cancelling() {
        let v = vec![0.5, -1.25, 3.0];
        let b = LeadFeatureBundle {
            n: 0,
            features: LeadId::ALL.iter().map(|&l| (l, fv(v.clone()))).collect(),
        };
        assert_eq!(feature_accumulate(&b).unwrap().values, v);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let b = LeadFeatureBundle {
            n: 0,
            features: LeadId::ALL
                .iter()
                .map(|&l| (l, fv(if l.index() % 2 == 0 { v.clone() } else { neg.clone() })))
                .collect(),
        };
        assert!(feature_accumulate(&b).unwrap().values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tau_mismatch() {
        let mut features: BTreeMap<_, _> = LeadId::ALL.iter().map(|&l| (l, fv(vec![0.0; 4]))).collect();
        features.insert(LeadId::V2, fv(vec![0.0; 5]));
        let b = LeadFeatureBundle { n: 0, features };
        assert!(matches!(feature_concat(&b), Err(FusionError::TauMismatch { lead: LeadId::V2, .. })));
        assert!(matches!(feature_accumulate(&b), Err(FusionError::TauMismatch { .. })));
    }

    #[test]
    fn decision_mean_of_uniform_and_one_hot() {
        let predictions = LeadId::ALL
            .iter()
            .map(|&l| {
                let p = if l.index() < 6 { pred(&[0.25; 4]) } else { pred(&[0.0, 0.0, 1.0, 0.0]) };
                (l, p)
            })
            .collect();
        let b = LeadPredictionBundle { index: 0, predictions };
        let m = decision_accumulate(&b).unwrap();
        // hand arithmetic: (6·0.25 + 6·1)/12 = 0.625, (6·0.25)/12 = 0.125
        let expect = [0.125, 0.125, 0.625, 0.125];
        for (a, e) in m.probs.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
        assert_eq!(m.label, 2);
    }

    #[test]
    fn decision_rejects_unnormalized() {
        let predictions = LeadId::ALL
            .iter()
            .map(|&l| (l, if l == LeadId::III { pred(&[0.5, 0.6]) } else { pred(&[0.5, 0.5]) }))
            .collect();
        let b = LeadPredictionBundle { index: 0, predictions };
        assert!(matches!(decision_accumulate(&b), Err(FusionError::NotNormalized { lead: LeadId::III, .. })));
    }

    #[test]
    fn majority_vote_cases() {
        let bundle = |f: &dyn Fn(usize) -> Vec<f64>| LeadPredictionBundle {
            index: 0,
            predictions: LeadId::ALL.iter().map(|&l| (l, pred(&f(l.index())))).collect(),
        };
        // 7 acute, 5 old
        let b = bundle(&|j| if j < 7 { vec![0.7, 0.1, 0.1, 0.1] } else { vec![0.1, 0.1, 0.1, 0.7] });
        assert_eq!(majority_vote(&b).unwrap(), 0);
        // 6 acute leads at 0.6, 6 old leads at 0.8: tie goes to old
        let b = bundle(&|j| if j < 6 { vec![0.6, 0.0, 0.0, 0.4] } else { vec![0.2, 0.0, 0.0, 0.8] });
        assert_eq!(majority_vote(&b).unwrap(), 3);
        // unanimous normal
        let b = bundle(&|_| vec![0.1, 0.1, 0.6, 0.2]);
        assert_eq!(majority_vote(&b).unwrap(), 2);
        // full tie on votes and mean: lowest index
        let b = bundle(&|j| if j < 6 { vec![0.9, 0.1] } else { vec![0.1, 0.9] });
        assert_eq!(majority_vote(&b).unwrap(), 0);
    }

    #[test]
    fn strategy_names() {
        for s in FusionStrategy::ALL {
            assert_eq!(s.name().parse::<FusionStrategy>().unwrap(), s);
        }
        assert_eq!("feature-concat".parse::<FusionStrategy>().unwrap(), FusionStrategy::FeatureConcat);
        assert_eq!(FusionStrategy::FeatureConcat.input_dim(64), 768);
        assert_eq!(FusionStrategy::Data.input(), FusionInput::Stacked);
    }
}
