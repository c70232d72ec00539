use ecgfuse_core::eval::{auroc, auroc_pairwise, stratified_kfold};
use ecgfuse_core::fusion::{majority_vote, LeadPredictionBundle};
use ecgfuse_core::ingest::{read_csv, read_wfdb, write_csv, write_wfdb, DiagnosisLabel, RecordLabel};
use ecgfuse_core::{EcgRecord, LeadId, Prediction};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn record(values: Vec<f64>, n: usize, label: Option<RecordLabel>) -> EcgRecord {
    let leads: [Vec<f64>; 12] = std::array::from_fn(|j| values[j * n..(j + 1) * n].to_vec());
    EcgRecord::new("prop", 500, leads, label).unwrap()
}

fn label_strategy() -> impl Strategy<Value = Option<RecordLabel>> {
    prop_oneof![
        Just(None),
        (0usize..4).prop_map(|i| Some(RecordLabel::Onset(DiagnosisLabel::ALL[i]))),
    ]
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..10, n).prop_map(|v| v.into_iter().map(|x| x as f64 * 0.1).collect()),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

fn both_classes(labels: &[bool]) -> bool {
    labels.iter().any(|&l| l) && labels.iter().any(|&l| !l)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        n in 1usize..40,
        seed_values in prop::collection::vec(-1e3f64..1e3, 12 * 40),
        label in label_strategy(),
    ) {
        let values: Vec<f64> = seed_values[..12 * n].iter().map(|v| v / 7.0).collect();
        let rec = record(values, n, label);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop.csv");
        write_csv(&rec, &path).unwrap();
        let back = read_csv(&path).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn wfdb_round_trip_within_quantization(
        values in prop::collection::vec(-5.0f64..5.0, 12 * 30),
    ) {
        let rec = record(values, 30, None);
        let dir = tempfile::tempdir().unwrap();
        write_wfdb(&rec, dir.path(), 200.0).unwrap();
        let back = read_wfdb(&dir.path().join("prop.hea")).unwrap();
        for lead in LeadId::ALL {
            for (a, b) in back.lead(lead).iter().zip(rec.lead(lead)) {
                prop_assert!((a - b).abs() <= 0.5 / 200.0 + 1e-12);
            }
        }
    }

    #[test]
    fn auroc_matches_pairwise((scores, labels) in scored()) {
        prop_assume!(both_classes(&labels));
        prop_assert_eq!(auroc(&scores, &labels).unwrap(), auroc_pairwise(&scores, &labels).unwrap());
    }

    #[test]
    fn auroc_flip_symmetry((scores, labels) in scored()) {
        prop_assume!(both_classes(&labels));
        let a = auroc(&scores, &labels).unwrap();
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let b = auroc(&scores, &flipped).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auroc(&negated, &labels).unwrap() - b).abs() < 1e-12);
    }

    #[test]
    fn auroc_monotone_invariance((scores, labels) in scored()) {
        prop_assume!(both_classes(&labels));
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 2.0).collect();
        prop_assert_eq!(auroc(&scores, &labels).unwrap(), auroc(&warped, &labels).unwrap());
    }

    #[test]
    fn stratified_folds_partition(
        counts in prop::collection::vec(4usize..15, 2..5),
        k in 2usize..5,
        seed in any::<u64>(),
    ) {
        let mut labels = BTreeMap::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                labels.insert(format!("r{c}_{i:02}"), c);
            }
        }
        let a = stratified_kfold(&labels, k, seed).unwrap();
        let mut seen = 0;
        for f in 0..k {
            seen += a.test_ids(f).len();
            for (c, &n) in counts.iter().enumerate() {
                let in_fold = a.test_ids(f).iter().filter(|id| labels[**id] == c).count();
                prop_assert!(in_fold == n / k || in_fold == n / k + 1);
            }
        }
        prop_assert_eq!(seen, labels.len());
    }

    #[test]
    fn majority_vote_argmax_invariance(
        raw in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), 12),
        power in 1.5f64..4.0,
    ) {
        let norm = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let bundle = |rows: Vec<Vec<f64>>| LeadPredictionBundle {
            index: 0,
            predictions: LeadId::ALL
                .iter()
                .zip(rows)
                .map(|(&l, r)| (l, Prediction::from_probs(r)))
                .collect(),
        };
        let probs: Vec<Vec<f64>> = raw.iter().map(|r| norm(r)).collect();
        let mut votes = [0usize; 4];
        for p in &probs {
            votes[Prediction::from_probs(p.clone()).label] += 1;
        }
        let top = *votes.iter().max().unwrap();
        prop_assume!(votes.iter().filter(|&&v| v == top).count() == 1);
        let sharpened: Vec<Vec<f64>> = probs
            .iter()
            .map(|p| norm(&p.iter().map(|x| x.powf(power)).collect::<Vec<_>>()))
            .collect();
        prop_assert_eq!(
            majority_vote(&bundle(probs)).unwrap(),
            majority_vote(&bundle(sharpened)).unwrap()
        );
    }
}
