use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// Record-level fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// record id → fold index
    pub folds: BTreeMap<String, usize>,
    /// record id → class index used for stratification
    pub labels: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, record_id: &str) -> Option<usize> {
        self.folds.get(record_id).copied()
    }

    pub fn test_ids(&self, fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn train_ids(&self, fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// `counts[fold][class]`
    pub fn class_counts(&self, n_classes: usize) -> Vec<Vec<usize>> {
        let mut c = vec![vec![0; n_classes]; self.k];
        for (id, &f) in &self.folds {
            c[f][self.labels[id]] += 1;
        }
        c
    }
}

/// Shuffles each class (seeded) and deals its records round-robin over
/// the folds. The dealing position carries over from one class to the
/// next so fold sizes also stay within one of each other.
pub fn stratified_kfold(
    labels: &BTreeMap<String, usize>,
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    let mut by_class: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
    for (id, &c) in labels {
        by_class.entry(c).or_default().push(id);
    }
    for (&class, ids) in &by_class {
        if ids.len() < k {
            return Err(EvalError::ClassTooSmall {
                class,
                count: ids.len(),
                k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = BTreeMap::new();
    let mut next = 0usize;
    for ids in by_class.values_mut() {
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            folds.insert((*id).clone(), next);
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment {
        k,
        folds,
        labels: labels.clone(),
    })
}
