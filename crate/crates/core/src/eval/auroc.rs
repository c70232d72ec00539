use std::cmp::Ordering;

use super::EvalError;

fn check(scores: &[f64], labels: &[bool]) -> Result<(u64, u64), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::DegenerateLabels);
    }
    Ok((n_pos, n_neg))
}

/// Mann-Whitney AUROC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. O(n log n) via midranks.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // twice the rank sum of the positives, 1-based midranks
    let mut rank2_sum: u64 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let mid2 = (i + 1 + j) as u64;
        let pos = idx[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        rank2_sum += pos * mid2;
        i = j;
    }
    let u2 = rank2_sum - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg) as f64)
}

/// Brute-force pair counting; O(n²).
pub fn auroc_pairwise(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let mut wins2 = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            if scores[i] > scores[j] {
                wins2 += 2;
            } else if scores[i] == scores[j] {
                wins2 += 1;
            }
        }
    }
    Ok(wins2 as f64 / (2 * n_pos * n_neg) as f64)
}

/// Per-class one-vs-all AUROC from probability rows; `None` where the
/// class is absent or universal in `truth`.
pub fn one_vs_all_auroc(probs: &[Vec<f64>], truth: &[usize], n_classes: usize) -> Vec<Option<f64>> {
    (0..n_classes)
        .map(|c| {
            let s: Vec<f64> = probs.iter().map(|p| p[c]).collect();
            let l: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            auroc(&s, &l).ok()
        })
        .collect()
}

/// Mean of the defined one-vs-all AUROCs.
pub fn macro_auroc(per_class: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = per_class.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_tied() {
        let l = [false, false, true, true, true];
        assert_eq!(auroc(&[0.1, 0.2, 0.5, 0.6, 0.9], &l).unwrap(), 1.0);
        assert_eq!(auroc(&[0.4; 5], &l).unwrap(), 0.5);
        assert_eq!(auroc(&[0.9, 0.8, 0.1, 0.2, 0.3], &l).unwrap(), 0.0);
    }

    #[test]
    fn degenerate() {
        assert_eq!(auroc(&[0.1, 0.2], &[true, true]), Err(EvalError::DegenerateLabels));
        assert_eq!(auroc(&[0.1], &[true, false]), Err(EvalError::LengthMismatch(1, 2)));
    }

    #[test]
    fn matches_pairwise_with_ties() {
        let s = [0.3, 0.3, 0.1, 0.7, 0.3, 0.7, 0.2];
        let l = [true, false, false, true, true, false, false];
        assert_eq!(auroc(&s, &l).unwrap(), auroc_pairwise(&s, &l).unwrap());
    }

    #[test]
    fn macro_mean() {
        assert_eq!(macro_auroc(&[Some(1.0), None, Some(0.5)]), Some(0.75));
        assert_eq!(macro_auroc(&[None]), None);
    }
}
