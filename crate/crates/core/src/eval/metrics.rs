use serde::{Deserialize, Serialize};

use super::{macro_auroc, one_vs_all_auroc, EvalError};

/// Threshold metrics from hard labels. Two classes: class 0 is the
/// positive class. More classes: one-vs-rest values macro-averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    /// rows = truth, columns = prediction
    pub confusion_matrix: Vec<Vec<u64>>,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn classification_metrics(
    preds: &[usize],
    truth: &[usize],
    n_classes: usize,
) -> Result<ClassificationMetrics, EvalError> {
    if preds.len() != truth.len() {
        return Err(EvalError::LengthMismatch(preds.len(), truth.len()));
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &t) in preds.iter().zip(truth) {
        if p >= n_classes || t >= n_classes {
            return Err(EvalError::ConfigInvalid(format!("class index out of range for {n_classes} classes")));
        }
        cm[t][p] += 1;
    }
    let total = preds.len() as u64;
    let correct: u64 = (0..n_classes).map(|c| cm[c][c]).sum();
    let mut zero = false;
    let per_class = |c: usize, zero: &mut bool| {
        let tp = cm[c][c];
        let fp: u64 = (0..n_classes).filter(|&r| r != c).map(|r| cm[r][c]).sum();
        let fn_: u64 = (0..n_classes).filter(|&k| k != c).map(|k| cm[c][k]).sum();
        let tn = total - tp - fp - fn_;
        let pre = ratio(tp, tp + fp, zero);
        let sen = ratio(tp, tp + fn_, zero);
        let spe = ratio(tn, tn + fp, zero);
        let f1 = if pre + sen == 0.0 {
            *zero = true;
            0.0
        } else {
            2.0 * pre * sen / (pre + sen)
        };
        [pre, sen, spe, f1]
    };
    let [precision, sensitivity, specificity, f1] = if n_classes == 2 {
        per_class(0, &mut zero)
    } else {
        let mut acc = [0.0; 4];
        for c in 0..n_classes {
            let v = per_class(c, &mut zero);
            for k in 0..4 {
                acc[k] += v[k];
            }
        }
        acc.map(|v| v / n_classes as f64)
    };
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / total as f64,
        precision,
        sensitivity,
        specificity,
        f1,
        confusion_matrix: cm,
        zero_division: zero,
    })
}

/// AUROC plus threshold metrics over a set of record predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    /// `null` where a class has no positives or no negatives.
    pub auroc_per_class: Vec<Option<f64>>,
    pub auroc_macro: Option<f64>,
    pub accuracy: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub confusion_matrix: Vec<Vec<u64>>,
    pub zero_division: bool,
}

impl AggregateMetrics {
    pub fn compute(
        probs: &[Vec<f64>],
        preds: &[usize],
        truth: &[usize],
        n_classes: usize,
    ) -> Result<Self, EvalError> {
        let cls = classification_metrics(preds, truth, n_classes)?;
        let per = one_vs_all_auroc(probs, truth, n_classes);
        Ok(Self {
            auroc_macro: macro_auroc(&per),
            auroc_per_class: per,
            accuracy: cls.accuracy,
            precision: cls.precision,
            sensitivity: cls.sensitivity,
            specificity: cls.specificity,
            f1: cls.f1,
            confusion_matrix: cls.confusion_matrix,
            zero_division: cls.zero_division,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Epochs trained, per model in the fold.
    pub epochs: Vec<usize>,
    #[serde(flatten)]
    pub metrics: AggregateMetrics,
}

/// Confusion matrices of both decision-fusion rules on the same per-lead
/// predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionComparison {
    pub accumulation: Vec<Vec<u64>>,
    pub vote: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub class_names: Vec<String>,
    pub per_fold: Vec<FoldMetrics>,
    /// Pooled out-of-fold predictions.
    pub aggregate: AggregateMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_comparison: Option<DecisionComparison>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}
