use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;

/// Largest-remainder apportionment of `total` seats by `weights`; ties in
/// the remainder go to the lower index.
pub fn apportion(total: usize, weights: &[usize]) -> Vec<usize> {
    let w: usize = weights.iter().sum();
    if w == 0 {
        return vec![0; weights.len()];
    }
    let mut seats: Vec<usize> = weights.iter().map(|&x| x * total / w).collect();
    let mut rem: Vec<(usize, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &x)| (x * total % w, i))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let left = total - seats.iter().sum::<usize>();
    for &(_, i) in rem.iter().take(left) {
        seats[i] += 1;
    }
    seats
}

/// Splits the sample indices into batches whose class composition follows
/// the class proportions of the samples still undrawn (largest
/// remainder). Each class is shuffled with `seed` first. Every index
/// appears exactly once; the last batch may be short.
pub fn balanced_batches(
    labels: &[usize],
    n_classes: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::EmptyTrainingSet);
    }
    if batch_size < n_classes {
        return Err(EvalError::BatchTooSmall {
            batch: batch_size,
            classes: n_classes,
        });
    }
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        if c >= n_classes {
            return Err(EvalError::ConfigInvalid(format!("class index {c} ≥ {n_classes}")));
        }
        queues[c].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for q in &mut queues {
        q.shuffle(&mut rng);
    }
    let mut pos = vec![0usize; n_classes];
    let mut remaining = labels.len();
    let mut out = Vec::with_capacity(remaining.div_ceil(batch_size));
    while remaining > 0 {
        let left: Vec<usize> = (0..n_classes).map(|c| queues[c].len() - pos[c]).collect();
        let size = batch_size.min(remaining);
        let quota = apportion(size, &left);
        let mut batch = Vec::with_capacity(size);
        for c in 0..n_classes {
            batch.extend_from_slice(&queues[c][pos[c]..pos[c] + quota[c]]);
            pos[c] += quota[c];
        }
        remaining -= size;
        out.push(batch);
    }
    Ok(out)
}
