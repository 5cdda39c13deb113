use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Splits each class independently, sending `round(eval_fraction · n_ℓ)`
/// rows (clamped to `[1, n_ℓ − 1]`) to the evaluation side.
///
/// Rows keep their original relative order on both sides.
pub fn stratified_split(
    ds: &LabeledDataset,
    eval_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::invalid(
            "eval_fraction",
            format!("{eval_fraction} is not in (0, 1)"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(ds.len());
    let mut eval = Vec::new();
    for class in 0..ds.n_classes() {
        let mut idx = ds.class_indices(class);
        let n = idx.len();
        if n < 2 {
            return Err(Error::TooFewSamples {
                class,
                count: n,
                required: 2,
            });
        }
        idx.shuffle(&mut rng);
        let n_eval = ((eval_fraction * n as f64).round() as usize).clamp(1, n - 1);
        eval.extend_from_slice(&idx[..n_eval]);
        train.extend_from_slice(&idx[n_eval..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    Ok((ds.subset(&train)?, ds.subset(&eval)?))
}

/// Assigns every row to one of `folds` folds, balancing each class across
/// folds. Returns the row indices of each fold, ascending.
pub fn stratified_folds(ds: &LabeledDataset, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("folds", format!("{folds} < 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for class in 0..ds.n_classes() {
        let mut idx = ds.class_indices(class);
        idx.shuffle(&mut rng);
        for i in idx {
            out[next].push(i);
            next = (next + 1) % folds;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}
