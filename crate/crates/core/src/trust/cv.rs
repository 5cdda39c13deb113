use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_trust_model, FilteringStrategy};
use crate::dataset::{stratified_folds, LabeledDataset};
use crate::error::{Error, Result};
use crate::eval::{precision_curve, scored_examples, Mode, LEVELS};
use crate::models::ClassifierOutput;

/// Supplies held-out predictions: trains on `train`, predicts `eval` rows.
pub trait PredictionProvider: Sync {
    fn predict(
        &self,
        train: &LabeledDataset,
        eval: ArrayView2<'_, f64>,
    ) -> Result<Vec<ClassifierOutput>>;
}

impl<F> PredictionProvider for F
where
    F: Fn(&LabeledDataset, ArrayView2<'_, f64>) -> Result<Vec<ClassifierOutput>> + Sync,
{
    fn predict(
        &self,
        train: &LabeledDataset,
        eval: ArrayView2<'_, f64>,
    ) -> Result<Vec<ClassifierOutput>> {
        self(train, eval)
    }
}

/// `{0} ∪ {2^-i : i = 1..=10}`, ascending.
pub fn default_alpha_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (1..=10).rev().map(|i| 0.5f64.powi(i)).collect();
    grid.insert(0, 0.0);
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub alpha: f64,
    /// Mean over used folds of the suspicious-mode precision at the
    /// accuracy percentile.
    pub mean_metric: f64,
    pub fold_metrics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<f64>,
    pub k: usize,
    pub folds: usize,
    pub seed: u64,
    pub chosen_alpha: f64,
    pub rows: Vec<CvRow>,
    /// Folds that contributed, ascending.
    pub used_folds: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Percentile at which a classifier with this accuracy is read off. Capped
/// at the last level, where a perfect classifier has no positives and so
/// scores 0.
pub(crate) fn accuracy_percentile(accuracy: f64) -> usize {
    ((100.0 * accuracy).round() as usize).min(LEVELS - 1)
}

/// Picks α by stratified k-fold cross-validation. The metric is the
/// suspicious-mode precision of the trust score at the percentile matching
/// the fold's classifier accuracy; ties go to the smaller α.
pub fn cross_validate_alpha(
    train: &LabeledDataset,
    provider: &dyn PredictionProvider,
    grid: &[f64],
    k: usize,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty"));
    }
    if let Some(&bad) = grid.iter().find(|a| !(0.0..1.0).contains(*a)) {
        return Err(Error::invalid("grid", format!("alpha {bad} is not in [0, 1)")));
    }
    let fold_rows = stratified_folds(train, folds, seed)?;

    let per_fold: Vec<Result<Option<Vec<f64>>>> = fold_rows
        .par_iter()
        .map(|held_out| {
            let mut in_fold = vec![false; train.len()];
            for &i in held_out {
                in_fold[i] = true;
            }
            let rest: Vec<usize> = (0..train.len()).filter(|&i| !in_fold[i]).collect();
            if held_out.is_empty() {
                return Ok(None);
            }
            let fold_train = match train.subset(&rest) {
                Ok(ds) => ds,
                Err(Error::EmptyClass { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let eval_x = train.features().select(Axis(0), held_out);
            let preds = provider.predict(&fold_train, eval_x.view())?;
            if preds.len() != held_out.len() {
                return Err(Error::RowCountMismatch {
                    expected: held_out.len(),
                    found: preds.len(),
                });
            }
            let correct: Vec<bool> = preds
                .iter()
                .zip(held_out)
                .map(|(p, &i)| p.predicted == train.labels()[i])
                .collect();
            let accuracy = correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64;
            let level = accuracy_percentile(accuracy);
            grid.iter()
                .map(|&alpha| {
                    let model = fit_trust_model(&fold_train, alpha, k, FilteringStrategy::Density)?;
                    let scores = eval_x
                        .outer_iter()
                        .zip(&preds)
                        .map(|(x, p)| {
                            model
                                .trust_score(x.as_slice().expect("contiguous row"), p.predicted)
                                .map(|s| s.value)
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    let curve =
                        precision_curve("trust_score", &scored_examples(&scores, &correct)?, Mode::Suspicious)?;
                    Ok(curve.precisions[level])
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some)
        })
        .collect();

    let mut used_folds = Vec::new();
    let mut warnings = Vec::new();
    let mut metrics: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    for (fold, result) in per_fold.into_iter().enumerate() {
        match result? {
            Some(values) => {
                used_folds.push(fold);
                for (row, v) in metrics.iter_mut().zip(values) {
                    row.push(v);
                }
            }
            None => warnings.push(format!(
                "fold {fold} skipped: a class is missing from its training part"
            )),
        }
    }
    if used_folds.is_empty() {
        return Err(Error::NoUsableFolds);
    }
    let rows: Vec<CvRow> = grid
        .iter()
        .zip(metrics)
        .map(|(&alpha, fold_metrics)| CvRow {
            alpha,
            mean_metric: fold_metrics.iter().sum::<f64>() / fold_metrics.len() as f64,
            fold_metrics,
        })
        .collect();
    let best = rows
        .iter()
        .fold(None::<&CvRow>, |best, row| match best {
            Some(b)
                if b.mean_metric > row.mean_metric
                    || (b.mean_metric == row.mean_metric && b.alpha <= row.alpha) =>
            {
                Some(b)
            }
            _ => Some(row),
        })
        .expect("grid is nonempty");
    Ok(CvReport {
        grid: grid.to_vec(),
        k,
        folds,
        seed,
        chosen_alpha: best.alpha,
        rows,
        used_folds,
        warnings,
    })
}
