//! Labeled datasets and the linear preprocessing applied before any
//! distance computation.
//!
//! Labels are dense integers `0..L`; string names read from CSV are kept as
//! a presentation-layer mapping in [`LabeledDataset::label_names`].

mod io;
mod pca;
mod split;

pub use io::{load_csv, read_table, FeatureTable};
pub use pca::{fit_pca, PcaTransform};
pub use split::{stratified_folds, stratified_split};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix plus dense integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    label_names: Option<Vec<String>>,
}

impl LabeledDataset {
    /// Builds a dataset whose class count is inferred as `max(label) + 1`.
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        Self::with_classes(features, labels, n_classes, None)
    }

    /// Builds a dataset with an explicit class count and optional names.
    ///
    /// Every class in `0..n_classes` must have at least one sample.
    pub fn with_classes(
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        label_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, dim) = features.dim();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 {
            return Err(Error::invalid("features", "at least one feature column is required"));
        }
        if labels.len() != n {
            return Err(Error::RowCountMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        if let Some(names) = &label_names {
            if names.len() != n_classes {
                return Err(Error::ShapeMismatch(format!(
                    "{} label names for {} classes",
                    names.len(),
                    n_classes
                )));
            }
        }
        for (row, values) in features.outer_iter().enumerate() {
            if let Some(col) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row,
                    column: format!("#{col}"),
                });
            }
        }
        let mut counts = vec![0usize; n_classes];
        for &label in &labels {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange { label, n_classes });
            }
            counts[label] += 1;
        }
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass { class });
        }
        Ok(Self {
            features,
            labels,
            n_classes,
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    /// Display name of a class: its CSV label when known, else the index.
    pub fn label_name(&self, label: usize) -> String {
        match &self.label_names {
            Some(names) => names[label].clone(),
            None => label.to_string(),
        }
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices belonging to `label`, ascending.
    pub fn class_indices(&self, label: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Feature rows of one class, in dataset order.
    pub fn class_points(&self, label: usize) -> Array2<f64> {
        self.features.select(Axis(0), &self.class_indices(label))
    }

    /// Sub-dataset over `indices`, keeping the class count and names.
    /// Fails when a class ends up without samples.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::with_classes(features, labels, self.n_classes, self.label_names.clone())
    }

    /// Same labels, new feature matrix (e.g. after a projection).
    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        Self::with_classes(
            features,
            self.labels.clone(),
            self.n_classes,
            self.label_names.clone(),
        )
    }
}

/// Per-feature affine map produced by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero for constant columns.
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: features.ncols(),
            });
        }
        let mut out = features.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| if s > 0.0 { (v - m) / s } else { 0.0 });
        }
        Ok(out)
    }
}

/// Centers each feature and scales it to unit population standard
/// deviation. Constant features map to zero.
pub fn standardize(ds: &LabeledDataset) -> Result<(LabeledDataset, Scaler)> {
    if ds.len() < 2 {
        return Err(Error::invalid("dataset", "standardization needs at least 2 rows"));
    }
    let x = ds.features();
    let n = x.nrows() as f64;
    let mean: Array1<f64> = x.sum_axis(Axis(0)) / n;
    let std: Vec<f64> = x
        .axis_iter(Axis(1))
        .zip(mean.iter())
        .map(|(col, &m)| {
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            // rounding leaves a residue on constant columns
            let s = var.sqrt();
            if s <= 1e-12 * (1.0 + m.abs()) {
                0.0
            } else {
                s
            }
        })
        .collect();
    let scaler = Scaler {
        mean: mean.to_vec(),
        std,
    };
    let out = ds.with_features(scaler.apply(x)?)?;
    Ok((out, scaler))
}
