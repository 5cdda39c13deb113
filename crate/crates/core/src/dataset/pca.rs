use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Projection onto the leading principal directions of a training set.
///
/// Covariance uses the population convention (divide by `n`). Each
/// component's largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub mean: Array1<f64>,
    /// `m × D`, orthonormal rows.
    pub components: Array2<f64>,
    /// Nonincreasing, nonnegative.
    pub explained_variance: Array1<f64>,
}

pub fn fit_pca(ds: &LabeledDataset, dims: usize) -> Result<PcaTransform> {
    let x = ds.features();
    let (n, d) = x.dim();
    if dims == 0 || dims > n.min(d) {
        return Err(Error::invalid(
            "dims",
            format!("{dims} not in [1, {}]", n.min(d)),
        ));
    }
    let mean = x.sum_axis(Axis(0)) / n as f64;
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / n as f64;
    let cov = DMatrix::from_fn(d, d, |i, j| 0.5 * (cov[[i, j]] + cov[[j, i]]));
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut components = Array2::zeros((dims, d));
    let mut explained = Array1::zeros(dims);
    for (row, &col) in order.iter().take(dims).enumerate() {
        let v = eig.eigenvectors.column(col);
        let pivot = (0..d).fold(0, |best, j| {
            if v[j].abs() > v[best].abs() {
                j
            } else {
                best
            }
        });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components[[row, j]] = sign * v[j];
        }
        explained[row] = eig.eigenvalues[col].max(0.0);
    }
    Ok(PcaTransform {
        mean,
        components,
        explained_variance: explained,
    })
}

impl PcaTransform {
    pub fn input_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: features.ncols(),
            });
        }
        Ok((&features - &self.mean).dot(&self.components.t()))
    }

    /// Maps projected rows back to the input space.
    pub fn inverse_transform(&self, projected: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if projected.ncols() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                found: projected.ncols(),
            });
        }
        Ok(projected.dot(&self.components) + &self.mean)
    }

    pub fn apply(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        ds.with_features(self.transform(ds.features())?)
    }
}
