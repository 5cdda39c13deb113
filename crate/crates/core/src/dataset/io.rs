use std::path::Path;

use ndarray::Array2;

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Raw contents of a feature CSV before label encoding.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    /// `rows × feature_names.len()`; may have zero rows.
    pub features: Array2<f64>,
    /// Present when the label column exists in the header.
    pub labels: Option<Vec<String>>,
}

/// Reads a comma-separated file with a header row. Every column except
/// `label_column` is parsed as `f64`; the label column is optional here.
pub fn read_table(path: impl AsRef<Path>, label_column: &str) -> Result<FeatureTable> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_pos = headers.iter().position(|h| h == label_column);
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != label_pos)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut labels = label_pos.map(|_| Vec::new());
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (i, cell) in record.iter().enumerate() {
            if Some(i) == label_pos {
                if let Some(l) = labels.as_mut() {
                    l.push(cell.trim().to_owned());
                }
                continue;
            }
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: headers[i].clone(),
                value: cell.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: headers[i].clone(),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    let features = Array2::from_shape_vec((rows, feature_names.len()), values)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok(FeatureTable {
        feature_names,
        features,
        labels,
    })
}

/// Loads a labeled dataset, encoding labels densely in first-appearance
/// order.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset> {
    read_table(path, label_column)?.into_labeled(label_column)
}

impl FeatureTable {
    /// Encodes labels as integers in order of first appearance; the names
    /// are kept on the dataset.
    pub fn into_labeled(self, label_column: &str) -> Result<LabeledDataset> {
        let Some(raw_labels) = self.labels else {
            let mut available = self.feature_names;
            available.sort();
            return Err(Error::UnknownColumn {
                column: label_column.to_owned(),
                available,
            });
        };
        if raw_labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut names: Vec<String> = Vec::new();
        let labels = raw_labels
            .into_iter()
            .map(|name| match names.iter().position(|n| *n == name) {
                Some(i) => i,
                None => {
                    names.push(name);
                    names.len() - 1
                }
            })
            .collect();
        let n_classes = names.len();
        LabeledDataset::with_classes(self.features, labels, n_classes, Some(names))
    }
}
