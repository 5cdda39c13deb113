//! Reference classifiers that produce `(prediction, confidence)` pairs, and
//! ingestion of predictions made by external models.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::neighbor::NeighborIndex;

/// A classifier's prediction for one example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierOutput {
    pub predicted: usize,
    /// Max class probability or an analogous score in `[0, 1]`.
    pub confidence: f64,
}

/// Anything that maps a feature row to a [`ClassifierOutput`].
pub trait Classifier {
    fn predict(&self, x: ArrayView1<'_, f64>) -> Result<ClassifierOutput>;

    fn predict_all(&self, xs: ArrayView2<'_, f64>) -> Result<Vec<ClassifierOutput>> {
        xs.outer_iter().map(|x| self.predict(x)).collect()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
        }
    }
}

/// Multinomial logistic regression, `p = softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxRegression {
    /// `L × D`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl SoftmaxRegression {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self {
            weights: Array2::zeros((n_classes, dim)),
            bias: Array1::zeros(n_classes),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn probabilities(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.weights.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.ncols(),
                found: x.len(),
            });
        }
        Ok(softmax(self.weights.dot(&x) + &self.bias))
    }

    /// Mean cross-entropy over `ds` and its gradient `(dW, db)`.
    pub fn loss_and_gradient(&self, ds: &LabeledDataset) -> (f64, Array2<f64>, Array1<f64>) {
        let x = ds.features();
        let n = x.nrows() as f64;
        let logits = x.dot(&self.weights.t()) + &self.bias;
        let mut delta = Array2::zeros(logits.raw_dim());
        let mut loss = 0.0;
        for (i, row) in logits.outer_iter().enumerate() {
            let p = softmax(row.to_owned());
            let y = ds.labels()[i];
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
            let mut d = delta.row_mut(i);
            d.assign(&p);
            d[y] -= 1.0;
        }
        let grad_w = delta.t().dot(&x) / n;
        let grad_b = delta.sum_axis(Axis(0)) / n;
        (loss / n, grad_w, grad_b)
    }
}

fn softmax(mut z: Array1<f64>) -> Array1<f64> {
    let max = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    z.mapv_inplace(|v| (v - max).exp());
    let s = z.sum();
    z / s
}

impl Classifier for SoftmaxRegression {
    fn predict(&self, x: ArrayView1<'_, f64>) -> Result<ClassifierOutput> {
        let p = self.probabilities(x)?;
        let predicted = argmax(p.as_slice().expect("contiguous"));
        Ok(ClassifierOutput {
            predicted,
            confidence: p[predicted].clamp(0.0, 1.0),
        })
    }
}

/// Full-batch gradient descent on mean cross-entropy from zero weights.
/// The procedure has no random component, so it needs no seed.
pub fn train_softmax_regression(
    train: &LabeledDataset,
    config: SoftmaxConfig,
) -> Result<SoftmaxRegression> {
    if train.n_classes() < 2 {
        return Err(Error::TooFewClasses {
            found: train.n_classes(),
        });
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::invalid("learning_rate", "must be positive and finite"));
    }
    let mut model = SoftmaxRegression::zeros(train.n_classes(), train.dim());
    for epoch in 0..config.epochs {
        let (loss, gw, gb) = model.loss_and_gradient(train);
        if !loss.is_finite() || gw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        model.weights.scaled_add(-config.learning_rate, &gw);
        model.bias.scaled_add(-config.learning_rate, &gb);
        if model.weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
    }
    Ok(model)
}

/// Majority vote over the `k` nearest training points.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    index: NeighborIndex,
    labels: Vec<usize>,
    n_classes: usize,
    k: usize,
}

impl KnnClassifier {
    pub fn new(train: &LabeledDataset, k: usize) -> Result<Self> {
        if k == 0 || k > train.len() {
            return Err(Error::invalid("k", format!("{k} not in [1, {}]", train.len())));
        }
        Ok(Self {
            index: NeighborIndex::build(train.features())?,
            labels: train.labels().to_vec(),
            n_classes: train.n_classes(),
            k,
        })
    }
}

impl Classifier for KnnClassifier {
    /// Ties in the vote go to the smallest label; confidence is the winning
    /// vote fraction.
    fn predict(&self, x: ArrayView1<'_, f64>) -> Result<ClassifierOutput> {
        let x = x.to_vec();
        let mut votes = vec![0usize; self.n_classes];
        for nb in self.index.k_nearest(&x, self.k)? {
            votes[self.labels[nb.index]] += 1;
        }
        let mut best = 0;
        for (l, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = l;
            }
        }
        Ok(ClassifierOutput {
            predicted: best,
            confidence: votes[best] as f64 / self.k as f64,
        })
    }
}

pub fn knn_classifier_predict(
    train: &LabeledDataset,
    x: ArrayView1<'_, f64>,
    k: usize,
) -> Result<ClassifierOutput> {
    KnnClassifier::new(train, k)?.predict(x)
}

/// Reads a predictions CSV with columns `predicted` (a label name from
/// `label_names`) and `confidence`.
pub fn load_external_predictions(
    path: impl AsRef<Path>,
    label_names: &[String],
    expected_rows: Option<usize>,
) -> Result<Vec<ClassifierOutput>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn {
                column: name.to_owned(),
                available: headers.clone(),
            })
    };
    let (pred_col, conf_col) = (column("predicted")?, column("confidence")?);
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let label = record.get(pred_col).unwrap_or("").trim();
        let predicted = label_names
            .iter()
            .position(|n| n == label)
            .ok_or_else(|| Error::UnknownLabel {
                row,
                label: label.to_owned(),
                valid: label_names.to_vec(),
            })?;
        let raw = record.get(conf_col).unwrap_or("").trim();
        let confidence: f64 = raw.parse().map_err(|_| Error::NonNumeric {
            row,
            column: "confidence".into(),
            value: raw.to_owned(),
        })?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::ConfidenceOutOfRange {
                row,
                value: confidence,
            });
        }
        out.push(ClassifierOutput {
            predicted,
            confidence,
        });
    }
    if let Some(expected) = expected_rows {
        if expected != out.len() {
            return Err(Error::RowCountMismatch {
                expected,
                found: out.len(),
            });
        }
    }
    Ok(out)
}

/// Writes predictions in the format read by [`load_external_predictions`].
pub fn write_predictions<W: std::io::Write>(
    out: W,
    predictions: &[ClassifierOutput],
    label_names: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["predicted", "confidence"])?;
    for p in predictions {
        w.write_record([label_names[p.predicted].as_str(), &format!("{:?}", p.confidence)])?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<predictions>".into(),
        source: e,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn separable() -> LabeledDataset {
        let x = array![[-1.2], [-1.0], [-0.8], [-1.1], [0.8], [1.0], [1.2], [0.9]];
        LabeledDataset::new(x, vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap()
    }

    #[test]
    fn separable_training_reaches_full_accuracy() {
        let ds = separable();
        let m = train_softmax_regression(&ds, SoftmaxConfig::default()).unwrap();
        for (x, &y) in ds.features().outer_iter().zip(ds.labels()) {
            let out = m.predict(x).unwrap();
            assert_eq!(out.predicted, y);
            assert!(out.confidence >= 0.5);
        }
    }

    #[test]
    fn zero_epochs_is_uniform() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]];
        let ds = LabeledDataset::new(x, vec![0, 1, 2]).unwrap();
        let m = train_softmax_regression(
            &ds,
            SoftmaxConfig {
                learning_rate: 0.1,
                epochs: 0,
            },
        )
        .unwrap();
        let out = m.predict(array![5.0, -2.0].view()).unwrap();
        assert_eq!(out.predicted, 0);
        assert!((out.confidence - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn huge_learning_rate_reports_epoch() {
        let x = array![[-1e200], [1e200]];
        let ds = LabeledDataset::new(x, vec![0, 1]).unwrap();
        let err = train_softmax_regression(
            &ds,
            SoftmaxConfig {
                learning_rate: 1e200,
                epochs: 10,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = SoftmaxRegression {
            weights: Array2::from_shape_fn((4, 3), |_| rng.random_range(-30.0..30.0)),
            bias: Array1::from_shape_fn(4, |_| rng.random_range(-5.0..5.0)),
        };
        for _ in 0..100 {
            let x = Array1::from_shape_fn(3, |_| rng.random_range(-10.0..10.0));
            assert!((m.probabilities(x.view()).unwrap().sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let x = Array2::from_shape_fn((12, 3), |_| rng.random_range(-2.0..2.0));
            let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
            let ds = LabeledDataset::new(x, labels).unwrap();
            let m = SoftmaxRegression {
                weights: Array2::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0)),
                bias: Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0)),
            };
            let (_, gw, gb) = m.loss_and_gradient(&ds);
            let h = 1e-6;
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-8);
            for i in 0..3 {
                for j in 0..3 {
                    let (mut up, mut down) = (m.clone(), m.clone());
                    up.weights[[i, j]] += h;
                    down.weights[[i, j]] -= h;
                    let fd = (up.loss_and_gradient(&ds).0 - down.loss_and_gradient(&ds).0) / (2.0 * h);
                    assert!(rel(fd, gw[[i, j]]) < 1e-5, "dW[{i},{j}] {fd} vs {}", gw[[i, j]]);
                }
                let (mut up, mut down) = (m.clone(), m.clone());
                up.bias[i] += h;
                down.bias[i] -= h;
                let fd = (up.loss_and_gradient(&ds).0 - down.loss_and_gradient(&ds).0) / (2.0 * h);
                assert!(rel(fd, gb[i]) < 1e-5);
            }
        }
    }

    #[test]
    fn knn_votes() {
        let x = array![[0.0], [1.0], [2.0], [10.0]];
        let ds = LabeledDataset::new(x, vec![0, 0, 1, 1]).unwrap();
        let one = knn_classifier_predict(&ds, array![9.0].view(), 1).unwrap();
        assert_eq!((one.predicted, one.confidence), (1, 1.0));
        let three = knn_classifier_predict(&ds, array![0.4].view(), 3).unwrap();
        assert_eq!(three.predicted, 0);
        assert!((three.confidence - 2.0 / 3.0).abs() < 1e-15);
        let tie = knn_classifier_predict(&ds, array![1.5].view(), 2).unwrap();
        assert_eq!(tie.predicted, 0);
        assert!(knn_classifier_predict(&ds, array![1.5].view(), 5).is_err());
    }

    #[test]
    fn one_nn_training_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((80, 2), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<usize> = (0..80).map(|_| rng.random_range(0..3)).collect();
        let ds = LabeledDataset::with_classes(x, labels, 3, None).unwrap();
        let knn = KnnClassifier::new(&ds, 1).unwrap();
        let preds = knn.predict_all(ds.features()).unwrap();
        assert!(preds.iter().zip(ds.labels()).all(|(p, &y)| p.predicted == y));
    }

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn external_predictions() {
        let names = vec!["cat".to_string(), "dog".to_string()];
        let f = write("predicted,confidence\ncat,0.9\ndog,0.6\n");
        let p = load_external_predictions(f.path(), &names, Some(2)).unwrap();
        assert_eq!(p[1].predicted, 1);
        assert!(matches!(
            load_external_predictions(f.path(), &names, Some(3)),
            Err(Error::RowCountMismatch { .. })
        ));
        let f = write("predicted,confidence\ncat,1.2\n");
        assert!(matches!(
            load_external_predictions(f.path(), &names, None),
            Err(Error::ConfidenceOutOfRange { row: 0, .. })
        ));
        let f = write("predicted,confidence\nemu,0.5\n");
        match load_external_predictions(f.path(), &names, None) {
            Err(Error::UnknownLabel { valid, .. }) => assert_eq!(valid, names),
            other => panic!("unexpected {other:?}"),
        }
    }
}
