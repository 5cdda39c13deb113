//! Trust scores: per-class high-density sets and the distance ratio
//!
//! ```text
//! ξ(h, x) = d(x, Ĥ(h̃(x))) / d(x, Ĥ(h(x)))
//! ```
//!
//! where `h̃(x)` is the nearest class other than the prediction.
//!
//! A zero denominator yields `+∞` (ranked above every finite score) unless
//! the numerator is zero too, in which case the score is 1.

mod cv;
mod file;

pub use cv::{cross_validate_alpha, default_alpha_grid, CvReport, CvRow, PredictionProvider};
pub use file::{ModelFile, MODEL_FORMAT_VERSION};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::density::{disagreement_filter, estimate_high_density_set, HighDensitySet};
use crate::error::{Error, Result};
use crate::neighbor::NeighborIndex;

/// Default label-agreement threshold for [`FilteringStrategy::Disagreement`].
pub const DEFAULT_DISAGREEMENT_THRESHOLD: f64 = 0.5;

/// How each class's training points are filtered before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum FilteringStrategy {
    /// Keep every training point.
    None,
    /// k-NN radius thresholding at level α.
    Density,
    /// Drop points whose neighbors mostly carry another label.
    Disagreement { threshold: f64 },
}

impl FilteringStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            FilteringStrategy::None => "none",
            FilteringStrategy::Density => "density",
            FilteringStrategy::Disagreement { .. } => "disagreement",
        }
    }
}

/// Points, kept rows, density record and warning of one class.
pub(crate) type ClassParts = (Array2<f64>, Vec<usize>, Option<HighDensitySet>, Option<String>);

/// Fitted state for one class.
#[derive(Debug, Clone)]
pub struct ClassSet {
    /// All training points of the class.
    pub points: Array2<f64>,
    /// Sorted rows of `points` that survive filtering; never empty.
    pub kept: Vec<usize>,
    /// Present for density filtering.
    pub density: Option<HighDensitySet>,
    pub warning: Option<String>,
    full_index: NeighborIndex,
    kept_index: NeighborIndex,
}

impl ClassSet {
    fn new(
        points: Array2<f64>,
        kept: Vec<usize>,
        density: Option<HighDensitySet>,
        warning: Option<String>,
    ) -> Result<Self> {
        let full_index = NeighborIndex::build(points.view())?;
        let kept_index = if kept.len() == points.nrows() {
            full_index.clone()
        } else {
            NeighborIndex::build(points.select(Axis(0), &kept).view())?
        };
        Ok(Self {
            points,
            kept,
            density,
            warning,
            full_index,
            kept_index,
        })
    }

    pub fn kept_points(&self) -> Array2<f64> {
        self.points.select(Axis(0), &self.kept)
    }

    pub fn kept_index(&self) -> &NeighborIndex {
        &self.kept_index
    }

    pub fn full_index(&self) -> &NeighborIndex {
        &self.full_index
    }
}

/// Per-class filtered training sets with their neighbor indices.
#[derive(Debug, Clone)]
pub struct TrustModel {
    alpha: f64,
    k: usize,
    strategy: FilteringStrategy,
    dim: usize,
    classes: Vec<ClassSet>,
}

/// Score of one `(x, predicted label)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustScore {
    /// `d_other / d_pred`, or `+∞` when only `d_pred` is zero.
    pub value: f64,
    /// `h̃(x)`: nearest class other than the prediction.
    pub nearest_other_class: usize,
    pub d_pred: f64,
    pub d_other: f64,
}

fn ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        numerator / denominator
    } else if numerator > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Fits the per-class sets. Each class is filtered using only its own
/// points (density) or the full labeled sample (disagreement).
pub fn fit_trust_model(
    train: &LabeledDataset,
    alpha: f64,
    k: usize,
    strategy: FilteringStrategy,
) -> Result<TrustModel> {
    let n_classes = train.n_classes();
    if n_classes < 2 {
        return Err(Error::TooFewClasses { found: n_classes });
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} is not in [0, 1)")));
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    let counts = train.class_counts();
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass { class });
    }

    let agreeing = match strategy {
        FilteringStrategy::Disagreement { threshold } => {
            let mut keep = vec![false; train.len()];
            for i in disagreement_filter(train.features(), train.labels(), k, threshold)? {
                keep[i] = true;
            }
            Some(keep)
        }
        _ => None,
    };

    let mut classes = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let rows = train.class_indices(class);
        let points = train.class_points(class);
        let set = match strategy {
            FilteringStrategy::None => ClassSet::new(points, (0..rows.len()).collect(), None, None)?,
            FilteringStrategy::Density => {
                let h = estimate_high_density_set(points.view(), alpha, k)?;
                let warning = h.warning.clone();
                ClassSet::new(points, h.kept_indices.clone(), Some(h), warning)?
            }
            FilteringStrategy::Disagreement { .. } => {
                let keep = agreeing.as_ref().expect("computed above");
                let kept: Vec<usize> = rows
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| keep[r])
                    .map(|(j, _)| j)
                    .collect();
                if kept.is_empty() {
                    let warning = format!(
                        "class {class}: every point disagrees with its neighbors; keeping all"
                    );
                    ClassSet::new(points, (0..rows.len()).collect(), None, Some(warning))?
                } else {
                    ClassSet::new(points, kept, None, None)?
                }
            }
        };
        classes.push(set);
    }
    Ok(TrustModel {
        alpha,
        k,
        strategy,
        dim: train.dim(),
        classes,
    })
}

impl TrustModel {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn strategy(&self) -> FilteringStrategy {
        self.strategy
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[ClassSet] {
        &self.classes
    }

    pub fn kept_counts(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.kept.len()).collect()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Distance from `x` to each class's kept set.
    pub fn class_distances(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        self.classes
            .iter()
            .map(|c| c.kept_index.set_distance(x))
            .collect()
    }

    pub fn trust_score(&self, x: &[f64], predicted: usize) -> Result<TrustScore> {
        if predicted >= self.n_classes() {
            return Err(Error::LabelOutOfRange {
                label: predicted,
                n_classes: self.n_classes(),
            });
        }
        let dists = self.class_distances(x)?;
        let (nearest_other_class, d_other) = dists
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != predicted)
            .fold((usize::MAX, f64::INFINITY), |best, (l, &d)| {
                if d < best.1 {
                    (l, d)
                } else {
                    best
                }
            });
        let d_pred = dists[predicted];
        Ok(TrustScore {
            value: ratio(d_other, d_pred),
            nearest_other_class,
            d_pred,
            d_other,
        })
    }

    /// Ratio of the unfiltered 1-NN distance to the closest class over
    /// that of the second-closest class. Lies in `[0, 1]`; lower means more
    /// confident. Independent of any prediction and of the filtering.
    pub fn one_nn_ratio(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut d: Vec<f64> = self
            .classes
            .iter()
            .map(|c| c.full_index.set_distance(x))
            .collect::<Result<_>>()?;
        d.sort_by(f64::total_cmp);
        let (closest, second) = (d[0], d[1]);
        Ok(if second > 0.0 { closest / second } else { 1.0 })
    }

    pub(crate) fn from_parts(
        alpha: f64,
        k: usize,
        strategy: FilteringStrategy,
        dim: usize,
        parts: Vec<ClassParts>,
    ) -> Result<Self> {
        let classes = parts
            .into_iter()
            .map(|(points, kept, density, warning)| ClassSet::new(points, kept, density, warning))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            alpha,
            k,
            strategy,
            dim,
            classes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn seven() -> LabeledDataset {
        LabeledDataset::new(
            array![[0.0], [1.0], [2.0], [10.0], [20.0], [21.0], [22.0]],
            vec![0, 0, 0, 0, 1, 1, 1],
        )
        .unwrap()
    }

    fn singletons() -> TrustModel {
        let ds = LabeledDataset::new(array![[0.0], [10.0]], vec![0, 1]).unwrap();
        fit_trust_model(&ds, 0.0, 1, FilteringStrategy::None).unwrap()
    }

    #[test]
    fn per_class_filtering() {
        let m = fit_trust_model(&seven(), 0.25, 2, FilteringStrategy::Density).unwrap();
        assert_eq!(m.classes()[0].kept, vec![0, 1, 2]);
        assert_eq!(m.classes()[1].kept, vec![0, 1, 2]);
        assert_eq!(m.classes()[0].density.as_ref().unwrap().epsilon, 1.0);
    }

    #[test]
    fn alpha_zero_matches_no_filtering() {
        let a = fit_trust_model(&seven(), 0.0, 2, FilteringStrategy::Density).unwrap();
        let b = fit_trust_model(&seven(), 0.0, 2, FilteringStrategy::None).unwrap();
        assert_eq!(a.kept_counts(), b.kept_counts());
        for x in [-3.0, 4.5, 15.0, 30.0] {
            assert_eq!(
                a.trust_score(&[x], 0).unwrap(),
                b.trust_score(&[x], 0).unwrap()
            );
        }
    }

    #[test]
    fn single_class_rejected() {
        let ds = LabeledDataset::new(array![[0.0], [1.0]], vec![0, 0]).unwrap();
        assert!(matches!(
            fit_trust_model(&ds, 0.1, 2, FilteringStrategy::Density),
            Err(Error::TooFewClasses { found: 1 })
        ));
    }

    #[test]
    fn hand_scores() {
        let m = singletons();
        let s = m.trust_score(&[2.0], 0).unwrap();
        assert_eq!(s.value, 4.0);
        assert_eq!(s.nearest_other_class, 1);
        assert_eq!(m.trust_score(&[5.0], 0).unwrap().value, 1.0);
        assert_eq!(m.trust_score(&[5.0], 1).unwrap().value, 1.0);
        let s = m.trust_score(&[0.0], 0).unwrap();
        assert_eq!((s.d_pred, s.d_other), (0.0, 10.0));
        assert_eq!(s.value, f64::INFINITY);
        assert!(m.trust_score(&[0.0], 2).is_err());
        assert!(m.trust_score(&[0.0, 1.0], 0).is_err());
    }

    #[test]
    fn nearest_other_ties_to_smallest_label() {
        let ds = LabeledDataset::new(array![[0.0], [-5.0], [5.0]], vec![0, 1, 2]).unwrap();
        let m = fit_trust_model(&ds, 0.0, 1, FilteringStrategy::None).unwrap();
        assert_eq!(m.trust_score(&[0.0], 0).unwrap().nearest_other_class, 1);
    }

    #[test]
    fn one_nn_ratio_hand_values() {
        let m = singletons();
        assert_eq!(m.one_nn_ratio(&[2.0]).unwrap(), 0.25);
        assert_eq!(m.one_nn_ratio(&[5.0]).unwrap(), 1.0);
        assert_eq!(m.one_nn_ratio(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn disagreement_strategy_keeps_every_class_nonempty() {
        let ds = LabeledDataset::new(
            array![[0.0], [0.5], [1.0], [10.0], [10.5], [11.0], [0.7]],
            vec![0, 0, 0, 1, 1, 1, 2],
        )
        .unwrap();
        let m = fit_trust_model(
            &ds,
            0.0,
            3,
            FilteringStrategy::Disagreement {
                threshold: DEFAULT_DISAGREEMENT_THRESHOLD,
            },
        )
        .unwrap();
        assert_eq!(m.kept_counts(), vec![3, 3, 1]);
        assert!(m.classes()[2].warning.is_some());
    }
}
