//! k-NN radius thresholding: estimate the α-high-density set of a sample by
//! dropping the α-fraction of points with the largest k-NN radius.
//!
//! ε is the `(n − ⌊αn⌋)`-th smallest radius. Points with radius exactly ε
//! are kept, so ties can leave fewer than `⌊αn⌋` points filtered.

use std::f64::consts::PI;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbor::NeighborIndex;

/// Output of [`estimate_high_density_set`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighDensitySet {
    /// Sorted indices into the input sample.
    pub kept_indices: Vec<usize>,
    pub epsilon: f64,
    pub alpha: f64,
    pub k_effective: usize,
    /// Set when the requested `k` exceeded the sample size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// k-NN radius of every sample point with respect to the full sample,
/// the point itself included.
pub fn knn_radii(points: ArrayView2<'_, f64>, k: usize) -> Result<Vec<f64>> {
    let index = NeighborIndex::build(points)?;
    if k == 0 || k > index.len() {
        return Err(Error::invalid("k", format!("{k} not in [1, {}]", index.len())));
    }
    (0..index.len())
        .into_par_iter()
        .map(|i| index.knn_radius(index.point(i), k))
        .collect()
}

/// `inf { r > 0 : |{i : radii_i > r}| ≤ α·n }`, realized as an order
/// statistic of `radii`.
pub fn select_epsilon(radii: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if radii.is_empty() {
        return Err(Error::invalid("radii", "empty"));
    }
    if radii.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("radii", "non-finite radius"));
    }
    let n = radii.len();
    let filtered = max_filtered(alpha, n);
    let mut sorted = radii.to_vec();
    let (_, eps, _) = sorted.select_nth_unstable_by(n - 1 - filtered, f64::total_cmp);
    Ok(*eps)
}

/// `⌊α·n⌋` with the product taken in floating point, so it agrees with a
/// literal `count ≤ α·n` comparison.
fn max_filtered(alpha: f64, n: usize) -> usize {
    ((alpha * n as f64).floor() as usize).min(n - 1)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} is not in [0, 1)")));
    }
    Ok(())
}

/// Keeps every sample point whose k-NN radius is at most ε.
///
/// `k` larger than the sample is clamped to `n`; the clamp is recorded in
/// [`HighDensitySet::warning`].
pub fn estimate_high_density_set(
    points: ArrayView2<'_, f64>,
    alpha: f64,
    k: usize,
) -> Result<HighDensitySet> {
    check_alpha(alpha)?;
    let n = points.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    let k_effective = k.min(n);
    let warning = (k_effective < k)
        .then(|| format!("k = {k} exceeds sample size {n}; using k = {k_effective}"));
    let radii = knn_radii(points, k_effective)?;
    let epsilon = select_epsilon(&radii, alpha)?;
    let kept_indices = radii
        .iter()
        .enumerate()
        .filter(|(_, &r)| r <= epsilon)
        .map(|(i, _)| i)
        .collect();
    Ok(HighDensitySet {
        kept_indices,
        epsilon,
        alpha,
        k_effective,
        warning,
    })
}

/// Volume of the unit ball in `R^dim`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // v_0 = 1, v_1 = 2, v_d = v_{d-2} · 2π / d
    let (mut even, mut odd) = (1.0, 2.0);
    for d in 2..=dim {
        if d % 2 == 0 {
            even *= 2.0 * PI / d as f64;
        } else {
            odd *= 2.0 * PI / d as f64;
        }
    }
    if dim.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

/// k-NN density estimate `k / (n · v_dim · r_k(x)^dim)`.
///
/// `dim` is normally the ambient dimension; passing the intrinsic dimension
/// of a manifold gives the manifold variant.
pub fn knn_density(points: ArrayView2<'_, f64>, k: usize, query: &[f64], dim: usize) -> Result<f64> {
    let index = NeighborIndex::build(points)?;
    knn_density_with_index(&index, k, query, dim)
}

/// [`knn_density`] over a prebuilt index.
pub fn knn_density_with_index(
    index: &NeighborIndex,
    k: usize,
    query: &[f64],
    dim: usize,
) -> Result<f64> {
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    let r = index.knn_radius(query, k)?;
    if r == 0.0 {
        return Err(Error::ZeroRadius);
    }
    Ok(k as f64 / (index.len() as f64 * unit_ball_volume(dim) * r.powi(dim as i32)))
}

/// Keeps point `i` when at least `threshold` of its `k` nearest neighbors
/// (itself excluded) share its label. `k` is clamped to `n − 1`.
pub fn disagreement_filter(
    points: ArrayView2<'_, f64>,
    labels: &[usize],
    k: usize,
    threshold: f64,
) -> Result<Vec<usize>> {
    if labels.len() != points.nrows() {
        return Err(Error::RowCountMismatch {
            expected: points.nrows(),
            found: labels.len(),
        });
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid("threshold", format!("{threshold} is not in [0, 1]")));
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = k.min(n - 1);
    if k == 0 {
        return Ok((0..n).collect());
    }
    let index = NeighborIndex::build(points)?;
    let keep: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nn = index.k_nearest(index.point(i), k + 1)?;
            let same = nn
                .iter()
                .filter(|nb| nb.index != i)
                .take(k)
                .filter(|nb| labels[nb.index] == labels[i])
                .count();
            Ok(same as f64 / k as f64 >= threshold)
        })
        .collect::<Result<_>>()?;
    Ok(keep
        .iter()
        .enumerate()
        .filter(|(_, &k)| k)
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn line() -> Array2<f64> {
        array![[0.0], [1.0], [2.0], [10.0]]
    }

    #[test]
    fn radii_hand_values() {
        assert_eq!(knn_radii(line().view(), 2).unwrap(), vec![1.0, 1.0, 1.0, 8.0]);
        assert_eq!(knn_radii(line().view(), 1).unwrap(), vec![0.0; 4]);
        assert_eq!(knn_radii(line().view(), 4).unwrap(), vec![10.0, 9.0, 8.0, 10.0]);
        assert!(knn_radii(line().view(), 5).is_err());
    }

    #[test]
    fn epsilon_hand_values() {
        assert_eq!(select_epsilon(&[1.0, 1.0, 1.0, 8.0], 0.25).unwrap(), 1.0);
        assert_eq!(select_epsilon(&[3.0, 1.0, 7.0, 2.0], 0.0).unwrap(), 7.0);
        assert_eq!(select_epsilon(&[5.0; 4], 0.5).unwrap(), 5.0);
        assert!(select_epsilon(&[1.0], 1.0).is_err());
    }

    #[test]
    fn high_density_set_hand_values() {
        let h = estimate_high_density_set(line().view(), 0.25, 2).unwrap();
        assert_eq!(h.kept_indices, vec![0, 1, 2]);
        assert_eq!(h.epsilon, 1.0);
        let h = estimate_high_density_set(line().view(), 0.0, 2).unwrap();
        assert_eq!(h.kept_indices, vec![0, 1, 2, 3]);
        let h = estimate_high_density_set(array![[3.0, 4.0]].view(), 0.9, 10).unwrap();
        assert_eq!(h.k_effective, 1);
        assert_eq!(h.kept_indices, vec![0]);
        assert!(h.warning.is_some());
    }

    #[test]
    fn ties_survive() {
        let pts = array![[0.0], [1.0], [2.0], [3.0]];
        // radii with k=2: [1,1,1,1]
        let h = estimate_high_density_set(pts.view(), 0.5, 2).unwrap();
        assert_eq!(h.kept_indices.len(), 4);
    }

    #[test]
    fn density_hand_value_and_scaling() {
        let d = knn_density(line().view(), 2, &[0.0], 1).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        let doubled = line().mapv(|v| 2.0 * v);
        let d2 = knn_density(doubled.view(), 2, &[0.0], 1).unwrap();
        assert!((d2 - 0.125).abs() < 1e-15);
        assert!(matches!(
            knn_density(line().view(), 1, &[0.0], 1),
            Err(Error::ZeroRadius)
        ));
    }

    #[test]
    fn unit_ball_volumes() {
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    fn seven_points() -> (Array2<f64>, Vec<usize>) {
        // cluster A around 0, cluster B around 10; point 6 sits in A but is labeled B
        let pts = array![[0.0], [0.5], [1.0], [10.0], [10.5], [11.0], [0.7]];
        (pts, vec![0, 0, 0, 1, 1, 1, 1])
    }

    #[test]
    fn disagreement_removes_mislabeled_point() {
        let (pts, labels) = seven_points();
        assert_eq!(
            disagreement_filter(pts.view(), &labels, 3, 0.5).unwrap(),
            vec![0, 1, 2, 3, 4, 5]
        );
        assert_eq!(
            disagreement_filter(pts.view(), &labels, 3, 0.0).unwrap(),
            (0..7).collect::<Vec<_>>()
        );
        let clean = array![[0.0], [0.1], [0.2], [9.0], [9.1], [9.2]];
        assert_eq!(
            disagreement_filter(clean.view(), &[0, 0, 0, 1, 1, 1], 2, 0.5).unwrap().len(),
            6
        );
    }

    proptest! {
        #[test]
        fn epsilon_permutation_invariant(mut radii in proptest::collection::vec(0u8..20, 1..40), alpha in 0.0f64..0.99, seed in any::<u64>()) {
            let r: Vec<f64> = radii.iter().map(|&v| v as f64).collect();
            let e1 = select_epsilon(&r, alpha).unwrap();
            let s = seed as usize;
            let len = radii.len();
            radii.rotate_left(s % len);
            radii.reverse();
            let r2: Vec<f64> = radii.iter().map(|&v| v as f64).collect();
            prop_assert_eq!(e1, select_epsilon(&r2, alpha).unwrap());
            let m = (alpha * r.len() as f64).floor();
            prop_assert!(r.iter().filter(|&&v| v > e1).count() as f64 <= m);
        }
    }
}
