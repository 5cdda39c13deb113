//! Exact Euclidean nearest-neighbor geometry.
//!
//! All comparisons happen on squared distances computed by [`sq_dist`]; a
//! square root is taken only on the returned value. Queries therefore agree
//! bit-for-bit with a linear scan that sums squared coordinate differences
//! in the same order.

mod kdtree;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use kdtree::KdTree;

/// Below this many points the index is a plain scan.
const MIN_TREE_POINTS: usize = 64;
/// Above this dimension box pruning rarely pays off; scan instead.
const MAX_TREE_DIM: usize = 20;

/// Squared Euclidean distance, summed in coordinate order.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// A neighbor returned by [`NeighborIndex::k_nearest`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Row of the indexed point set.
    pub index: usize,
    pub distance: f64,
}

/// Immutable exact nearest-neighbor index over a point set.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    points: Vec<f64>,
    tree: Option<KdTree>,
}

impl NeighborIndex {
    pub fn build(points: ArrayView2<'_, f64>) -> Result<Self> {
        let (m, dim) = points.dim();
        if m == 0 || dim == 0 {
            return Err(Error::invalid("points", "cannot index an empty point set"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points", "non-finite coordinate"));
        }
        let flat: Vec<f64> = points.iter().copied().collect();
        let tree = (m >= MIN_TREE_POINTS && dim <= MAX_TREE_DIM).then(|| KdTree::build(&flat, dim));
        Ok(Self {
            dim,
            points: flat,
            tree,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.len(), self.dim), self.points.clone())
            .expect("flat buffer matches shape")
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `(squared distance, index)` of the `k` nearest points, sorted by
    /// distance then index.
    fn k_nearest_sq(&self, x: &[f64], k: usize) -> Vec<(f64, usize)> {
        match &self.tree {
            Some(tree) => {
                let mut v: Vec<_> = tree
                    .k_nearest(&self.points, x, k)
                    .into_sorted_vec()
                    .into_iter()
                    .map(|c| (c.sq, c.index))
                    .collect();
                v.truncate(k);
                v
            }
            None => {
                let mut all: Vec<(f64, usize)> = (0..self.len())
                    .map(|i| (sq_dist(self.point(i), x), i))
                    .collect();
                let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < all.len() {
                    all.select_nth_unstable_by(k, by);
                    all.truncate(k);
                }
                all.sort_unstable_by(by);
                all
            }
        }
    }

    /// Nearest indexed point, ties to the smallest index.
    pub fn nearest(&self, x: &[f64]) -> Result<Neighbor> {
        self.check_query(x)?;
        let (sq, index) = self.k_nearest_sq(x, 1)[0];
        Ok(Neighbor {
            index,
            distance: sq.sqrt(),
        })
    }

    /// `d(x, A) = min_{a ∈ A} ‖x − a‖`.
    pub fn set_distance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.nearest(x)?.distance)
    }

    /// Smallest `r` such that the closed ball `B(x, r)` holds at least `k`
    /// indexed points; an indexed point equal to `x` counts.
    pub fn knn_radius(&self, x: &[f64], k: usize) -> Result<f64> {
        self.check_query(x)?;
        self.check_k(k)?;
        let nn = self.k_nearest_sq(x, k);
        Ok(nn[k - 1].0.sqrt())
    }

    /// The `k` nearest indexed points, sorted by distance then index.
    pub fn k_nearest(&self, x: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        self.check_query(x)?;
        self.check_k(k)?;
        Ok(self
            .k_nearest_sq(x, k)
            .into_iter()
            .map(|(sq, index)| Neighbor {
                index,
                distance: sq.sqrt(),
            })
            .collect())
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return Err(Error::invalid(
                "k",
                format!("{k} not in [1, {}]", self.len()),
            ));
        }
        Ok(())
    }

    /// `sup_{x ∈ from} d(x, self)`.
    pub fn directed_hausdorff(&self, from: ArrayView2<'_, f64>) -> Result<f64> {
        if from.nrows() == 0 {
            return Err(Error::invalid("points", "empty point set"));
        }
        if from.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: from.ncols(),
            });
        }
        let rows: Vec<Vec<f64>> = from.outer_iter().map(|r| r.to_vec()).collect();
        let worst = rows
            .par_iter()
            .map(|r| self.k_nearest_sq(r, 1)[0].0)
            .reduce(|| 0.0, f64::max);
        Ok(worst.sqrt())
    }
}

/// `d_H(A, B) = max(sup_{a∈A} d(a, B), sup_{b∈B} d(b, A))`.
pub fn hausdorff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    let ia = NeighborIndex::build(a)?;
    let ib = NeighborIndex::build(b)?;
    Ok(ib.directed_hausdorff(a)?.max(ia.directed_hausdorff(b)?))
}
