//! Bucketed kd-tree with per-node bounding boxes.
//!
//! Pruning compares the squared box distance against the current worst
//! squared candidate distance with a strict `>`, so results are identical
//! to a linear scan (box distances never exceed the computed point
//! distances under monotone rounding).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::sq_dist;

const LEAF_SIZE: usize = 16;
const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone)]
pub(super) struct KdTree {
    dim: usize,
    /// Point indices; each node owns the contiguous range `start..end`.
    perm: Vec<usize>,
    nodes: Vec<Node>,
    /// `lo, hi` per node, each `dim` long.
    bounds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct Candidate {
    pub sq: f64,
    pub index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sq
            .total_cmp(&other.sq)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    pub fn build(points: &[f64], dim: usize) -> Self {
        let m = points.len() / dim;
        let mut tree = KdTree {
            dim,
            perm: (0..m).collect(),
            nodes: Vec::new(),
            bounds: Vec::new(),
        };
        tree.build_node(points, 0, m);
        tree
    }

    fn build_node(&mut self, points: &[f64], start: usize, end: usize) -> u32 {
        let dim = self.dim;
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            left: NO_CHILD,
            right: NO_CHILD,
        });
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &p in &self.perm[start..end] {
            for j in 0..dim {
                let v = points[p * dim + j];
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let (split_dim, spread) = (0..dim)
            .map(|j| (j, hi[j] - lo[j]))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);

        if end - start <= LEAF_SIZE || spread <= 0.0 {
            return id as u32;
        }
        let mid = start + (end - start) / 2;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dim + split_dim].total_cmp(&points[b * dim + split_dim])
        });
        let left = self.build_node(points, start, mid);
        let right = self.build_node(points, mid, end);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        id as u32
    }

    fn box_sq_dist(&self, node: usize, x: &[f64]) -> f64 {
        let base = node * 2 * self.dim;
        let lo = &self.bounds[base..base + self.dim];
        let hi = &self.bounds[base + self.dim..base + 2 * self.dim];
        let mut s = 0.0;
        for j in 0..self.dim {
            let d = if x[j] < lo[j] {
                x[j] - lo[j]
            } else if x[j] > hi[j] {
                x[j] - hi[j]
            } else {
                0.0
            };
            s += d * d;
        }
        s
    }

    /// The `k` smallest `(sq, index)` pairs, unordered.
    pub fn k_nearest(&self, points: &[f64], x: &[f64], k: usize) -> BinaryHeap<Candidate> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(points, 0, x, k, &mut heap);
        heap
    }

    fn search(
        &self,
        points: &[f64],
        node: usize,
        x: &[f64],
        k: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        let n = &self.nodes[node];
        if n.left == NO_CHILD {
            for &p in &self.perm[n.start..n.end] {
                let c = Candidate {
                    sq: sq_dist(&points[p * self.dim..(p + 1) * self.dim], x),
                    index: p,
                };
                if heap.len() < k {
                    heap.push(c);
                } else if c < *heap.peek().expect("heap is full") {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        let (l, r) = (n.left as usize, n.right as usize);
        let (dl, dr) = (self.box_sq_dist(l, x), self.box_sq_dist(r, x));
        let order = if dl <= dr { [(l, dl), (r, dr)] } else { [(r, dr), (l, dl)] };
        for (child, bound) in order {
            if heap.len() == k && bound > heap.peek().expect("heap is full").sq {
                continue;
            }
            self.search(points, child, x, k, heap);
        }
    }
}
