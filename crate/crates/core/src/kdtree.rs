//! Exact nearest-neighbor search over a point cloud.
//!
//! The index is a balanced k-d tree: axes cycle x, y, z with depth, splits
//! happen at the median, and recursion stops at `leaf_size` points. Queries
//! return exactly what a brute-force scan would return, with ties on distance
//! broken toward the lowest point index, so results never depend on tree
//! layout.

use nalgebra::Point3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Default number of points at which a subtree becomes a leaf.
pub const DEFAULT_LEAF_SIZE: usize = 16;

enum Node {
    Split {
        axis: usize,
        /// Median coordinate: the left subtree holds points with coordinate
        /// `<= value`, the right subtree points with coordinate `>= value`.
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        start: usize,
        end: usize,
    },
}

/// A nearest-neighbor index over a fixed reference cloud.
pub struct NeighborIndex {
    nodes: Vec<Node>,
    /// Reference points rearranged so each leaf owns a contiguous slice,
    /// paired with their original cloud indices.
    items: Vec<(Point3<f64>, usize)>,
    root: usize,
    leaf_size: usize,
}

/// A single query answer: index into the reference cloud plus Euclidean
/// distance to the query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

impl NeighborIndex {
    /// Builds an index with the default leaf size. Errors on an empty cloud.
    pub fn build(reference: &PointCloud) -> Result<Self> {
        Self::with_leaf_size(reference, DEFAULT_LEAF_SIZE)
    }

    /// Same as [`build`](Self::build) with an explicit leaf size (must be >= 1).
    pub fn with_leaf_size(reference: &PointCloud, leaf_size: usize) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot index an empty reference cloud".into(),
            ));
        }
        if leaf_size == 0 {
            return Err(Error::InvalidArgument("leaf_size must be >= 1".into()));
        }
        let mut items: Vec<(Point3<f64>, usize)> = reference
            .points()
            .iter()
            .copied()
            .zip(0..reference.len())
            .collect();
        let mut index = NeighborIndex {
            nodes: Vec::new(),
            items: Vec::new(),
            root: 0,
            leaf_size,
        };
        let n = items.len();
        index.root = index.split(&mut items, 0, n, 0);
        index.items = items;
        Ok(index)
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn split(
        &mut self,
        items: &mut [(Point3<f64>, usize)],
        start: usize,
        end: usize,
        depth: usize,
    ) -> usize {
        let count = end - start;
        if count <= self.leaf_size {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        let axis = depth % 3;
        let mid = start + count / 2;
        // Median partition on the cycling axis: after this, items[mid] holds
        // the median and the halves straddle it. Equal coordinates may land
        // on either side; query-time tie handling keeps results exact anyway.
        items[start..end].select_nth_unstable_by(count / 2, |a, b| {
            a.0[axis]
                .partial_cmp(&b.0[axis])
                .expect("cloud coordinates are finite")
        });
        let split_value = items[mid].0[axis];
        let left = self.split(items, start, mid, depth + 1);
        let right = self.split(items, mid, end, depth + 1);
        self.nodes.push(Node::Split {
            axis,
            value: split_value,
            left,
            right,
        });
        self.nodes.len() - 1
    }

    /// Finds the reference point nearest to `query`.
    ///
    /// Equidistant candidates resolve to the lowest original index. Errors if
    /// the query has a non-finite coordinate.
    pub fn nearest_one(&self, query: &Point3<f64>) -> Result<Neighbor> {
        if !query.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument(
                "query point has a non-finite coordinate".into(),
            ));
        }
        let mut best_index = usize::MAX;
        let mut best_sq = f64::INFINITY;
        self.search(self.root, query, &mut best_index, &mut best_sq);
        Ok(Neighbor {
            index: best_index,
            distance: best_sq.sqrt(),
        })
    }

    fn search(&self, node: usize, query: &Point3<f64>, best_index: &mut usize, best_sq: &mut f64) {
        match &self.nodes[node] {
            Node::Leaf { start, end } => {
                for (point, id) in &self.items[*start..*end] {
                    let d_sq = (point - query).norm_squared();
                    if d_sq < *best_sq || (d_sq == *best_sq && *id < *best_index) {
                        *best_sq = d_sq;
                        *best_index = *id;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query[*axis] - value;
                let (near, far) = if delta <= 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(near, query, best_index, best_sq);
                // Points across the plane are at least |delta| away on this
                // axis. Prune strictly: an equidistant candidate on the far
                // side could still win the lowest-index tie-break.
                if delta * delta <= *best_sq {
                    self.search(far, query, best_index, best_sq);
                }
            }
        }
    }
}
