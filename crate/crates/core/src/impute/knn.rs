//! K-nearest-neighbour regression.
//!
//! Prediction is the unweighted mean target of the `k` stored rows closest
//! in Euclidean distance, ordering candidates by `(squared distance, row
//! index)` so distance ties go to the lower row index. Queries run on a
//! kd-tree whose pruning test is strict, which keeps the answer identical to
//! an exhaustive sort.

use serde::{Deserialize, Serialize};

use crate::error::RegressorError;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct KnnData {
    width: usize,
    k: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "KnnData", into = "KnnData")]
pub struct KnnModel {
    width: usize,
    k: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    tree: KdTree,
}

impl From<KnnData> for KnnModel {
    fn from(d: KnnData) -> Self {
        let tree = KdTree::build(&d.features, d.width, d.targets.len());
        Self {
            width: d.width,
            k: d.k,
            features: d.features,
            targets: d.targets,
            tree,
        }
    }
}

impl From<KnnModel> for KnnData {
    fn from(m: KnnModel) -> Self {
        Self {
            width: m.width,
            k: m.k,
            features: m.features,
            targets: m.targets,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum KdNode {
    Leaf { start: usize, end: usize },
    Inner { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct KdTree {
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

impl KdTree {
    fn build(features: &[f64], width: usize, n: usize) -> Self {
        let mut tree = KdTree {
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.split(features, width, 0, n);
        }
        tree
    }

    fn split(&mut self, features: &[f64], width: usize, start: usize, end: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(KdNode::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return at;
        }
        let slice = &mut self.order[start..end];
        let spread = |d: usize| {
            let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = features[i * width + d];
                (lo.min(v), hi.max(v))
            });
            hi - lo
        };
        let dim = (0..width)
            .map(|d| (d, spread(d)))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0;
        slice.sort_unstable_by(|&a, &b| {
            features[a * width + dim]
                .total_cmp(&features[b * width + dim])
                .then(a.cmp(&b))
        });
        let mid = start + (end - start) / 2;
        let value = features[self.order[mid] * width + dim];
        let left = self.split(features, width, start, mid);
        let right = self.split(features, width, mid, end);
        self.nodes[at] = KdNode::Inner { dim, value, left, right };
        at
    }
}

/// Running `k` best candidates, sorted by `(distance, index)`.
struct Best {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Best {
    fn worst(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    fn offer(&mut self, dist: f64, index: usize) {
        let key = (dist, index);
        let less = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).is_lt();
        if self.items.len() == self.k && !less(&key, &self.items[self.k - 1]) {
            return;
        }
        let pos = self.items.partition_point(|item| less(item, &key));
        self.items.insert(pos, key);
        self.items.truncate(self.k);
    }
}

/// Squared Euclidean distance, summed in column order.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.width..(i + 1) * self.width]
    }

    /// Indices of the `k` nearest stored rows, nearest first.
    pub fn neighbors(&self, query: &[f64]) -> Vec<usize> {
        let mut best = Best {
            k: self.k,
            items: Vec::with_capacity(self.k + 1),
        };
        if !self.tree.nodes.is_empty() {
            self.search(0, query, &mut best);
        }
        best.items.into_iter().map(|(_, i)| i).collect()
    }

    fn search(&self, at: usize, query: &[f64], best: &mut Best) {
        match self.tree.nodes[at] {
            KdNode::Leaf { start, end } => {
                for &i in &self.tree.order[start..end] {
                    best.offer(squared_distance(self.row(i), query), i);
                }
            }
            KdNode::Inner { dim, value, left, right } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, best);
                // ties at the plane may still hold a lower index: prune only on strict excess
                if diff * diff <= best.worst() {
                    self.search(far, query, best);
                }
            }
        }
    }

    pub fn predict(&self, query: &[f64]) -> f64 {
        let nn = self.neighbors(query);
        nn.iter().map(|&i| self.targets[i]).sum::<f64>() / nn.len() as f64
    }
}

/// Store `x` (row-major, `width` columns) and `y` for queries with `k` neighbours.
pub fn fit_knn(x: &[f64], width: usize, y: &[f64], k: usize) -> Result<KnnModel, RegressorError> {
    if k == 0 {
        return Err(RegressorError::InvalidHyperparameter("k must be positive".into()));
    }
    if width == 0 || x.len() != y.len() * width {
        return Err(RegressorError::DimensionMismatch {
            expected: y.len() * width.max(1),
            found: x.len(),
        });
    }
    if y.len() < k {
        return Err(RegressorError::TooFewRows {
            required: k,
            found: y.len(),
        });
    }
    Ok(KnnModel::from(KnnData {
        width,
        k,
        features: x.to_vec(),
        targets: y.to_vec(),
    }))
}
