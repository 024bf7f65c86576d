//! CART regression trees grown by greedy variance reduction.
//!
//! A split sends `x[feature] <= threshold` left. Candidate thresholds are the
//! midpoints between consecutive distinct sorted feature values. The chosen
//! split minimizes the summed within-child squared error (equivalently,
//! maximizes `S_l^2/n_l + S_r^2/n_r`); ties go to the lowest feature index,
//! then the lowest threshold. Leaves predict the mean training target.

use serde::{Deserialize, Serialize};

use crate::error::RegressorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartTree {
    pub width: usize,
    /// Arena of nodes; index 0 is the root.
    pub nodes: Vec<Node>,
}

impl CartTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, samples } => Some((*value, *samples)),
            Node::Split { .. } => None,
        })
    }
}

/// Best split of one node, if any split improves on the parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Rows sent left.
    pub n_left: usize,
}

struct Builder<'a> {
    x: &'a [f64],
    y: &'a [f64],
    width: usize,
    params: CartParams,
    nodes: Vec<Node>,
}

/// Midpoint of `a < b` that still separates them.
fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid >= b {
        a
    } else {
        mid
    }
}

impl Builder<'_> {
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.x[row * self.width + feature]
    }

    fn best_split(&self, rows: &[usize]) -> Option<SplitChoice> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf;
        if n < 2 * min_leaf {
            return None;
        }
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let total_sq: f64 = rows.iter().map(|&r| self.y[r] * self.y[r]).sum();
        let tol = 1e-12 * (total_sq + 1.0);
        let parent = total * total / n as f64;

        let mut best: Option<(f64, SplitChoice)> = None;
        let mut order = rows.to_vec();
        for feature in 0..self.width {
            order.sort_by(|&a, &b| {
                self.value(a, feature)
                    .total_cmp(&self.value(b, feature))
                    .then(a.cmp(&b))
            });
            let mut left_sum = 0.0;
            for i in 1..n {
                left_sum += self.y[order[i - 1]];
                if i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let (lo, hi) = (self.value(order[i - 1], feature), self.value(order[i], feature));
                if lo >= hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64;
                let better = match &best {
                    None => score > parent + tol,
                    Some((best_score, _)) => score > best_score + tol,
                };
                if better {
                    best = Some((
                        score,
                        SplitChoice {
                            feature,
                            threshold: midpoint(lo, hi),
                            n_left: i,
                        },
                    ));
                }
            }
        }
        best.map(|(_, choice)| choice)
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf {
            value: mean,
            samples: rows.len(),
        });
        if depth >= self.params.max_depth {
            return at;
        }
        let Some(split) = self.best_split(&rows) else {
            return at;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.value(r, split.feature) <= split.threshold);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

fn check(x: &[f64], width: usize, y: &[f64], params: &CartParams) -> Result<(), RegressorError> {
    if params.min_leaf == 0 {
        return Err(RegressorError::InvalidHyperparameter("min_leaf must be positive".into()));
    }
    if width == 0 || x.len() != y.len() * width {
        return Err(RegressorError::DimensionMismatch {
            expected: y.len() * width.max(1),
            found: x.len(),
        });
    }
    let required = 2 * params.min_leaf;
    if y.len() < required {
        return Err(RegressorError::TooFewRows {
            required,
            found: y.len(),
        });
    }
    Ok(())
}

/// Grow a tree on row-major `x` (`width` columns) and targets `y`.
pub fn fit_cart(x: &[f64], width: usize, y: &[f64], params: &CartParams) -> Result<CartTree, RegressorError> {
    check(x, width, y, params)?;
    let mut builder = Builder {
        x,
        y,
        width,
        params: *params,
        nodes: Vec::new(),
    };
    builder.grow((0..y.len()).collect(), 0);
    Ok(CartTree {
        width,
        nodes: builder.nodes,
    })
}

/// The root split `fit_cart` would choose, without growing the tree.
pub fn root_split(x: &[f64], width: usize, y: &[f64], params: &CartParams) -> Result<Option<SplitChoice>, RegressorError> {
    check(x, width, y, params)?;
    let builder = Builder {
        x,
        y,
        width,
        params: *params,
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..y.len()).collect();
    Ok(builder.best_split(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_single_leaf() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y = vec![0.3; 20];
        let t = fit_cart(&x, 1, &y, &CartParams::default()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert!((t.predict(&[100.0]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn step_function_depth_one() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 20.0 + 0.025).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v < 0.5 { 0.0 } else { 1.0 }).collect();
        let t = fit_cart(&x, 1, &y, &CartParams::default()).unwrap();
        assert_eq!(t.depth(), 1);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(t.predict(&[*xi]), *yi);
        }
        match t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert!((threshold - 0.5).abs() < 1e-12);
            }
            _ => panic!("root should split"),
        }
    }

    #[test]
    fn zero_depth_is_mean() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let t = fit_cart(&x, 1, &y, &CartParams { max_depth: 0, min_leaf: 1 }).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[3.0]), 4.5);
    }

    #[test]
    fn limits_honored() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (v / 13.0).sin()).collect();
        let params = CartParams { max_depth: 4, min_leaf: 7 };
        let t = fit_cart(&x, 1, &y, &params).unwrap();
        assert!(t.depth() <= 4);
        assert!(t.leaves().all(|(_, n)| n >= 7));
        assert_eq!(t.leaves().map(|(_, n)| n).sum::<usize>(), 200);
    }

    #[test]
    fn too_few_rows() {
        let err = fit_cart(&[1.0; 9], 1, &[1.0; 9], &CartParams::default()).unwrap_err();
        assert_eq!(err, RegressorError::TooFewRows { required: 10, found: 9 });
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both features carry the same split
        let x: Vec<f64> = (0..10).flat_map(|i| [i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i < 5 { 0.0 } else { 1.0 }).collect();
        let s = root_split(&x, 2, &y, &CartParams { max_depth: 3, min_leaf: 1 }).unwrap().unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 4.5);
    }
}
