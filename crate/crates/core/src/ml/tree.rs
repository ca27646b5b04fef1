//! Small CART classifier (Gini impurity), used as a baseline next to KNN.

use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::dataset::NUM_CLASSES;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_samples_split: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(u8),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    root: Node,
    dim: usize,
    pub params: TreeParams,
}

fn counts(y: &[u8], idx: &[usize]) -> [usize; NUM_CLASSES] {
    let mut c = [0; NUM_CLASSES];
    for &i in idx {
        c[y[i] as usize] += 1;
    }
    c
}

fn gini(c: &[usize; NUM_CLASSES], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - c.iter().map(|&v| (v as f64 / n).powi(2)).sum::<f64>()
}

fn majority(c: &[usize; NUM_CLASSES]) -> u8 {
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if c[k] > c[best] {
            best = k;
        }
    }
    best as u8
}

impl DecisionTree {
    pub fn fit(x: &FeatureMatrix, y: &[u8], params: TreeParams) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::domain("tree needs a non-empty, matching training set"));
        }
        if y.iter().any(|&l| l as usize >= NUM_CLASSES) {
            return Err(Error::domain("label out of range"));
        }
        let idx: Vec<usize> = (0..x.len()).collect();
        let root = Self::grow(x, y, idx, 0, &params);
        Ok(Self {
            root,
            dim: x.dim(),
            params,
        })
    }

    fn grow(x: &FeatureMatrix, y: &[u8], idx: Vec<usize>, depth: usize, p: &TreeParams) -> Node {
        let c = counts(y, &idx);
        let n = idx.len();
        if depth >= p.max_depth || n < p.min_samples_split || c.iter().filter(|&&v| v > 0).count() <= 1 {
            return Node::Leaf(majority(&c));
        }
        let parent = gini(&c, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.clone();
        for f in 0..x.dim() {
            order.sort_by(|&a, &b| x.row(a)[f].total_cmp(&x.row(b)[f]).then(a.cmp(&b)));
            let mut left = [0usize; NUM_CLASSES];
            let mut right = c;
            for s in 0..n - 1 {
                let l = y[order[s]] as usize;
                left[l] += 1;
                right[l] -= 1;
                let (v0, v1) = (x.row(order[s])[f], x.row(order[s + 1])[f]);
                if v0 == v1 {
                    continue;
                }
                let nl = s + 1;
                let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl))
                    / n as f64;
                if best.is_none_or(|b| score < b.0) {
                    best = Some((score, f, 0.5 * (v0 + v1)));
                }
            }
        }
        match best {
            Some((score, feature, threshold)) if score < parent => {
                let (li, ri): (Vec<usize>, Vec<usize>) =
                    idx.into_iter().partition(|&i| x.row(i)[feature] <= threshold);
                Node::Split {
                    feature,
                    threshold,
                    left: Box::new(Self::grow(x, y, li, depth + 1, p)),
                    right: Box::new(Self::grow(x, y, ri, depth + 1, p)),
                }
            }
            _ => Node::Leaf(majority(&c)),
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<u8> {
        if row.len() != self.dim {
            return Err(Error::domain("query dimension does not match tree"));
        }
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(l) => return Ok(*l),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn predict_batch(&self, x: &FeatureMatrix) -> Result<Vec<u8>> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }
}
