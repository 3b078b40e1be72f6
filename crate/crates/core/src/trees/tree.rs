use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{leaf_weight, split_gain};
use crate::matrix::{is_missing, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Binary tree stored as a flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(weight: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { weight }],
        }
    }

    /// Index of the child `row` takes at split node `node`.
    #[inline]
    pub fn next_node(&self, node: usize, row: &[f64]) -> Option<usize> {
        match self.nodes[node] {
            Node::Leaf { .. } => None,
            Node::Split {
                feature,
                threshold,
                default_left,
                left,
                right,
            } => {
                let v = row[feature];
                let go_left = if is_missing(v) {
                    default_left
                } else {
                    v < threshold
                };
                Some(if go_left { left } else { right })
            }
        }
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut n = 0;
        while let Some(next) = self.next_node(n, row) {
            n = next;
        }
        n
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { weight } => weight,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, n: usize) -> usize {
            match t.nodes[n] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Observed rows of every column, sorted ascending by value (ties by row index).
#[derive(Debug, Clone)]
pub struct SortedColumns {
    cols: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &Matrix) -> Self {
        let cols = (0..x.n_cols())
            .map(|c| {
                let mut rows: Vec<u32> = (0..x.n_rows() as u32)
                    .filter(|&r| !is_missing(x.get(r as usize, c)))
                    .collect();
                rows.sort_by(|&a, &b| {
                    x.get(a as usize, c)
                        .total_cmp(&x.get(b as usize, c))
                        .then(a.cmp(&b))
                });
                rows
            })
            .collect();
        Self { cols }
    }
}

/// Growth settings for a single tree. Leaf weights are multiplied by `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub eta: f64,
    /// Features considered at each split: `None` uses the whole candidate set,
    /// `Some(k)` draws `k` of them per node.
    pub features_per_split: Option<usize>,
}

impl TreeConfig {
    pub fn from_params(p: &super::GbdtParams) -> Self {
        Self {
            max_depth: p.max_depth,
            lambda: p.lambda,
            gamma: p.gamma,
            alpha: p.alpha,
            eta: p.eta,
            features_per_split: None,
        }
    }
}

/// Exact greedy tree on gradient statistics. Only `feature_subset` columns
/// are split on; `rng` drives per-split feature sampling when configured.
pub fn fit_tree<R: Rng>(
    x: &Matrix,
    grad: &[f64],
    hess: &[f64],
    cfg: &TreeConfig,
    feature_subset: &[usize],
    rng: &mut R,
) -> DecisionTree {
    let sorted = SortedColumns::new(x);
    let rows: Vec<u32> = (0..x.n_rows() as u32).collect();
    fit_tree_presorted(x, &sorted, &rows, grad, hess, cfg, feature_subset, rng)
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fit_tree_presorted<R: Rng>(
    x: &Matrix,
    sorted: &SortedColumns,
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    cfg: &TreeConfig,
    feature_subset: &[usize],
    rng: &mut R,
) -> DecisionTree {
    let mut features: Vec<usize> = feature_subset.to_vec();
    features.sort_unstable();
    features.dedup();

    // Restrict the presorted columns to `rows` (a bootstrap may repeat rows).
    let mut multiplicity = vec![0u32; x.n_rows()];
    for &r in rows {
        multiplicity[r as usize] += 1;
    }
    let node_cols: Vec<Vec<u32>> = features
        .iter()
        .map(|&f| {
            let mut v = Vec::new();
            for &r in &sorted.cols[f] {
                for _ in 0..multiplicity[r as usize] {
                    v.push(r);
                }
            }
            v
        })
        .collect();
    let mut builder = Builder {
        x,
        grad,
        hess,
        cfg,
        features: &features,
        nodes: Vec::new(),
        go_left: vec![false; x.n_rows()],
    };
    builder.grow(rows.to_vec(), node_cols, 0, rng);
    DecisionTree {
        nodes: builder.nodes,
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a TreeConfig,
    features: &'a [usize],
    nodes: Vec<Node>,
    go_left: Vec<bool>,
}

impl Builder<'_> {
    fn grow<R: Rng>(
        &mut self,
        rows: Vec<u32>,
        cols: Vec<Vec<u32>>,
        depth: usize,
        rng: &mut R,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { weight: 0.0 });
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let leaf = Node::Leaf {
            weight: self.cfg.eta * leaf_weight(g, h, self.cfg.lambda, self.cfg.alpha),
        };
        if depth >= self.cfg.max_depth || rows.len() < 2 {
            self.nodes[id] = leaf;
            return id;
        }
        let Some(best) = self.best_split(&cols, rows.len(), g, h, rng) else {
            self.nodes[id] = leaf;
            return id;
        };
        for &r in &rows {
            let v = self.x.get(r as usize, best.feature);
            self.go_left[r as usize] = if is_missing(v) {
                best.default_left
            } else {
                v < best.threshold
            };
        }
        let (lrows, rrows): (Vec<u32>, Vec<u32>) =
            rows.iter().partition(|&&r| self.go_left[r as usize]);
        debug_assert!(!lrows.is_empty() && !rrows.is_empty());
        let mut lcols = Vec::with_capacity(cols.len());
        let mut rcols = Vec::with_capacity(cols.len());
        for c in cols {
            let (l, r): (Vec<u32>, Vec<u32>) =
                c.into_iter().partition(|&r| self.go_left[r as usize]);
            lcols.push(l);
            rcols.push(r);
        }
        let left = self.grow(lrows, lcols, depth + 1, rng);
        let right = self.grow(rrows, rcols, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            default_left: best.default_left,
            left,
            right,
        };
        id
    }

    /// Highest-gain split; ties keep the lowest feature index, then the lowest threshold.
    fn best_split<R: Rng>(
        &self,
        cols: &[Vec<u32>],
        n_rows: usize,
        g: f64,
        h: f64,
        rng: &mut R,
    ) -> Option<Candidate> {
        let (lambda, gamma) = (self.cfg.lambda, self.cfg.gamma);
        let mut positions: Vec<usize> = match self.cfg.features_per_split {
            Some(k) if k < self.features.len() => sample(rng, self.features.len(), k).into_vec(),
            _ => (0..self.features.len()).collect(),
        };
        positions.sort_unstable();
        // Rounding noise can make a pointless split look marginally positive.
        let parent = g * g / (h + lambda).max(super::HESS_FLOOR);
        let min_gain = 1e-12 * (1.0 + parent.abs());
        let mut best: Option<Candidate> = None;
        for pos in positions {
            let feature = self.features[pos];
            let col = &cols[pos];
            if col.len() < 2 {
                continue;
            }
            let (og, oh) = col.iter().fold((0.0, 0.0), |(a, b), &r| {
                (a + self.grad[r as usize], b + self.hess[r as usize])
            });
            let (mg, mh) = (g - og, h - oh);
            let has_missing = col.len() < n_rows;
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..col.len() - 1 {
                let r = col[i] as usize;
                gl += self.grad[r];
                hl += self.hess[r];
                let v = self.x.get(r, feature);
                let next = self.x.get(col[i + 1] as usize, feature);
                if !(v < next) {
                    continue;
                }
                let mid = v + (next - v) / 2.0;
                let threshold = if mid > v { mid } else { next };
                let (gain, default_left) = if has_missing {
                    let right = split_gain(gl, hl, g - gl, h - hl, lambda, gamma);
                    let left = split_gain(gl + mg, hl + mh, og - gl, oh - hl, lambda, gamma);
                    if left > right {
                        (left, true)
                    } else {
                        (right, false)
                    }
                } else {
                    // No missing rows here: send unseen missing values to the heavier side.
                    (
                        split_gain(gl, hl, g - gl, h - hl, lambda, gamma),
                        hl >= h - hl,
                    )
                };
                if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        gain,
                        feature,
                        threshold,
                        default_left,
                    });
                }
            }
        }
        best
    }
}
