//! Exact Shapley attributions for boosted trees (path-dependent TreeSHAP)
//! and global importance from mean absolute attributions.
//!
//! Attributions explain the raw margin. Node covers come from routing a
//! background sample through each tree; a node with zero cover splits its
//! weight evenly between children. The values are associational, not causal.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};
use crate::matrix::Matrix;
use crate::trees::{DecisionTree, GbdtModel, Node};

pub const BACKGROUND_CAP: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Expected raw margin over the background.
    pub base_value: f64,
    pub values: Vec<f64>,
    /// Raw margin of the explained row.
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs_attribution: f64,
}

/// Up to `cap` rows drawn without replacement, kept in input order.
pub fn background_sample(x: &Matrix, cap: usize, seed: u64) -> Matrix {
    if x.n_rows() <= cap {
        return x.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, x.n_rows(), cap).into_vec();
    idx.sort_unstable();
    x.select_rows(&idx)
}

/// Fraction of a node's weight passed to `child`.
#[inline]
pub fn child_fraction(covers: &[f64], node: usize, child: usize) -> f64 {
    if covers[node] > 0.0 {
        covers[child] / covers[node]
    } else {
        0.5
    }
}

/// Per-tree node covers for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeExplainer {
    pub covers: Vec<Vec<f64>>,
    expected: Vec<f64>,
}

fn expected_value(tree: &DecisionTree, covers: &[f64], node: usize) -> f64 {
    match tree.nodes[node] {
        Node::Leaf { weight } => weight,
        Node::Split { left, right, .. } => {
            child_fraction(covers, node, left) * expected_value(tree, covers, left)
                + child_fraction(covers, node, right) * expected_value(tree, covers, right)
        }
    }
}

impl TreeExplainer {
    pub fn new(model: &GbdtModel, background: &Matrix) -> Result<Self> {
        if background.n_rows() == 0 {
            return Err(TriageError::domain("background sample is empty"));
        }
        if background.n_cols() != model.n_features() {
            return Err(TriageError::schema(format!(
                "background has {} features, model expects {}",
                background.n_cols(),
                model.n_features()
            )));
        }
        let covers = model
            .trees
            .iter()
            .map(|t| {
                let mut c = vec![0.0; t.nodes.len()];
                for row in background.rows_iter() {
                    let mut n = 0;
                    c[0] += 1.0;
                    while let Some(next) = t.next_node(n, row) {
                        c[next] += 1.0;
                        n = next;
                    }
                }
                c
            })
            .collect();
        Self::from_covers(model, covers)
    }

    pub fn from_covers(model: &GbdtModel, covers: Vec<Vec<f64>>) -> Result<Self> {
        if covers.len() != model.trees.len()
            || covers
                .iter()
                .zip(&model.trees)
                .any(|(c, t)| c.len() != t.nodes.len())
        {
            return Err(TriageError::schema("covers do not match the model's trees"));
        }
        if covers
            .iter()
            .flatten()
            .any(|c| !(c.is_finite() && *c >= 0.0))
        {
            return Err(TriageError::domain(
                "covers must be finite and non-negative",
            ));
        }
        let expected = model
            .trees
            .iter()
            .zip(&covers)
            .map(|(t, c)| expected_value(t, c, 0))
            .collect();
        Ok(Self { covers, expected })
    }

    pub fn base_value(&self, model: &GbdtModel) -> f64 {
        self.expected.iter().fold(model.base_score, |a, e| a + e)
    }

    pub fn explain_row(&self, model: &GbdtModel, row: &[f64]) -> Result<Attribution> {
        if row.len() != model.n_features() {
            return Err(TriageError::schema(format!(
                "row has {} features, model expects {}",
                row.len(),
                model.n_features()
            )));
        }
        let mut phi = vec![0.0; row.len()];
        let mut path = Vec::with_capacity(64);
        for (tree, covers) in model.trees.iter().zip(&self.covers) {
            path.clear();
            recurse(tree, covers, row, 0, &path, 1.0, 1.0, None, &mut phi);
        }
        Ok(Attribution {
            base_value: self.base_value(model),
            values: phi,
            prediction: model.predict_margin_row(row)?,
        })
    }

    pub fn explain(&self, model: &GbdtModel, x: &Matrix) -> Result<Vec<Attribution>> {
        (0..x.n_rows())
            .into_par_iter()
            .map(|r| self.explain_row(model, x.row(r)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let PathElement { one, zero, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElement { one, zero, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &DecisionTree,
    covers: &[f64],
    row: &[f64],
    node: usize,
    parent: &[PathElement],
    zero: f64,
    one: f64,
    feature: Option<usize>,
    phi: &mut [f64],
) {
    let mut path = parent.to_vec();
    extend(&mut path, zero, one, feature);
    match tree.nodes[node] {
        Node::Leaf { weight } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                if let Some(f) = el.feature {
                    phi[f] += w * (el.one - el.zero) * weight;
                }
            }
        }
        Node::Split {
            feature: split,
            left,
            right,
            ..
        } => {
            let hot = tree.next_node(node, row).expect("split node");
            let cold = if hot == left { right } else { left };
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = path.iter().position(|e| e.feature == Some(split)) {
                incoming_zero = path[k].zero;
                incoming_one = path[k].one;
                unwind(&mut path, k);
            }
            let hot_zero = child_fraction(covers, node, hot) * incoming_zero;
            let cold_zero = child_fraction(covers, node, cold) * incoming_zero;
            // a branch with both fractions zero adds nothing to any coalition
            if hot_zero != 0.0 || incoming_one != 0.0 {
                recurse(
                    tree,
                    covers,
                    row,
                    hot,
                    &path,
                    hot_zero,
                    incoming_one,
                    Some(split),
                    phi,
                );
            }
            if cold_zero != 0.0 {
                recurse(
                    tree,
                    covers,
                    row,
                    cold,
                    &path,
                    cold_zero,
                    0.0,
                    Some(split),
                    phi,
                );
            }
        }
    }
}

/// Attribution of one row with covers from `background`.
pub fn tree_shap(model: &GbdtModel, row: &[f64], background: &Matrix) -> Result<Attribution> {
    TreeExplainer::new(model, background)?.explain_row(model, row)
}

/// Features ranked by mean |attribution| over the rows of `x`, descending;
/// ties keep feature order.
pub fn global_importance(
    explainer: &TreeExplainer,
    model: &GbdtModel,
    x: &Matrix,
) -> Result<Vec<FeatureImportance>> {
    if x.n_rows() == 0 {
        return Err(TriageError::domain("cannot rank importance over zero rows"));
    }
    let attrs = explainer.explain(model, x)?;
    let p = model.n_features();
    let mut sums = vec![0.0; p];
    for a in &attrs {
        for (s, v) in sums.iter_mut().zip(&a.values) {
            *s += v.abs();
        }
    }
    let mut ranked: Vec<FeatureImportance> = model
        .feature_names
        .iter()
        .zip(sums)
        .map(|(name, s)| FeatureImportance {
            feature: name.clone(),
            mean_abs_attribution: s / x.n_rows() as f64,
        })
        .collect();
    ranked.sort_by(|a, b| b.mean_abs_attribution.total_cmp(&a.mean_abs_attribution));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{gbdt_fit, GbdtParams, Loss};

    fn stump_model(left: f64, right: f64, n_features: usize) -> GbdtModel {
        GbdtModel {
            params: GbdtParams::default(),
            loss: Loss::Squared,
            base_score: 0.0,
            trees: vec![DecisionTree {
                nodes: vec![
                    Node::Split {
                        feature: 0,
                        threshold: 0.5,
                        default_left: true,
                        left: 1,
                        right: 2,
                    },
                    Node::Leaf { weight: left },
                    Node::Leaf { weight: right },
                ],
            }],
            feature_names: (0..n_features).map(|i| format!("f{i}")).collect(),
        }
    }

    #[test]
    fn single_leaf_tree_attributes_nothing() {
        let mut m = stump_model(0.0, 0.0, 2);
        m.trees = vec![DecisionTree::leaf(1.5)];
        let bg = Matrix::from_rows(&[vec![0.0, 0.0]], 2).unwrap();
        let a = tree_shap(&m, &[3.0, 4.0], &bg).unwrap();
        assert_eq!(a.values, vec![0.0, 0.0]);
        assert_eq!(a.base_value, 1.5);
    }

    #[test]
    fn stump_by_hand() {
        let m = stump_model(-1.0, 3.0, 2);
        let bg = Matrix::from_rows(&[vec![0.0, 7.0], vec![1.0, 8.0]], 2).unwrap();
        let a = tree_shap(&m, &[1.0, 0.0], &bg).unwrap();
        assert!((a.base_value - 1.0).abs() < 1e-15);
        assert!((a.values[0] - 2.0).abs() < 1e-15);
        assert_eq!(a.values[1], 0.0);
        assert_eq!(a.prediction, 3.0);
    }

    #[test]
    fn zero_cover_child_is_harmless() {
        let m = stump_model(-1.0, 3.0, 1);
        let bg = Matrix::from_rows(&[vec![0.0], vec![0.2]], 1).unwrap();
        let a = tree_shap(&m, &[1.0], &bg).unwrap();
        assert!((a.base_value + 1.0).abs() < 1e-15);
        assert!((a.base_value + a.values[0] - a.prediction).abs() < 1e-12);
    }

    #[test]
    fn local_accuracy_on_trained_model() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                vec![
                    (i % 7) as f64,
                    (i % 5) as f64,
                    if i % 4 == 0 { f64::NAN } else { i as f64 },
                ]
            })
            .collect();
        let x = Matrix::from_rows(&rows, 3).unwrap();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| if r[0] + r[1] > 5.0 { 1.0 } else { 0.0 })
            .collect();
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let m = gbdt_fit(
            &x,
            &y,
            &GbdtParams {
                n_estimators: 20,
                max_depth: 4,
                ..Default::default()
            },
            Loss::Logistic,
            &names,
            1,
        )
        .unwrap();
        let ex = TreeExplainer::new(&m, &background_sample(&x, 25, 3)).unwrap();
        for a in ex.explain(&m, &x).unwrap() {
            let total = a.base_value + a.values.iter().sum::<f64>();
            assert!((total - a.prediction).abs() < 1e-9);
        }
        let imp = global_importance(&ex, &m, &x).unwrap();
        assert!(imp
            .windows(2)
            .all(|w| w[0].mean_abs_attribution >= w[1].mean_abs_attribution));
    }

    #[test]
    fn one_feature_model_ranks_it_first() {
        let m = stump_model(0.0, 1.0, 3);
        let x = Matrix::from_rows(&[vec![0.0, 5.0, 5.0], vec![1.0, 6.0, 6.0]], 3).unwrap();
        let ex = TreeExplainer::new(&m, &x).unwrap();
        let imp = global_importance(&ex, &m, &x).unwrap();
        assert_eq!(imp[0].feature, "f0");
        assert_eq!(imp[1].mean_abs_attribution, 0.0);
        assert_eq!(
            (imp[1].feature.as_str(), imp[2].feature.as_str()),
            ("f1", "f2")
        );
    }

    #[test]
    fn background_cap_is_seeded() {
        let x = Matrix::from_rows(&(0..50).map(|i| vec![i as f64]).collect::<Vec<_>>(), 1).unwrap();
        let a = background_sample(&x, 10, 1);
        assert_eq!(a.n_rows(), 10);
        assert!(a.bit_eq(&background_sample(&x, 10, 1)));
        assert_eq!(background_sample(&x, 100, 1).n_rows(), 50);
    }
}
