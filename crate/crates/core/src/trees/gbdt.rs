use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_presorted, SortedColumns, TreeConfig};
use super::{sigmoid, DecisionTree, GbdtParams, Loss};
use crate::error::{Result, TriageError};
use crate::matrix::Matrix;

/// Additive tree ensemble. The learning rate is already folded into leaf
/// weights, so the raw margin is `base_score + sum of tree outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub params: GbdtParams,
    pub loss: Loss,
    pub base_score: f64,
    pub trees: Vec<DecisionTree>,
    pub feature_names: Vec<String>,
}

pub fn gbdt_fit(
    x: &Matrix,
    y: &[f64],
    params: &GbdtParams,
    loss: Loss,
    feature_names: &[String],
    seed: u64,
) -> Result<GbdtModel> {
    params.validate()?;
    let n = x.n_rows();
    if n == 0 || x.n_cols() == 0 {
        return Err(TriageError::domain("cannot fit boosting on empty data"));
    }
    if y.len() != n {
        return Err(TriageError::schema("targets and rows differ in length"));
    }
    if feature_names.len() != x.n_cols() {
        return Err(TriageError::schema(
            "feature names and columns differ in length",
        ));
    }
    match loss {
        Loss::Logistic if y.iter().any(|&v| v != 0.0 && v != 1.0) => {
            return Err(TriageError::domain("logistic loss needs 0/1 targets"))
        }
        Loss::Squared if y.iter().any(|v| !v.is_finite()) => {
            return Err(TriageError::domain("squared loss needs finite targets"))
        }
        _ => {}
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let base_score = match loss {
        Loss::Squared => mean,
        Loss::Logistic => {
            let p = mean.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
    };

    let p = x.n_cols();
    let per_tree = ((params.subsample * p as f64).ceil() as usize).clamp(1, p);
    let cfg = TreeConfig::from_params(params);
    let sorted = SortedColumns::new(x);
    let rows: Vec<u32> = (0..n as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margins = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    for _ in 0..params.n_estimators {
        for i in 0..n {
            (grad[i], hess[i]) = loss.grad_hess(margins[i], y[i]);
        }
        let mut subset: Vec<usize> = if per_tree == p {
            (0..p).collect()
        } else {
            sample(&mut rng, p, per_tree).into_vec()
        };
        subset.sort_unstable();
        let tree = fit_tree_presorted(x, &sorted, &rows, &grad, &hess, &cfg, &subset, &mut rng);
        for (i, m) in margins.iter_mut().enumerate() {
            *m += tree.predict_row(x.row(i));
        }
        trees.push(tree);
    }
    Ok(GbdtModel {
        params: params.clone(),
        loss,
        base_score,
        trees,
        feature_names: feature_names.to_vec(),
    })
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n_features() {
            return Err(TriageError::schema(format!(
                "model expects {} features, got {width}",
                self.n_features()
            )));
        }
        Ok(())
    }

    /// Raw margin using only the first `n_trees` trees.
    pub fn margin_with_trees(&self, row: &[f64], n_trees: usize) -> f64 {
        self.trees[..n_trees.min(self.trees.len())]
            .iter()
            .fold(self.base_score, |acc, t| acc + t.predict_row(row))
    }

    pub fn predict_margin_row(&self, row: &[f64]) -> Result<f64> {
        self.check_width(row.len())?;
        Ok(self.margin_with_trees(row, self.trees.len()))
    }

    /// Probability for logistic loss, the margin itself for squared loss.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let m = self.predict_margin_row(row)?;
        Ok(self.link(m))
    }

    pub fn link(&self, margin: f64) -> f64 {
        match self.loss {
            Loss::Logistic => sigmoid(margin),
            Loss::Squared => margin,
        }
    }

    pub fn predict_margin(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_width(x.n_cols())?;
        Ok(x.rows_iter()
            .map(|r| self.margin_with_trees(r, self.trees.len()))
            .collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self
            .predict_margin(x)?
            .into_iter()
            .map(|m| self.link(m))
            .collect())
    }
}
