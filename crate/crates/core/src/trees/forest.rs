use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_presorted, SortedColumns, TreeConfig};
use super::DecisionTree;
use crate::error::{Result, TriageError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
        }
    }
}

/// Bagged regression trees; leaves hold the mean target of their rows, so
/// 0/1 targets give class-1 frequencies and averaging is a soft vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
}

pub fn rf_fit(x: &Matrix, y: &[f64], params: &RfParams) -> Result<ForestModel> {
    let n = x.n_rows();
    if n == 0 || x.n_cols() == 0 {
        return Err(TriageError::domain("cannot fit a forest on empty data"));
    }
    if y.len() != n {
        return Err(TriageError::schema("targets and rows differ in length"));
    }
    if params.n_trees == 0 || params.max_depth == 0 {
        return Err(TriageError::domain(
            "forest needs at least one tree of depth >= 1",
        ));
    }
    let p = x.n_cols();
    let cfg = TreeConfig {
        max_depth: params.max_depth,
        lambda: 0.0,
        gamma: 0.0,
        alpha: 0.0,
        eta: 1.0,
        features_per_split: match params.max_features {
            MaxFeatures::Sqrt => Some(((p as f64).sqrt().round() as usize).max(1)),
            MaxFeatures::All => None,
        },
    };
    // Squared loss at a zero margin: gradient -y, unit hessian, so each leaf is a mean.
    let grad: Vec<f64> = y.iter().map(|v| -v).collect();
    let hess = vec![1.0; n];
    let sorted = SortedColumns::new(x);
    let all: Vec<usize> = (0..p).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let trees = (0..params.n_trees)
        .map(|_| {
            let rows: Vec<u32> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n as u32)).collect()
            } else {
                (0..n as u32).collect()
            };
            fit_tree_presorted(x, &sorted, &rows, &grad, &hess, &cfg, &all, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_features: p,
    })
}

impl ForestModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(TriageError::schema(format!(
                "forest expects {} features, got {}",
                self.n_features,
                x.n_cols()
            )));
        }
        Ok(x.rows_iter().map(|r| self.predict_row(r)).collect())
    }
}
