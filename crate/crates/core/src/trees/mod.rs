//! Sparsity-aware decision trees, gradient boosting and bagged forests.
//!
//! Trees split on `value < threshold`; rows whose split feature is missing
//! follow the node's learned default direction.

mod forest;
mod gbdt;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};

pub use forest::{rf_fit, ForestModel, MaxFeatures, RfParams};
pub use gbdt::{gbdt_fit, GbdtModel};
pub use tree::{fit_tree, DecisionTree, Node, SortedColumns, TreeConfig};

/// Denominator floor for `H + lambda`.
pub const HESS_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Logistic,
    Squared,
}

impl Loss {
    /// First and second derivative of the loss at `margin` for target `y`.
    #[inline]
    pub fn grad_hess(self, margin: f64, y: f64) -> (f64, f64) {
        match self {
            Loss::Squared => (margin - y, 1.0),
            Loss::Logistic => {
                let p = sigmoid(margin);
                (p - y, p * (1.0 - p))
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Boosting hyperparameters. `subsample` is the fraction of features
/// drawn (without replacement) for each tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub eta: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub n_estimators: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            eta: 0.3,
            gamma: 0.0,
            max_depth: 6,
            subsample: 1.0,
            lambda: 1.0,
            alpha: 0.0,
            n_estimators: 100,
        }
    }
}

/// Tuning intervals: (name, lower, upper).
pub const TUNING_BOUNDS: [(&str, f64, f64); 7] = [
    ("eta", 0.01, 1.0),
    ("gamma", 0.0, 100.0),
    ("max_depth", 1.0, 9.0),
    ("subsample", 0.5, 1.0),
    ("lambda", 1.0, 100.0),
    ("alpha", 0.0, 100.0),
    ("n_estimators", 10.0, 200.0),
];

impl GbdtParams {
    /// Checks values are usable at all; manual settings may leave the tuning intervals.
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.eta,
            self.gamma,
            self.subsample,
            self.lambda,
            self.alpha,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(TriageError::domain("boosting parameters must be finite"));
        }
        if self.eta <= 0.0 {
            return Err(TriageError::domain("eta must be positive"));
        }
        if self.gamma < 0.0 || self.lambda < 0.0 || self.alpha < 0.0 {
            return Err(TriageError::domain(
                "gamma, lambda and alpha must be non-negative",
            ));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(TriageError::domain("subsample must lie in (0, 1]"));
        }
        if self.max_depth == 0 {
            return Err(TriageError::domain("max_depth must be at least 1"));
        }
        Ok(())
    }

    pub fn within_tuning_bounds(&self) -> bool {
        self.as_named()
            .iter()
            .zip(TUNING_BOUNDS.iter())
            .all(|((_, v), (_, lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn as_named(&self) -> [(&'static str, f64); 7] {
        [
            ("eta", self.eta),
            ("gamma", self.gamma),
            ("max_depth", self.max_depth as f64),
            ("subsample", self.subsample),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("n_estimators", self.n_estimators as f64),
        ]
    }

    /// Builds parameters from a name → value map; integer fields are rounded.
    pub fn from_named<'a>(values: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let mut p = GbdtParams::default();
        for (name, v) in values {
            match name {
                "eta" => p.eta = v,
                "gamma" => p.gamma = v,
                "max_depth" => p.max_depth = v.round().max(0.0) as usize,
                "subsample" => p.subsample = v,
                "lambda" => p.lambda = v,
                "alpha" => p.alpha = v,
                "n_estimators" => p.n_estimators = v.round().max(0.0) as usize,
                other => {
                    return Err(TriageError::schema(format!(
                        "unknown boosting parameter {other:?}"
                    )))
                }
            }
        }
        p.validate()?;
        Ok(p)
    }
}

/// Second-order split gain: the regularised objective reduction of splitting
/// a node into (GL, HL) and (GR, HR), minus `gamma`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda).max(HESS_FLOOR);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Minimiser of `G w + (H + lambda) w^2 / 2 + alpha |w|`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64, alpha: f64) -> f64 {
    let shrunk = (g.abs() - alpha).max(0.0);
    if shrunk == 0.0 {
        return 0.0;
    }
    -g.signum() * shrunk / (h + lambda).max(HESS_FLOOR)
}
