//! Impute, rebalance and boost, fitted on training rows only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};
use crate::eval::{roc_auc, Task};
use crate::folds::{kfold, stratified_kfold};
use crate::impute::{self, ImputerKind, ImputerModel, SoftSvdConfig};
use crate::matrix::Matrix;
use crate::rebalance::{smote_resample, RowOrigin, SmoteConfig};
use crate::trees::{gbdt_fit, GbdtModel, GbdtParams, Loss};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub imputer: ImputerKind,
    #[serde(default)]
    pub soft_svd: SoftSvdConfig,
    /// Applied to classification training data only.
    #[serde(default)]
    pub smote: Option<SmoteConfig>,
    pub params: GbdtParams,
    pub task: Task,
}

impl PipelineConfig {
    pub fn new(task: Task, imputer: ImputerKind, params: GbdtParams) -> Self {
        Self {
            imputer,
            soft_svd: SoftSvdConfig::default(),
            smote: None,
            params,
            task,
        }
    }

    pub fn loss(&self) -> Loss {
        match self.task {
            Task::Classify => Loss::Logistic,
            Task::Regress => Loss::Squared,
        }
    }

    pub fn fit(
        &self,
        x: &Matrix,
        y: &[f64],
        feature_names: &[String],
        seed: u64,
    ) -> Result<FittedPipeline> {
        Ok(self.fit_audited(x, y, feature_names, seed)?.0)
    }

    /// Also returns the provenance of every row the booster saw, as indices
    /// into `x`'s rows.
    pub fn fit_audited(
        &self,
        x: &Matrix,
        y: &[f64],
        feature_names: &[String],
        seed: u64,
    ) -> Result<(FittedPipeline, Vec<RowOrigin>)> {
        let fitted = impute::fit_with(self.imputer, &self.soft_svd, x)?;
        let xi = fitted.model.transform(x)?;
        let (train_x, train_y, origin) = match (&self.smote, self.task) {
            (Some(smote), Task::Classify) => {
                let cfg = SmoteConfig {
                    seed: smote.seed.wrapping_add(seed),
                    ..smote.clone()
                };
                if xi.has_missing() {
                    return Err(TriageError::domain(
                        "SMOTE needs complete rows; choose an imputer other than passthrough",
                    ));
                }
                let r = smote_resample(&xi, y, &cfg)?;
                (r.x, r.y, r.origin)
            }
            _ => (
                xi,
                y.to_vec(),
                (0..y.len()).map(RowOrigin::Original).collect(),
            ),
        };
        let model = gbdt_fit(
            &train_x,
            &train_y,
            &self.params,
            self.loss(),
            feature_names,
            seed,
        )?;
        Ok((
            FittedPipeline {
                imputer: fitted.model,
                model,
                warnings: fitted.warnings,
            },
            origin,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub imputer: ImputerModel,
    pub model: GbdtModel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FittedPipeline {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        self.imputer.transform(x)
    }

    /// Probabilities for classifiers, target estimates for regressors.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.model.predict(&self.imputer.transform(x)?)
    }

    pub fn predict_margin(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.model.predict_margin(&self.imputer.transform(x)?)
    }
}

/// Per-fold record of which rows reached the booster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAudit {
    pub fold: usize,
    pub train_rows: usize,
    pub validation_rows: usize,
    pub synthetic_rows: usize,
    /// Validation rows that appeared in the training output, as an original
    /// or as either parent of a synthetic row. Always empty unless broken.
    pub leaked: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub mean_score: f64,
    pub fold_scores: Vec<f64>,
    pub audit: Vec<FoldAudit>,
}

/// K-fold score of the pipeline: ROC AUC for classification, negative RMSE
/// for regression. Every fitted step sees training-fold rows only.
pub fn cross_validate(
    cfg: &PipelineConfig,
    x: &Matrix,
    y: &[f64],
    feature_names: &[String],
    k: usize,
    seed: u64,
) -> Result<CvOutcome> {
    if x.n_rows() != y.len() {
        return Err(TriageError::schema("rows and targets differ in length"));
    }
    let folds = match cfg.task {
        Task::Classify => stratified_kfold(y, k, seed)?,
        Task::Regress => kfold(y.len(), k, seed)?,
    };
    let results: Vec<Result<(f64, FoldAudit)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train, valid) = folds.split(f);
            let tx = x.select_rows(&train);
            let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let fold_seed = seed.wrapping_add(f as u64);
            let (pipe, origin) = cfg.fit_audited(&tx, &ty, feature_names, fold_seed)?;
            let mut in_valid = vec![false; y.len()];
            valid.iter().for_each(|&i| in_valid[i] = true);
            let mut leaked: Vec<usize> = origin
                .iter()
                .flat_map(|o| match *o {
                    RowOrigin::Original(i) => vec![train[i]],
                    RowOrigin::Synthetic { base, neighbor, .. } => {
                        vec![train[base], train[neighbor]]
                    }
                })
                .filter(|&g| in_valid[g])
                .collect();
            leaked.sort_unstable();
            leaked.dedup();
            let audit = FoldAudit {
                fold: f,
                train_rows: train.len(),
                validation_rows: valid.len(),
                synthetic_rows: origin
                    .iter()
                    .filter(|o| matches!(o, RowOrigin::Synthetic { .. }))
                    .count(),
                leaked,
            };
            let pred = pipe.predict(&x.select_rows(&valid))?;
            let vy: Vec<f64> = valid.iter().map(|&i| y[i]).collect();
            let score = match cfg.task {
                Task::Classify => roc_auc(&pred, &vy)?,
                Task::Regress => -(pred
                    .iter()
                    .zip(&vy)
                    .map(|(p, t)| (p - t).powi(2))
                    .sum::<f64>()
                    / vy.len() as f64)
                    .sqrt(),
            };
            Ok((score, audit))
        })
        .collect();
    let mut fold_scores = Vec::with_capacity(k);
    let mut audit = Vec::with_capacity(k);
    for r in results {
        let (s, a) = r?;
        fold_scores.push(s);
        audit.push(a);
    }
    let mean_score = fold_scores.iter().sum::<f64>() / k as f64;
    Ok(CvOutcome {
        mean_score,
        fold_scores,
        audit,
    })
}
