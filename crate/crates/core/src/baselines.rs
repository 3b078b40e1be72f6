//! Untuned screening learners and trivial baselines, plus the K-fold
//! screening harness that ranks them.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};
use crate::eval::{classify_metrics, regress_metrics, roc_auc, Task};
use crate::folds::{kfold, stratified_kfold};
use crate::impute::{self, ImputerKind};
use crate::linalg::Cholesky;
use crate::matrix::{Matrix, Standardizer};
use crate::trees::{gbdt_fit, rf_fit, sigmoid, GbdtParams, Loss, MaxFeatures, RfParams};

const RIDGE_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    GaussianNb,
    BernoulliNb,
    Lda,
    Qda,
    Logistic { l1: f64, l2: f64 },
    Linear,
    Huber { delta: f64 },
    DecisionTree,
    RandomForest,
    Gbdt,
    Coin,
    Mean,
}

impl Family {
    pub fn supports(&self, task: Task) -> bool {
        use Family::*;
        match self {
            GaussianNb | BernoulliNb | Lda | Qda | Logistic { .. } | Coin => task == Task::Classify,
            Linear | Huber { .. } | Mean => task == Task::Regress,
            DecisionTree | RandomForest | Gbdt => true,
        }
    }

    /// Tree families route missing cells themselves; the rest need imputed input.
    pub fn accepts_missing(&self) -> bool {
        matches!(
            self,
            Family::DecisionTree
                | Family::RandomForest
                | Family::Gbdt
                | Family::Coin
                | Family::Mean
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSpec {
    pub name: String,
    pub task: Task,
    pub family: Family,
}

impl CandidateSpec {
    pub fn new(name: impl Into<String>, task: Task, family: Family) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            task,
            family,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.family.supports(self.task) {
            return Err(TriageError::domain(format!(
                "candidate {:?} uses a family that cannot do {:?}",
                self.name, self.task
            )));
        }
        match self.family {
            Family::Logistic { l1, l2 }
                if !(l1 >= 0.0 && l2 >= 0.0 && l1.is_finite() && l2.is_finite()) =>
            {
                Err(TriageError::domain(
                    "logistic penalties must be finite and >= 0",
                ))
            }
            Family::Huber { delta } if !(delta > 0.0 && delta.is_finite()) => {
                Err(TriageError::domain("huber delta must be > 0"))
            }
            _ => Ok(()),
        }
    }
}

/// The standard line-up for a task.
pub fn default_candidates(task: Task) -> Vec<CandidateSpec> {
    let list: &[(&str, Family)] = match task {
        Task::Classify => &[
            ("Gaussian Naive Bayes", Family::GaussianNb),
            ("Bernoulli Naive Bayes", Family::BernoulliNb),
            ("Linear Discriminant Analysis", Family::Lda),
            ("Quadratic Discriminant Analysis", Family::Qda),
            (
                "Logistic Regression",
                Family::Logistic { l1: 0.0, l2: 0.01 },
            ),
            ("Decision Tree", Family::DecisionTree),
            ("Random Forest", Family::RandomForest),
            ("Gradient Boosting", Family::Gbdt),
            ("Coin", Family::Coin),
        ],
        Task::Regress => &[
            ("Linear Regression", Family::Linear),
            ("Huber Regression", Family::Huber { delta: 1.35 }),
            ("Decision Tree", Family::DecisionTree),
            ("Random Forest", Family::RandomForest),
            ("Gradient Boosting", Family::Gbdt),
            ("Mean", Family::Mean),
        ],
    };
    list.iter()
        .map(|&(name, family)| CandidateSpec {
            name: name.to_string(),
            task,
            family,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Class-1 probability for classifiers, target estimate for regressors.
    pub scores: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Fit `spec` on the training rows and score the test rows.
pub fn fit_predict(
    spec: &CandidateSpec,
    train_x: &Matrix,
    train_y: &[f64],
    test_x: &Matrix,
    seed: u64,
) -> Result<Prediction> {
    spec.validate()?;
    if train_x.n_rows() != train_y.len() {
        return Err(TriageError::schema(
            "training rows and targets differ in length",
        ));
    }
    if train_x.n_rows() == 0 {
        return Err(TriageError::domain("no training rows"));
    }
    if train_x.n_cols() != test_x.n_cols() {
        return Err(TriageError::schema("train and test widths differ"));
    }
    if !spec.family.accepts_missing() {
        train_x.ensure_dense("training matrix")?;
        test_x.ensure_dense("test matrix")?;
    }
    if spec.task == Task::Classify && train_y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(TriageError::domain("classification targets must be 0 or 1"));
    }
    let mut warnings = Vec::new();
    let scores = match spec.family {
        Family::GaussianNb => gaussian_nb(train_x, train_y, test_x)?,
        Family::BernoulliNb => bernoulli_nb(train_x, train_y, test_x)?,
        Family::Lda => discriminant(train_x, train_y, test_x, false, &mut warnings)?,
        Family::Qda => discriminant(train_x, train_y, test_x, true, &mut warnings)?,
        Family::Logistic { l1, l2 } => {
            let model = LogisticModel::fit(train_x, train_y, l1, l2)?;
            test_x.rows_iter().map(|r| model.predict_row(r)).collect()
        }
        Family::Linear => linear(train_x, train_y, test_x, &mut warnings)?,
        Family::Huber { delta } => huber(train_x, train_y, test_x, delta, &mut warnings)?,
        Family::DecisionTree => {
            let params = RfParams {
                n_trees: 1,
                max_depth: 6,
                bootstrap: false,
                max_features: MaxFeatures::All,
                seed,
            };
            rf_fit(train_x, train_y, &params)?.predict(test_x)?
        }
        Family::RandomForest => {
            let params = RfParams {
                seed,
                ..RfParams::default()
            };
            rf_fit(train_x, train_y, &params)?.predict(test_x)?
        }
        Family::Gbdt => {
            let loss = match spec.task {
                Task::Classify => Loss::Logistic,
                Task::Regress => Loss::Squared,
            };
            let names: Vec<String> = (0..train_x.n_cols()).map(|c| format!("f{c}")).collect();
            gbdt_fit(train_x, train_y, &GbdtParams::default(), loss, &names, seed)?
                .predict(test_x)?
        }
        Family::Coin => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..test_x.n_rows()).map(|_| rng.random::<f64>()).collect()
        }
        Family::Mean => {
            let m = train_y.iter().sum::<f64>() / train_y.len() as f64;
            vec![m; test_x.n_rows()]
        }
    };
    Ok(Prediction { scores, warnings })
}

fn split_classes(x: &Matrix, y: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1.0).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(TriageError::Degenerate(format!(
            "training data has a single class ({} rows)",
            x.n_rows()
        )));
    }
    Ok((neg, pos))
}

fn column_moments(x: &Matrix, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let p = x.n_cols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for &r in rows {
        for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

fn two_class_prob(log0: f64, log1: f64) -> f64 {
    sigmoid(log1 - log0)
}

/// Gaussian naive Bayes with empirical priors. Variances get 1e-9 times the
/// largest feature variance added.
fn gaussian_nb(x: &Matrix, y: &[f64], test: &Matrix) -> Result<Vec<f64>> {
    let (neg, pos) = split_classes(x, y)?;
    let all: Vec<usize> = (0..x.n_rows()).collect();
    let (_, total_var) = column_moments(x, &all);
    let eps = 1e-9 * total_var.iter().cloned().fold(0.0, f64::max);
    let eps = if eps > 0.0 { eps } else { 1e-9 };
    let classes: Vec<(f64, Vec<f64>, Vec<f64>)> = [&neg, &pos]
        .iter()
        .map(|rows| {
            let (m, v) = column_moments(x, rows);
            let prior = (rows.len() as f64 / y.len() as f64).ln();
            (prior, m, v.into_iter().map(|v| v + eps).collect())
        })
        .collect();
    let log_joint = |row: &[f64], (prior, mean, var): &(f64, Vec<f64>, Vec<f64>)| -> f64 {
        prior
            + row
                .iter()
                .zip(mean)
                .zip(var)
                .map(|((v, m), s2)| {
                    -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - (v - m) * (v - m) / (2.0 * s2)
                })
                .sum::<f64>()
    };
    Ok(test
        .rows_iter()
        .map(|r| two_class_prob(log_joint(r, &classes[0]), log_joint(r, &classes[1])))
        .collect())
}

/// Bernoulli naive Bayes on features binarized at their training median,
/// Laplace smoothing 1.
fn bernoulli_nb(x: &Matrix, y: &[f64], test: &Matrix) -> Result<Vec<f64>> {
    let (neg, pos) = split_classes(x, y)?;
    let thresholds: Vec<f64> = (0..x.n_cols())
        .map(|c| {
            let mut v = x.observed_column(c);
            v.sort_by(f64::total_cmp);
            crate::dataset::quantile_linear(&v, 0.5)
        })
        .collect();
    let class_params = |rows: &[usize]| -> (f64, Vec<f64>) {
        let n = rows.len() as f64;
        let theta = (0..x.n_cols())
            .map(|c| {
                let on = rows
                    .iter()
                    .filter(|&&r| x.get(r, c) > thresholds[c])
                    .count() as f64;
                (on + 1.0) / (n + 2.0)
            })
            .collect();
        ((n / y.len() as f64).ln(), theta)
    };
    let params = [class_params(&neg), class_params(&pos)];
    let log_joint = |row: &[f64], (prior, theta): &(f64, Vec<f64>)| -> f64 {
        prior
            + row
                .iter()
                .zip(&thresholds)
                .zip(theta)
                .map(|((v, t), th)| if v > t { th.ln() } else { (1.0 - th).ln() })
                .sum::<f64>()
    };
    Ok(test
        .rows_iter()
        .map(|r| two_class_prob(log_joint(r, &params[0]), log_joint(r, &params[1])))
        .collect())
}

fn covariance(x: &Matrix, rows: &[usize], mean: &[f64], acc: &mut [f64]) {
    let p = mean.len();
    let mut d = vec![0.0; p];
    for &r in rows {
        for ((di, v), m) in d.iter_mut().zip(x.row(r)).zip(mean) {
            *di = v - m;
        }
        for i in 0..p {
            for j in 0..=i {
                acc[i * p + j] += d[i] * d[j];
            }
        }
    }
}

fn symmetrize(a: &mut [f64], p: usize, scale: f64) {
    for i in 0..p {
        for j in 0..=i {
            let v = a[i * p + j] * scale;
            a[i * p + j] = v;
            a[j * p + i] = v;
        }
    }
}

fn factor_with_ridge(
    mut a: Vec<f64>,
    p: usize,
    what: &str,
    warnings: &mut Vec<String>,
) -> Result<Cholesky> {
    match Cholesky::new(&a, p) {
        Ok(c) => Ok(c),
        Err(_) => {
            for i in 0..p {
                a[i * p + i] += RIDGE_JITTER;
            }
            warnings.push(format!(
                "{what} covariance singular; added ridge {RIDGE_JITTER:e}"
            ));
            Cholesky::new(&a, p)
        }
    }
}

fn mahalanobis(chol: &Cholesky, row: &[f64], mean: &[f64]) -> f64 {
    let d: Vec<f64> = row.iter().zip(mean).map(|(v, m)| v - m).collect();
    chol.solve_lower(&d).iter().map(|z| z * z).sum()
}

/// LDA (pooled covariance) or QDA (per-class covariance) on standardized
/// features.
fn discriminant(
    x: &Matrix,
    y: &[f64],
    test: &Matrix,
    quadratic: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>> {
    let (neg, pos) = split_classes(x, y)?;
    let std = Standardizer::fit(x);
    let xs = std.transform(x);
    let p = x.n_cols();
    let classes = [&neg, &pos];
    let means: Vec<Vec<f64>> = classes
        .iter()
        .map(|rows| column_moments(&xs, rows).0)
        .collect();
    let priors: Vec<f64> = classes
        .iter()
        .map(|rows| (rows.len() as f64 / y.len() as f64).ln())
        .collect();
    let chols: Vec<Cholesky> = if quadratic {
        classes
            .iter()
            .zip(&means)
            .zip(["class 0", "class 1"])
            .map(|((rows, mean), name)| {
                let mut c = vec![0.0; p * p];
                covariance(&xs, rows, mean, &mut c);
                symmetrize(&mut c, p, 1.0 / (rows.len() as f64 - 1.0).max(1.0));
                factor_with_ridge(c, p, name, warnings)
            })
            .collect::<Result<_>>()?
    } else {
        let mut c = vec![0.0; p * p];
        for (rows, mean) in classes.iter().zip(&means) {
            covariance(&xs, rows, mean, &mut c);
        }
        symmetrize(&mut c, p, 1.0 / (y.len() as f64 - 2.0).max(1.0));
        vec![factor_with_ridge(c, p, "pooled", warnings)?]
    };
    Ok(test
        .rows_iter()
        .map(|r| {
            let z = std.transform_row(r);
            let score = |k: usize| {
                let chol = &chols[if quadratic { k } else { 0 }];
                let log_det = if quadratic { chol.log_det() } else { 0.0 };
                priors[k] - 0.5 * log_det - 0.5 * mahalanobis(chol, &z, &means[k])
            };
            two_class_prob(score(0), score(1))
        })
        .collect())
}

/// Logistic regression on standardized features by proximal gradient descent
/// (500 steps of 0.1; both penalties applied through their proximal maps). `l2` penalizes ½‖w‖², `l1` penalizes ‖w‖₁; the
/// intercept is unpenalized.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub const ITERATIONS: usize = 500;
    pub const STEP: f64 = 0.1;

    pub fn fit(x: &Matrix, y: &[f64], l1: f64, l2: f64) -> Result<Self> {
        x.ensure_dense("logistic regression input")?;
        let standardizer = Standardizer::fit(x);
        let xs = standardizer.transform(x);
        let n = x.n_rows() as f64;
        let p = x.n_cols();
        let mut w = vec![0.0; p];
        let mut b = 0.0;
        let mut grad = vec![0.0; p];
        for _ in 0..Self::ITERATIONS {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (row, &t) in xs.rows_iter().zip(y) {
                let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let r = sigmoid(z) - t;
                gb += r;
                for (g, v) in grad.iter_mut().zip(row) {
                    *g += r * v;
                }
            }
            b -= Self::STEP * gb / n;
            for (wi, g) in w.iter_mut().zip(&grad) {
                let v = *wi - Self::STEP * g / n;
                let soft = v.signum() * (v.abs() - Self::STEP * l1).max(0.0);
                *wi = soft / (1.0 + Self::STEP * l2);
            }
        }
        Ok(Self {
            standardizer,
            weights: w,
            intercept: b,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let z = self.standardizer.transform_row(row);
        sigmoid(self.intercept + z.iter().zip(&self.weights).map(|(a, c)| a * c).sum::<f64>())
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Weighted least squares with intercept on standardized columns; returns
/// (intercept, coefficients).
fn weighted_ls(xs: &Matrix, y: &[f64], w: &[f64], warnings: &mut Vec<String>) -> Result<Vec<f64>> {
    let p = xs.n_cols() + 1;
    let mut a = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    let mut z = vec![1.0; p];
    for ((row, &t), &wi) in xs.rows_iter().zip(y).zip(w) {
        z[1..].copy_from_slice(row);
        for i in 0..p {
            rhs[i] += wi * z[i] * t;
            for j in 0..=i {
                a[i * p + j] += wi * z[i] * z[j];
            }
        }
    }
    symmetrize(&mut a, p, 1.0);
    let chol = factor_with_ridge(a, p, "design", warnings)?;
    Ok(chol.solve(&rhs))
}

fn linear_predict(std: &Standardizer, beta: &[f64], test: &Matrix) -> Vec<f64> {
    test.rows_iter()
        .map(|r| {
            beta[0]
                + std
                    .transform_row(r)
                    .iter()
                    .zip(&beta[1..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .collect()
}

fn linear(x: &Matrix, y: &[f64], test: &Matrix, warnings: &mut Vec<String>) -> Result<Vec<f64>> {
    let std = Standardizer::fit(x);
    let beta = weighted_ls(&std.transform(x), y, &vec![1.0; y.len()], warnings)?;
    Ok(linear_predict(&std, &beta, test))
}

/// Huber regression by iteratively reweighted least squares; residuals are
/// scaled by 1.4826 × their median absolute deviation.
fn huber(
    x: &Matrix,
    y: &[f64],
    test: &Matrix,
    delta: f64,
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>> {
    let std = Standardizer::fit(x);
    let xs = std.transform(x);
    let mut w = vec![1.0; y.len()];
    let mut beta = weighted_ls(&xs, y, &w, warnings)?;
    for _ in 0..100 {
        let fitted = linear_predict(&std, &beta, x);
        let resid: Vec<f64> = fitted.iter().zip(y).map(|(f, t)| t - f).collect();
        let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let mut scale = 1.4826 * crate::dataset::quantile_linear(&abs, 0.5);
        if scale < 1e-12 {
            scale = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
        }
        if scale < 1e-12 {
            break;
        }
        for (wi, r) in w.iter_mut().zip(&resid) {
            let u = (r / scale).abs();
            *wi = if u <= delta { 1.0 } else { delta / u };
        }
        let next = weighted_ls(&xs, y, &w, warnings)?;
        let change = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = next;
        if change < 1e-8 {
            break;
        }
    }
    warnings.dedup();
    Ok(linear_predict(&std, &beta, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub model: String,
    pub task: Task,
    pub balanced_accuracy: Option<f64>,
    pub roc_auc: Option<f64>,
    pub f1: Option<f64>,
    pub r2: Option<f64>,
    pub rmse: Option<f64>,
    /// Seconds of wall-clock across all folds.
    pub time_taken: f64,
    pub note: Option<String>,
}

impl LeaderboardRow {
    fn primary(&self) -> Option<f64> {
        match self.task {
            Task::Classify => self.roc_auc,
            Task::Regress => self.rmse,
        }
    }
}

impl fmt::Display for LeaderboardRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        match self.task {
            Task::Classify => write!(
                f,
                "{:<34} bacc {}  auc {}  f1 {}  {:.2}s",
                self.model,
                show(self.balanced_accuracy),
                show(self.roc_auc),
                show(self.f1),
                self.time_taken
            ),
            Task::Regress => write!(
                f,
                "{:<34} r2 {}  rmse {}  {:.2}s",
                self.model,
                show(self.r2),
                show(self.rmse),
                self.time_taken
            ),
        }
    }
}

fn mean_of(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// K-fold screening of each candidate. Folds are stratified for
/// classification. Families that cannot take missing cells get a median
/// imputer fitted on each training fold. Failures are recorded on their row.
///
/// Classifier rows report balanced accuracy and F1 at a 0.5 cutoff.
pub fn screen(
    candidates: &[CandidateSpec],
    x: &Matrix,
    y: &[f64],
    task: Task,
    k: usize,
    seed: u64,
) -> Result<Vec<LeaderboardRow>> {
    if x.n_rows() != y.len() {
        return Err(TriageError::schema("rows and targets differ in length"));
    }
    for c in candidates {
        if c.task != task {
            return Err(TriageError::domain(format!(
                "candidate {:?} is not a {task:?} candidate",
                c.name
            )));
        }
    }
    let folds = match task {
        Task::Classify => stratified_kfold(y, k, seed)?,
        Task::Regress => kfold(y.len(), k, seed)?,
    };
    let splits: Vec<(Vec<usize>, Vec<usize>)> = folds.splits().collect();
    let mut rows: Vec<LeaderboardRow> = candidates
        .iter()
        .map(|spec| {
            let started = Instant::now();
            let outcome = screen_one(spec, x, y, &splits, seed);
            let time_taken = started.elapsed().as_secs_f64();
            let mut row = LeaderboardRow {
                model: spec.name.clone(),
                task,
                balanced_accuracy: None,
                roc_auc: None,
                f1: None,
                r2: None,
                rmse: None,
                time_taken,
                note: None,
            };
            match outcome {
                Ok((m, warnings)) => {
                    row.balanced_accuracy = m[0];
                    row.roc_auc = m[1];
                    row.f1 = m[2];
                    row.r2 = m[3];
                    row.rmse = m[4];
                    if !warnings.is_empty() {
                        row.note = Some(warnings.join("; "));
                    }
                }
                Err(e) => row.note = Some(format!("failed: {e}")),
            }
            row
        })
        .collect();
    sort_leaderboard(&mut rows);
    Ok(rows)
}

type FoldMetrics = ([Option<f64>; 5], Vec<String>);

fn screen_one(
    spec: &CandidateSpec,
    x: &Matrix,
    y: &[f64],
    splits: &[(Vec<usize>, Vec<usize>)],
    seed: u64,
) -> Result<FoldMetrics> {
    let mut acc: [Vec<f64>; 5] = Default::default();
    let mut warnings: Vec<String> = Vec::new();
    for (fold, (train, valid)) in splits.iter().enumerate() {
        let mut tx = x.select_rows(train);
        let mut vx = x.select_rows(valid);
        if !spec.family.accepts_missing() && (tx.has_missing() || vx.has_missing()) {
            let imp = impute::fit(ImputerKind::Median, &tx)?;
            tx = imp.model.transform(&tx)?;
            vx = imp.model.transform(&vx)?;
        }
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let vy: Vec<f64> = valid.iter().map(|&i| y[i]).collect();
        let pred = fit_predict(spec, &tx, &ty, &vx, seed.wrapping_add(fold as u64))?;
        for w in pred.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        match spec.task {
            Task::Classify => {
                let cm = classify_metrics(&pred.scores, &vy, 0.5)?;
                acc[0].push(cm.balanced_accuracy);
                acc[1].push(roc_auc(&pred.scores, &vy)?);
                acc[2].push(cm.f1);
            }
            Task::Regress => {
                let rm = regress_metrics(&pred.scores, &vy, &pred.scores)?;
                if let Some(r2) = rm.r2 {
                    acc[3].push(r2);
                }
                acc[4].push(rm.rmse);
            }
        }
    }
    for v in acc.iter().flatten() {
        if !v.is_finite() {
            return Err(TriageError::Degenerate("non-finite fold metric".into()));
        }
    }
    Ok((
        [
            mean_of(&acc[0]),
            mean_of(&acc[1]),
            mean_of(&acc[2]),
            mean_of(&acc[3]),
            mean_of(&acc[4]),
        ],
        warnings,
    ))
}

/// Descending ROC AUC or ascending RMSE; failed rows last; ties by name.
pub fn sort_leaderboard(rows: &mut [LeaderboardRow]) {
    rows.sort_by(|a, b| match (a.primary(), b.primary()) {
        (Some(x), Some(y)) => {
            let ord = if a.task == Task::Classify {
                y.total_cmp(&x)
            } else {
                x.total_cmp(&y)
            };
            ord.then_with(|| a.model.cmp(&b.model))
        }
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.model.cmp(&b.model),
    });
}

/// Leaderboard CSV with the column names used in the screening tables.
pub fn write_leaderboard<W: Write>(rows: &[LeaderboardRow], task: Task, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    match task {
        Task::Classify => w.write_record([
            "Model",
            "Balanced Accuracy",
            "ROC AUC",
            "F1 Score",
            "Time Taken",
            "Note",
        ])?,
        Task::Regress => w.write_record(["Model", "R-Squared", "RMSE", "Time Taken", "Note"])?,
    }
    for r in rows {
        let note = r.note.clone().unwrap_or_default();
        let time = format!("{:.3}", r.time_taken);
        match task {
            Task::Classify => w.write_record([
                r.model.clone(),
                fmt(r.balanced_accuracy),
                fmt(r.roc_auc),
                fmt(r.f1),
                time,
                note,
            ])?,
            Task::Regress => {
                w.write_record([r.model.clone(), fmt(r.r2), fmt(r.rmse), time, note])?
            }
        }
    }
    w.flush().map_err(|e| TriageError::io("leaderboard", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(v: &[f64]) -> Matrix {
        Matrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    fn phi(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn gaussian_nb_matches_closed_form() {
        // class 0 at {-1, 1}: mean 0, variance 1; class 1 at {1, 3}: mean 2, variance 1
        let x = column(&[-1.0, 1.0, 1.0, 3.0]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let spec = CandidateSpec::new("nb", Task::Classify, Family::GaussianNb).unwrap();
        let p = fit_predict(&spec, &x, &y, &column(&[0.0]), 0)
            .unwrap()
            .scores[0];
        let expected_a = phi(0.0) / (phi(0.0) + phi(-2.0));
        assert!(((1.0 - p) - expected_a).abs() < 1e-6, "{p}");
        assert!((expected_a - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn bernoulli_nb_is_strictly_probabilistic() {
        let x = Matrix::from_rows(
            &[
                vec![0.0, 5.0],
                vec![1.0, 6.0],
                vec![2.0, 7.0],
                vec![3.0, 8.0],
            ],
            2,
        )
        .unwrap();
        let y = [0.0, 0.0, 1.0, 1.0];
        let spec = CandidateSpec::new("bnb", Task::Classify, Family::BernoulliNb).unwrap();
        let p = fit_predict(&spec, &x, &y, &x, 0).unwrap().scores;
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(p[3] > p[0]);
    }

    #[test]
    fn singular_lda_warns_and_predicts() {
        // second column duplicates the first
        let x = Matrix::from_rows(
            &[
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                vec![2.0, 2.0],
                vec![3.0, 3.0],
            ],
            2,
        )
        .unwrap();
        let y = [0.0, 0.0, 1.0, 1.0];
        for family in [Family::Lda, Family::Qda] {
            let spec = CandidateSpec::new("d", Task::Classify, family).unwrap();
            let pred = fit_predict(&spec, &x, &y, &x, 0).unwrap();
            assert!(!pred.warnings.is_empty());
            assert!(pred.scores.iter().all(|v| v.is_finite()));
            assert!(pred.scores[3] > pred.scores[0]);
        }
    }

    #[test]
    fn l2_strength_shrinks_logistic_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| if r[0] + 0.3 * r[1] > 0.6 { 1.0 } else { 0.0 })
            .collect();
        let x = Matrix::from_rows(&rows, 2).unwrap();
        let norms: Vec<f64> = [0.01, 1.0, 100.0]
            .iter()
            .map(|&l2| LogisticModel::fit(&x, &y, 0.0, l2).unwrap().weight_norm())
            .collect();
        assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
        assert!(norms[2] < 0.05);
    }

    #[test]
    fn linear_recovers_exact_plane() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 + 3.0 * r[0] - 0.5 * r[1]).collect();
        let x = Matrix::from_rows(&rows, 2).unwrap();
        for family in [Family::Linear, Family::Huber { delta: 1.35 }] {
            let spec = CandidateSpec::new("lin", Task::Regress, family).unwrap();
            let p = fit_predict(&spec, &x, &y, &x, 0).unwrap().scores;
            for (a, b) in p.iter().zip(&y) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn huber_resists_outlier() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let mut y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        y[19] = 500.0;
        let x = Matrix::from_rows(&rows, 1).unwrap();
        let fit = |family| {
            let spec = CandidateSpec::new("h", Task::Regress, family).unwrap();
            fit_predict(&spec, &x, &y, &column(&[5.0]), 0)
                .unwrap()
                .scores[0]
        };
        let h = fit(Family::Huber { delta: 1.35 });
        let l = fit(Family::Linear);
        assert!((h - 5.0).abs() < (l - 5.0).abs());
        assert!((h - 5.0).abs() < 0.5, "{h}");
    }

    #[test]
    fn task_compatibility_enforced() {
        assert!(CandidateSpec::new("x", Task::Regress, Family::Coin).is_err());
        assert!(CandidateSpec::new("x", Task::Classify, Family::Mean).is_err());
        assert!(
            CandidateSpec::new("x", Task::Classify, Family::Logistic { l1: -1.0, l2: 0.0 })
                .is_err()
        );
    }

    #[test]
    fn mean_baseline_has_zero_r2_on_training_data() {
        let y = [1.0, 2.0, 6.0];
        let x = column(&[0.0, 0.0, 0.0]);
        let spec = CandidateSpec::new("m", Task::Regress, Family::Mean).unwrap();
        let p = fit_predict(&spec, &x, &y, &x, 0).unwrap().scores;
        let m = regress_metrics(&p, &y, &p).unwrap();
        assert_eq!(m.r2, Some(0.0));
    }
}
