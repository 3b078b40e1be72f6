//! Missing-cell imputation: passthrough, per-feature median, and iterative
//! soft-thresholded SVD (soft-impute).
//!
//! Observed cells are never modified by any strategy.

use serde::{Deserialize, Serialize};

use crate::dataset::quantile_linear;
use crate::error::{Result, TriageError};
use crate::linalg;
use crate::matrix::{is_missing, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputerKind {
    Passthrough,
    Median,
    SoftSvd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftSvdConfig {
    /// Retained rank; `None` means `min(10, rows, cols)` of the matrix being filled.
    pub rank: Option<usize>,
    /// Soft threshold subtracted from every singular value.
    pub shrinkage: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SoftSvdConfig {
    fn default() -> Self {
        Self {
            rank: None,
            shrinkage: 0.0,
            max_iter: 200,
            tol: 1e-5,
        }
    }
}

impl SoftSvdConfig {
    fn validate(&self) -> Result<()> {
        if self.rank == Some(0) {
            return Err(TriageError::domain("soft-svd rank must be at least 1"));
        }
        if !(self.shrinkage >= 0.0) {
            return Err(TriageError::domain(
                "soft-svd shrinkage must be non-negative",
            ));
        }
        if !(self.tol > 0.0) {
            return Err(TriageError::domain("soft-svd tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImputerModel {
    Passthrough {
        n_features: usize,
    },
    Median {
        medians: Vec<f64>,
    },
    SoftSvd {
        config: SoftSvdConfig,
        column_means: Vec<f64>,
        /// Per-column scale applied before factorization (rank preserving).
        column_scales: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct FittedImputer {
    pub model: ImputerModel,
    pub warnings: Vec<String>,
}

/// Convergence record of one soft-impute run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SoftSvdTrace {
    /// Max absolute change of the filled cells at each iteration.
    pub deltas: Vec<f64>,
    pub converged: bool,
}

pub fn fit(kind: ImputerKind, x: &Matrix) -> Result<FittedImputer> {
    fit_with(kind, &SoftSvdConfig::default(), x)
}

pub fn fit_with(kind: ImputerKind, svd: &SoftSvdConfig, x: &Matrix) -> Result<FittedImputer> {
    let mut warnings = Vec::new();
    let model = match kind {
        ImputerKind::Passthrough => ImputerModel::Passthrough {
            n_features: x.n_cols(),
        },
        ImputerKind::Median => {
            if x.n_rows() == 0 {
                return Err(TriageError::domain(
                    "median imputer needs a non-empty table",
                ));
            }
            let medians = (0..x.n_cols())
                .map(|c| {
                    let mut obs = x.observed_column(c);
                    if obs.is_empty() {
                        warnings.push(format!("feature {c} has no observations; filling with 0"));
                        return 0.0;
                    }
                    obs.sort_by(f64::total_cmp);
                    quantile_linear(&obs, 0.5)
                })
                .collect();
            ImputerModel::Median { medians }
        }
        ImputerKind::SoftSvd => {
            svd.validate()?;
            if x.n_rows() == 0 {
                return Err(TriageError::domain(
                    "soft-svd imputer needs a non-empty table",
                ));
            }
            let mut column_means = Vec::with_capacity(x.n_cols());
            let mut column_scales = Vec::with_capacity(x.n_cols());
            for c in 0..x.n_cols() {
                let obs = x.observed_column(c);
                if obs.is_empty() {
                    warnings.push(format!(
                        "feature {c} has no observations; initialising with 0"
                    ));
                    column_means.push(0.0);
                    column_scales.push(1.0);
                    continue;
                }
                let n = obs.len() as f64;
                let m = obs.iter().sum::<f64>() / n;
                let sd = (obs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
                column_means.push(m);
                column_scales.push(if sd > 1e-12 {
                    sd
                } else if m.abs() > 1e-12 {
                    m.abs()
                } else {
                    1.0
                });
            }
            ImputerModel::SoftSvd {
                config: svd.clone(),
                column_means,
                column_scales,
            }
        }
    };
    Ok(FittedImputer { model, warnings })
}

impl ImputerModel {
    pub fn kind(&self) -> ImputerKind {
        match self {
            ImputerModel::Passthrough { .. } => ImputerKind::Passthrough,
            ImputerModel::Median { .. } => ImputerKind::Median,
            ImputerModel::SoftSvd { .. } => ImputerKind::SoftSvd,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            ImputerModel::Passthrough { n_features } => *n_features,
            ImputerModel::Median { medians } => medians.len(),
            ImputerModel::SoftSvd { column_means, .. } => column_means.len(),
        }
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        self.transform_traced(x).map(|(m, _)| m)
    }

    /// Fills one row; soft-svd needs the surrounding matrix, so single rows fall back to column means.
    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_width(row.len())?;
        Ok(match self {
            ImputerModel::Passthrough { .. } => row.to_vec(),
            ImputerModel::Median { medians } => fill_with(row, medians),
            ImputerModel::SoftSvd { column_means, .. } => fill_with(row, column_means),
        })
    }

    fn check_width(&self, cols: usize) -> Result<()> {
        if cols != self.n_features() {
            return Err(TriageError::schema(format!(
                "imputer was fitted on {} features, got {cols}",
                self.n_features()
            )));
        }
        Ok(())
    }

    pub fn transform_traced(&self, x: &Matrix) -> Result<(Matrix, SoftSvdTrace)> {
        self.check_width(x.n_cols())?;
        match self {
            ImputerModel::Passthrough { .. } => Ok((x.clone(), SoftSvdTrace::default())),
            ImputerModel::Median { medians } => {
                let mut out = x.clone();
                for r in 0..out.n_rows() {
                    let filled = fill_with(out.row(r), medians);
                    out.row_mut(r).copy_from_slice(&filled);
                }
                Ok((out, SoftSvdTrace::default()))
            }
            ImputerModel::SoftSvd {
                config,
                column_means,
                column_scales,
            } => Ok(soft_impute(x, config, column_means, column_scales)),
        }
    }
}

fn fill_with(row: &[f64], fill: &[f64]) -> Vec<f64> {
    row.iter()
        .zip(fill)
        .map(|(&v, &f)| if is_missing(v) { f } else { v })
        .collect()
}

fn soft_impute(
    x: &Matrix,
    cfg: &SoftSvdConfig,
    means: &[f64],
    scales: &[f64],
) -> (Matrix, SoftSvdTrace) {
    let (rows, cols) = (x.n_rows(), x.n_cols());
    let missing: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .filter(|&(r, c)| is_missing(x.get(r, c)))
        .collect();
    let mut trace = SoftSvdTrace::default();
    if missing.is_empty() || rows == 0 || cols == 0 {
        trace.converged = true;
        return (x.clone(), trace);
    }
    let rank = cfg.rank.unwrap_or(10).min(rows.min(cols)).max(1);

    // Work in scaled units so wide-range exams do not dominate the factorization.
    let mut z: Vec<f64> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| {
            let v = x.get(r, c);
            if is_missing(v) {
                means[c] / scales[c]
            } else {
                v / scales[c]
            }
        })
        .collect();
    for _ in 0..cfg.max_iter {
        let d = linalg::svd(&z, rows, cols);
        let kept: Vec<(usize, f64)> = (0..rank.min(d.rank()))
            .map(|k| (k, (d.s[k] - cfg.shrinkage).max(0.0)))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        let mut delta: f64 = 0.0;
        for &(r, c) in &missing {
            let recon: f64 = kept.iter().map(|&(k, s)| d.u(r, k) * s * d.v(c, k)).sum();
            delta = delta.max(((recon - z[r * cols + c]) * scales[c]).abs());
            z[r * cols + c] = recon;
        }
        trace.deltas.push(delta);
        if delta < cfg.tol {
            trace.converged = true;
            break;
        }
    }
    let mut out = x.clone();
    for &(r, c) in &missing {
        out.set(r, c, z[r * cols + c] * scales[c]);
    }
    (out, trace)
}
