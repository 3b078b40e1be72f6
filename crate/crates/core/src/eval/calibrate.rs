use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibratorModel {
    /// `p = 1 / (1 + exp(a * s + b))`
    Platt { a: f64, b: f64 },
    /// Step function: value `y[i]` on `[x[i], x[i + 1])`, clamped at both ends.
    Isotonic { x: Vec<f64>, y: Vec<f64> },
}

impl CalibratorModel {
    pub fn apply(&self, score: f64) -> f64 {
        match self {
            CalibratorModel::Platt { a, b } => {
                let z = a * score + b;
                if z >= 0.0 {
                    let e = (-z).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + z.exp())
                }
            }
            CalibratorModel::Isotonic { x, y } => {
                let i = x.partition_point(|&v| v <= score);
                y[i.saturating_sub(1)]
            }
        }
    }

    pub fn apply_all(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.apply(s)).collect()
    }
}

/// Platt scaling by Newton's method with backtracking on the smoothed targets
/// `(N+ + 1) / (N+ + 2)` and `1 / (N- + 2)`.
pub fn platt_fit(scores: &[f64], labels: &[f64]) -> Result<CalibratorModel> {
    if scores.len() != labels.len() {
        return Err(TriageError::schema("scores and labels differ in length"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(TriageError::domain("Platt scaling needs finite scores"));
    }
    let pos = labels.iter().filter(|&&l| l == 1.0).count();
    let neg = labels.iter().filter(|&&l| l == 0.0).count();
    if pos + neg != labels.len() {
        return Err(TriageError::domain("labels must be 0 or 1"));
    }
    if pos == 0 || neg == 0 {
        return Err(TriageError::domain(
            "Platt scaling needs both classes present",
        ));
    }
    let hi = (pos as f64 + 1.0) / (pos as f64 + 2.0);
    let lo = 1.0 / (neg as f64 + 2.0);
    let t: Vec<f64> = labels
        .iter()
        .map(|&l| if l == 1.0 { hi } else { lo })
        .collect();

    let objective = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&t)
            .map(|(&s, &ti)| {
                let f = a * s + b;
                // -log-likelihood, written to avoid overflow for either sign of f
                if f >= 0.0 {
                    ti * f + (1.0 + (-f).exp()).ln()
                } else {
                    (ti - 1.0) * f + (1.0 + f.exp()).ln()
                }
            })
            .sum()
    };

    let max_iter = 200;
    let min_step = 1e-10;
    let sigma = 1e-12;
    let eps = 1e-5;
    let mut a = 0.0;
    let mut b = ((neg as f64 + 1.0) / (pos as f64 + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..max_iter {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (&s, &ti) in scores.iter().zip(&t) {
            let f = a * s + b;
            let (p, q) = if f >= 0.0 {
                let e = (-f).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = ti - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            return Ok(CalibratorModel::Platt { a, b });
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
            if step < min_step {
                return Err(TriageError::Convergence {
                    iterations: max_iter,
                    diagnostics: format!(
                        "line search failed at a={a}, b={b}, gradient=({g1:e}, {g2:e})"
                    ),
                });
            }
        }
    }
    Err(TriageError::Convergence {
        iterations: max_iter,
        diagnostics: format!("Platt scaling stopped at a={a}, b={b}, -loglik={fval}"),
    })
}

/// Pool-adjacent-violators fit of non-decreasing values to `targets` ordered
/// by `scores`. Equal scores are pooled first.
pub fn isotonic_fit(scores: &[f64], targets: &[f64]) -> Result<CalibratorModel> {
    if scores.len() != targets.len() {
        return Err(TriageError::schema("scores and targets differ in length"));
    }
    if scores.len() < 2 {
        return Err(TriageError::domain(
            "isotonic fit needs at least two points",
        ));
    }
    if scores.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(TriageError::domain("isotonic fit needs finite inputs"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

    // (x, weighted mean, weight) per distinct score
    let mut xs: Vec<f64> = Vec::new();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for &i in &idx {
        if xs.last() == Some(&scores[i]) {
            let last = pts.last_mut().unwrap();
            last.0 = (last.0 * last.1 + targets[i]) / (last.1 + 1.0);
            last.1 += 1.0;
        } else {
            xs.push(scores[i]);
            pts.push((targets[i], 1.0));
        }
    }
    // blocks: (value, weight, count of distinct points)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(pts.len());
    for (v, w) in pts {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].0 <= blocks[n - 1].0 {
                break;
            }
            let (v2, w2, c2) = blocks.pop().unwrap();
            let (v1, w1, c1) = blocks.pop().unwrap();
            blocks.push(((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, c1 + c2));
        }
    }
    let ys: Vec<f64> = blocks
        .iter()
        .flat_map(|&(v, _, c)| std::iter::repeat_n(v, c))
        .collect();
    Ok(CalibratorModel::Isotonic { x: xs, y: ys })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityPoint {
    pub bin_center: f64,
    pub mean_predicted: f64,
    pub observed: f64,
    pub count: usize,
}

/// Equal-width bins over [0, 1]; empty bins are omitted.
pub fn reliability_curve(
    probs: &[f64],
    labels: &[f64],
    n_bins: usize,
) -> Result<Vec<ReliabilityPoint>> {
    if n_bins < 2 {
        return Err(TriageError::domain(
            "reliability curve needs at least two bins",
        ));
    }
    if probs.len() != labels.len() {
        return Err(TriageError::schema(
            "probabilities and labels differ in length",
        ));
    }
    let mut sum_p = vec![0.0; n_bins];
    let mut sum_y = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        if !(0.0..=1.0).contains(&p) {
            return Err(TriageError::domain(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        let b = ((p * n_bins as f64).floor() as usize).min(n_bins - 1);
        sum_p[b] += p;
        sum_y[b] += y;
        count[b] += 1;
    }
    Ok((0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| ReliabilityPoint {
            bin_center: (b as f64 + 0.5) / n_bins as f64,
            mean_predicted: sum_p[b] / count[b] as f64,
            observed: sum_y[b] / count[b] as f64,
            count: count[b],
        })
        .collect())
}
