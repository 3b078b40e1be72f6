//! Slow, obviously-correct reference implementations used to check the
//! library. Shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use triage_core::trees::{DecisionTree, GbdtModel, Node};

/// P(score_pos > score_neg) + ½ P(tie) over all pairs.
pub fn auc_pairwise(scores: &[f64], labels: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1.0 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0.0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Least-squares non-decreasing fit by trying every split of the sequence
/// into contiguous blocks; the optimum is constant on blocks at block means.
pub fn isotonic_bruteforce(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fit = Vec::with_capacity(n);
        let mut start = 0;
        let mut last_mean = f64::NEG_INFINITY;
        let mut ok = true;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let m = y[start..end].iter().sum::<f64>() / (end - start) as f64;
                if m < last_mean {
                    ok = false;
                    break;
                }
                last_mean = m;
                fit.extend(std::iter::repeat_n(m, end - start));
                start = end;
            }
        }
        if !ok {
            continue;
        }
        let sse: f64 = fit.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b - 1e-15) {
            best = Some((sse, fit));
        }
    }
    best.unwrap().1
}

fn fraction(covers: &[f64], node: usize, child: usize) -> f64 {
    if covers[node] == 0.0 {
        0.5
    } else {
        covers[child] / covers[node]
    }
}

fn goes_left(v: f64, threshold: f64, default_left: bool) -> bool {
    if v.is_nan() {
        default_left
    } else {
        v < threshold
    }
}

/// E[tree(x) | features in `known` fixed to x], other splits averaged by cover.
fn conditional(tree: &DecisionTree, covers: &[f64], x: &[f64], known: u32, node: usize) -> f64 {
    match tree.nodes[node] {
        Node::Leaf { weight } => weight,
        Node::Split {
            feature,
            threshold,
            default_left,
            left,
            right,
        } => {
            if known & (1 << feature) != 0 {
                let next = if goes_left(x[feature], threshold, default_left) {
                    left
                } else {
                    right
                };
                conditional(tree, covers, x, known, next)
            } else {
                fraction(covers, node, left) * conditional(tree, covers, x, known, left)
                    + fraction(covers, node, right) * conditional(tree, covers, x, known, right)
            }
        }
    }
}

/// Shapley values by enumerating all 2^p coalitions.
pub fn shap_bruteforce(model: &GbdtModel, covers: &[Vec<f64>], x: &[f64]) -> (f64, Vec<f64>) {
    let p = x.len();
    assert!(p <= 16);
    let value = |s: u32| -> f64 {
        model.base_score
            + model
                .trees
                .iter()
                .zip(covers)
                .map(|(t, c)| conditional(t, c, x, s, 0))
                .sum::<f64>()
    };
    let values: Vec<f64> = (0..1u32 << p).map(value).collect();
    let fact: Vec<f64> = (0..=p)
        .scan(1.0, |acc, i| {
            if i > 0 {
                *acc *= i as f64;
            }
            Some(*acc)
        })
        .collect();
    let mut phi = vec![0.0; p];
    for (i, slot) in phi.iter_mut().enumerate() {
        for s in 0..1u32 << p {
            if s & (1 << i) != 0 {
                continue;
            }
            let k = s.count_ones() as usize;
            let w = fact[k] * fact[p - k - 1] / fact[p];
            *slot += w * (values[(s | (1 << i)) as usize] - values[s as usize]);
        }
    }
    (values[0], phi)
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn matern(a: &[f64], b: &[f64], ls: &[f64], sv: f64) -> f64 {
    let r = a
        .iter()
        .zip(b)
        .zip(ls)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum::<f64>()
        .sqrt();
    let s = 5f64.sqrt() * r;
    sv * (1.0 + s + 5.0 * r * r / 3.0) * (-s).exp()
}

/// GP predictive mean and standard deviation via two dense solves.
pub fn gp_dense(
    xs: &[Vec<f64>],
    ys: &[f64],
    ls: &[f64],
    sv: f64,
    noise: f64,
    q: &[f64],
) -> (f64, f64) {
    let n = xs.len();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| matern(&xs[i], &xs[j], ls, sv) + if i == j { noise } else { 0.0 })
                .collect()
        })
        .collect();
    let ks: Vec<f64> = xs.iter().map(|x| matern(x, q, ls, sv)).collect();
    let alpha = dense_solve(k.clone(), ys.iter().map(|y| y - mean).collect());
    let beta = dense_solve(k, ks.clone());
    let mu = mean + ks.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
    let var = sv - ks.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
    (mu, var.max(0.0).sqrt())
}

/// Best single split under squared loss, leaves at the residual means.
/// Returns fitted values on the training rows.
pub fn best_stump(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut best_sse = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let mut best_fit = vec![mean; n];
    for f in 0..rows[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| rows[i][f] < t);
            let ml = l.iter().map(|&i| y[i]).sum::<f64>() / l.len() as f64;
            let mr = r.iter().map(|&i| y[i]).sum::<f64>() / r.len() as f64;
            let fit: Vec<f64> = (0..n)
                .map(|i| if rows[i][f] < t { ml } else { mr })
                .collect();
            let sse: f64 = fit.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
            if sse < best_sse {
                best_sse = sse;
                best_fit = fit;
            }
        }
    }
    best_fit
}

/// Minimizer of g·w + ½(h+λ)w² + α|w| by golden-section search.
pub fn leaf_weight_numeric(g: f64, h: f64, lambda: f64, alpha: f64) -> f64 {
    let f = |w: f64| g * w + 0.5 * (h + lambda) * w * w + alpha * w.abs();
    let (mut a, mut b) = (-1e4, 1e4);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) < f(d) {
            b = d
        } else {
            a = c
        }
    }
    (a + b) / 2.0
}

/// Whether `p` lies on the segment between `a` and `b`, by projection.
pub fn on_segment(p: &[f64], a: &[f64], b: &[f64], tol: f64) -> bool {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let dd: f64 = d.iter().map(|v| v * v).sum();
    let t = if dd == 0.0 {
        0.0
    } else {
        p.iter()
            .zip(a)
            .zip(&d)
            .map(|((pi, ai), di)| (pi - ai) * di)
            .sum::<f64>()
            / dd
    };
    if !(-tol..=1.0 + tol).contains(&t) {
        return false;
    }
    p.iter()
        .zip(a)
        .zip(&d)
        .all(|((pi, ai), di)| (pi - (ai + t * di)).abs() <= tol)
}

/// Negative smoothed-target log-likelihood of a Platt fit.
pub fn platt_nll(a: f64, b: f64, scores: &[f64], labels: &[f64]) -> f64 {
    let pos = labels.iter().filter(|&&l| l == 1.0).count() as f64;
    let neg = labels.len() as f64 - pos;
    scores
        .iter()
        .zip(labels)
        .map(|(&s, &l)| {
            let t = if l == 1.0 {
                (pos + 1.0) / (pos + 2.0)
            } else {
                1.0 / (neg + 2.0)
            };
            let p = 1.0 / (1.0 + (a * s + b).exp());
            -(t * p.max(1e-300).ln() + (1.0 - t) * (1.0 - p).max(1e-300).ln())
        })
        .sum()
}
