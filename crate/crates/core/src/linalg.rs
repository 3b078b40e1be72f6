//! Small dense linear-algebra kernels: Cholesky factorization and a
//! one-sided Jacobi SVD. Matrices are row-major `Vec<f64>`.

use crate::error::{Result, TriageError};

/// Lower-triangular Cholesky factor of a symmetric positive-definite `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(TriageError::Degenerate(format!(
                            "matrix not positive definite (pivot {i}: {s})"
                        )));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = self.solve_lower(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.l[i * self.n + i].ln()).sum()
    }
}

/// Cholesky with diagonal jitter grown tenfold until the factorization succeeds.
/// Returns the factor and the jitter that was added.
pub fn cholesky_jittered(
    a: &[f64],
    n: usize,
    initial: f64,
    max_tries: usize,
) -> Result<(Cholesky, f64)> {
    let mut jitter = initial;
    let mut work = a.to_vec();
    for _ in 0..max_tries {
        for i in 0..n {
            work[i * n + i] = a[i * n + i] + jitter;
        }
        if let Ok(c) = Cholesky::new(&work, n) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(TriageError::Degenerate(format!(
        "matrix not positive definite even with jitter {jitter:e}"
    )))
}

/// Thin SVD `A = U diag(s) V^T` with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub rows: usize,
    pub cols: usize,
    /// `rows x k`, row-major, where `k = min(rows, cols)`.
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    /// `cols x k`, row-major (columns are right singular vectors).
    pub v: Vec<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    #[inline]
    pub fn u(&self, r: usize, k: usize) -> f64 {
        self.u[r * self.s.len() + k]
    }

    #[inline]
    pub fn v(&self, c: usize, k: usize) -> f64 {
        self.v[c * self.s.len() + k]
    }
}

/// One-sided (Hestenes) Jacobi SVD of a row-major `rows x cols` matrix.
pub fn svd(a: &[f64], rows: usize, cols: usize) -> Svd {
    if rows < cols {
        let mut t = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = a[r * cols + c];
            }
        }
        let s = svd(&t, cols, rows);
        return Svd {
            rows,
            cols,
            u: s.v,
            s: s.s,
            v: s.u,
        };
    }
    let (m, n) = (rows, cols);
    // Column-major working copy: columns are orthogonalised in place.
    let mut w: Vec<f64> = (0..n)
        .flat_map(|c| (0..m).map(move |r| (r, c)))
        .map(|(r, c)| a[r * n + c])
        .collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let eps = f64::EPSILON;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for r in 0..m {
                    let (x, y) = (w[p * m + r], w[q * m + r]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let (x, y) = (w[p * m + r], w[q * m + r]);
                    w[p * m + r] = c * x - s * y;
                    w[q * m + r] = s * x + c * y;
                }
                for r in 0..n {
                    let (x, y) = (v[r * n + p], v[r * n + q]);
                    v[r * n + p] = c * x - s * y;
                    v[r * n + q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n)
        .map(|c| {
            w[c * m..(c + 1) * m]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut u = vec![0.0; m * n];
    let mut vs = vec![0.0; n * n];
    let mut s = vec![0.0; n];
    for (k, &c) in order.iter().enumerate() {
        s[k] = norms[c];
        for r in 0..m {
            u[r * n + k] = if norms[c] > 0.0 {
                w[c * m + r] / norms[c]
            } else {
                0.0
            };
        }
        for r in 0..n {
            vs[r * n + k] = v[r * n + c];
        }
    }
    Svd {
        rows,
        cols,
        u,
        s,
        v: vs,
    }
}
