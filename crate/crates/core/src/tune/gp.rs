use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Result, TriageError};
use crate::linalg::{cholesky_jittered, Cholesky};

pub const MIN_JITTER: f64 = 1e-8;

const LOG_LENGTH: (f64, f64) = (-4.6, 2.3); // about 0.01 .. 10
const LOG_SIGNAL: (f64, f64) = (-4.6, 4.6);
const LOG_NOISE: (f64, f64) = (-18.4, 0.0); // about 1e-8 .. 1

/// Matérn-5/2 correlation at scaled distance `r`.
pub fn matern52(r: f64) -> f64 {
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn scaled_distance(a: &[f64], b: &[f64], length_scales: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(length_scales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    /// Also fit a noise variance; otherwise only jitter sits on the diagonal.
    pub fit_noise: bool,
    /// Random restarts of the likelihood search besides the fixed start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            fit_noise: true,
            restarts: 4,
            seed: 0,
        }
    }
}

/// Zero-mean GP on centered outputs over unit-cube inputs.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
    pub output_mean: f64,
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    /// Fitted noise plus whatever jitter the factorization needed.
    pub noise_variance: f64,
    chol: Cholesky,
    alpha: Vec<f64>,
}

struct Fitted {
    chol: Cholesky,
    alpha: Vec<f64>,
    noise: f64,
}

fn factor(x: &[Vec<f64>], yc: &[f64], ls: &[f64], signal: f64, noise: f64) -> Result<Fitted> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = signal * matern52(scaled_distance(&x[i], &x[j], ls));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] += noise;
    }
    let (chol, jitter) = cholesky_jittered(&k, n, MIN_JITTER, 12)?;
    let alpha = chol.solve(yc);
    Ok(Fitted {
        chol,
        alpha,
        noise: noise + jitter,
    })
}

/// Log marginal likelihood of centered outputs.
pub fn log_marginal_likelihood(
    x: &[Vec<f64>],
    yc: &[f64],
    ls: &[f64],
    signal: f64,
    noise: f64,
) -> Result<f64> {
    let f = factor(x, yc, ls, signal, noise)?;
    let quad: f64 = yc.iter().zip(&f.alpha).map(|(a, b)| a * b).sum();
    Ok(-0.5 * quad
        - 0.5 * f.chol.log_det()
        - 0.5 * yc.len() as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Nelder-Mead minimization; returns (argmin, min).
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    max_evals: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..d {
        let mut p = start.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut evals = d + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[d] - vals[0]).abs() <= tol * (1.0 + vals[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[d] = xe;
                vals[d] = fe;
            } else {
                simplex[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = xr;
            vals[d] = fr;
        } else {
            let (xc, fc) = if fr < vals[d] {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[d].min(fr) {
                simplex[d] = xc;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    let best = simplex[0].clone();
                    for (v, b) in simplex[i].iter_mut().zip(&best) {
                        *v = b + 0.5 * (*v - b);
                    }
                    vals[i] = f(&simplex[i]);
                }
                evals += d;
            }
        }
    }
    let best = (0..=d)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap();
    (simplex[best].clone(), vals[best])
}

/// Fits length-scales, signal variance and (optionally) noise by maximizing
/// the log marginal likelihood from a fixed start plus seeded random starts.
pub fn gp_fit(inputs: &[Vec<f64>], outputs: &[f64], cfg: &GpConfig) -> Result<GpSurrogate> {
    let n = inputs.len();
    if n < 2 || outputs.len() != n {
        return Err(TriageError::domain(
            "GP needs at least two points with one output each",
        ));
    }
    let d = inputs[0].len();
    if d == 0 || inputs.iter().any(|x| x.len() != d) {
        return Err(TriageError::schema(
            "GP inputs must share a non-zero dimension",
        ));
    }
    if inputs
        .iter()
        .flatten()
        .chain(outputs)
        .any(|v| !v.is_finite())
    {
        return Err(TriageError::domain("GP inputs and outputs must be finite"));
    }
    if inputs.iter().all(|x| x == &inputs[0]) {
        return Err(TriageError::Degenerate(
            "all GP inputs are identical".into(),
        ));
    }
    let mean = outputs.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = outputs.iter().map(|y| y - mean).collect();
    let var = yc.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let scale = if var > 1e-300 { var } else { 1.0 };
    // search in log space, with variances relative to the output variance
    let unpack = |theta: &[f64]| -> (Vec<f64>, f64, f64) {
        let ls = theta[..d]
            .iter()
            .map(|t| t.clamp(LOG_LENGTH.0, LOG_LENGTH.1).exp())
            .collect();
        let signal = theta[d].clamp(LOG_SIGNAL.0, LOG_SIGNAL.1).exp() * scale;
        let noise = if cfg.fit_noise {
            theta[d + 1].clamp(LOG_NOISE.0, LOG_NOISE.1).exp() * scale
        } else {
            0.0
        };
        (ls, signal, noise)
    };
    let mut objective = |theta: &[f64]| -> f64 {
        let (ls, signal, noise) = unpack(theta);
        match log_marginal_likelihood(inputs, &yc, &ls, signal, noise) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };
    let n_theta = d + 1 + cfg.fit_noise as usize;
    let mut starts: Vec<Vec<f64>> = Vec::new();
    let mut first = vec![(0.3f64).ln(); d];
    first.push(0.0);
    if cfg.fit_noise {
        first.push((1e-2f64).ln());
    }
    starts.push(first);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.restarts {
        let mut t: Vec<f64> = (0..d)
            .map(|_| rng.random_range(LOG_LENGTH.0..LOG_LENGTH.1))
            .collect();
        t.push(rng.random_range(-1.0..1.0));
        if cfg.fit_noise {
            t.push(rng.random_range(-9.0..-1.0));
        }
        starts.push(t);
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        let (theta, v) = nelder_mead(&mut objective, s, 1.0, 150 * n_theta, 1e-9);
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((theta, v));
        }
    }
    let (theta, v) = best.unwrap();
    if !v.is_finite() {
        return Err(TriageError::Degenerate(
            "GP likelihood could not be evaluated at any start".into(),
        ));
    }
    let (length_scales, signal_variance, noise) = unpack(&theta);
    GpSurrogate::with_hyperparameters(inputs, outputs, length_scales, signal_variance, noise)
}

impl GpSurrogate {
    /// Conditions on the data for fixed hyperparameters.
    pub fn with_hyperparameters(
        inputs: &[Vec<f64>],
        outputs: &[f64],
        length_scales: Vec<f64>,
        signal_variance: f64,
        noise: f64,
    ) -> Result<Self> {
        if length_scales.iter().any(|&l| !(l > 0.0)) || !(signal_variance > 0.0) || !(noise >= 0.0)
        {
            return Err(TriageError::domain("GP hyperparameters must be positive"));
        }
        let mean = outputs.iter().sum::<f64>() / outputs.len() as f64;
        let yc: Vec<f64> = outputs.iter().map(|y| y - mean).collect();
        let f = factor(inputs, &yc, &length_scales, signal_variance, noise)?;
        Ok(Self {
            inputs: inputs.to_vec(),
            outputs: outputs.to_vec(),
            output_mean: mean,
            length_scales,
            signal_variance,
            noise_variance: f.noise,
            chol: f.chol,
            alpha: f.alpha,
        })
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signal_variance * matern52(scaled_distance(a, b, &self.length_scales))
    }

    /// Predictive mean and standard deviation of the latent function at a
    /// unit-cube point (points outside the cube are allowed).
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let ks: Vec<f64> = self.inputs.iter().map(|xi| self.kernel(xi, x)).collect();
        let mu = self.output_mean + ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        let v = self.chol.solve_lower(&ks);
        let var = self.signal_variance - v.iter().map(|z| z * z).sum::<f64>();
        (mu, var.max(0.0).sqrt())
    }

    pub fn best_output(&self, direction: Direction) -> f64 {
        let it = self.outputs.iter().copied();
        match direction {
            Direction::Maximize => it.fold(f64::NEG_INFINITY, f64::max),
            Direction::Minimize => it.fold(f64::INFINITY, f64::min),
        }
    }
}

pub fn gp_posterior(s: &GpSurrogate, x: &[f64]) -> (f64, f64) {
    s.posterior(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }
}

/// Expected improvement over `best`; zero-variance points score their plain
/// improvement.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64, direction: Direction) -> f64 {
    let gain = match direction {
        Direction::Maximize => mu - best,
        Direction::Minimize => best - mu,
    };
    if !(sigma > 0.0) {
        return gain.max(0.0);
    }
    let n = Normal::standard();
    let z = gain / sigma;
    (gain * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn interpolates_without_noise() {
        let x = pts(&[0.1, 0.4, 0.55, 0.9]);
        let y = [1.0, -0.5, 0.3, 2.0];
        let gp = gp_fit(
            &x,
            &y,
            &GpConfig {
                fit_noise: false,
                ..Default::default()
            },
        )
        .unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (mu, sd) = gp.posterior(xi);
            assert!((mu - yi).abs() < 1e-6, "{mu} vs {yi}");
            assert!(sd * sd <= gp.noise_variance + 1e-6);
        }
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let x = pts(&[0.2, 0.7]);
        let gp = gp_fit(
            &x,
            &[1.0, 3.0],
            &GpConfig {
                fit_noise: false,
                ..Default::default()
            },
        )
        .unwrap();
        let far = [1e4 * gp.length_scales[0].max(1.0)];
        let (mu, sd) = gp.posterior(&far);
        assert!((mu - 2.0).abs() < 1e-9);
        assert!((sd * sd - gp.signal_variance).abs() < 1e-9 * gp.signal_variance);
    }

    #[test]
    fn symmetric_midpoint_averages() {
        let x = pts(&[0.25, 0.75]);
        let gp = GpSurrogate::with_hyperparameters(&x, &[1.0, 5.0], vec![0.4], 2.0, 0.0).unwrap();
        assert!((gp.posterior(&[0.5]).0 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_duplicates_rejected() {
        assert!(gp_fit(&pts(&[0.5]), &[1.0], &GpConfig::default()).is_err());
        assert!(matches!(
            gp_fit(&pts(&[0.5, 0.5]), &[1.0, 2.0], &GpConfig::default()),
            Err(TriageError::Degenerate(_))
        ));
    }

    #[test]
    fn shift_invariance() {
        let x = pts(&[0.1, 0.3, 0.8]);
        let a =
            GpSurrogate::with_hyperparameters(&x, &[1.0, 2.0, 0.5], vec![0.3], 1.0, 1e-6).unwrap();
        let b = GpSurrogate::with_hyperparameters(&x, &[11.0, 12.0, 10.5], vec![0.3], 1.0, 1e-6)
            .unwrap();
        for q in [0.0, 0.2, 0.5, 1.0] {
            assert!((a.posterior(&[q]).0 + 10.0 - b.posterior(&[q]).0).abs() < 1e-9);
        }
    }

    #[test]
    fn ei_values() {
        assert_eq!(
            expected_improvement(1.0, 0.0, 1.0, Direction::Maximize),
            0.0
        );
        assert_eq!(
            expected_improvement(2.0, 0.0, 1.0, Direction::Maximize),
            1.0
        );
        assert_eq!(
            expected_improvement(2.0, 0.0, 1.0, Direction::Minimize),
            0.0
        );
        assert!(
            (expected_improvement(0.0, 1.0, 0.0, Direction::Maximize) - 0.398_942_280_4).abs()
                < 1e-9
        );
        let e: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&s| expected_improvement(3.0, s, 3.0, Direction::Minimize))
            .collect();
        assert!(e[0] < e[1] && e[1] < e[2]);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let (x, v) = nelder_mead(
            &mut |p: &[f64]| (p[0] - 1.0).powi(2) + 10.0 * (p[1] + 2.0).powi(2),
            &[0.0, 0.0],
            1.0,
            2000,
            1e-14,
        );
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] + 2.0).abs() < 1e-4 && v < 1e-8);
    }
}
