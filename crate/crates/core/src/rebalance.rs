//! SMOTE oversampling of the minority class, with optional random
//! under-sampling of the majority class. Applied to training folds only.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};
use crate::matrix::{Matrix, Standardizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority/majority count ratio after resampling.
    pub target_ratio: f64,
    /// Fraction of majority rows kept.
    pub undersample_majority: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target_ratio: 1.0,
            undersample_majority: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(TriageError::domain("k_neighbors must be at least 1"));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(TriageError::domain("target_ratio must lie in (0, 1]"));
        }
        if !(self.undersample_majority > 0.0 && self.undersample_majority <= 1.0) {
            return Err(TriageError::domain(
                "undersample_majority must lie in (0, 1]",
            ));
        }
        Ok(())
    }
}

/// Where an output row came from. Indices refer to rows of the input matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RowOrigin {
    Original(usize),
    Synthetic {
        base: usize,
        neighbor: usize,
        gap: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Resampled {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub origin: Vec<RowOrigin>,
    pub minority_label: f64,
}

/// Binary labels must be 0/1. Kept majority rows and every original minority
/// row come first in input order, followed by the synthetic rows.
pub fn smote_resample(x: &Matrix, y: &[f64], cfg: &SmoteConfig) -> Result<Resampled> {
    cfg.validate()?;
    x.ensure_dense("SMOTE")?;
    if x.n_rows() != y.len() {
        return Err(TriageError::schema(
            "feature rows and labels differ in length",
        ));
    }
    if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(TriageError::domain(format!(
            "SMOTE labels must be 0 or 1, got {v}"
        )));
    }
    let ones: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1.0).collect();
    let zeros: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0.0).collect();
    if ones.is_empty() || zeros.is_empty() {
        return Err(TriageError::domain("SMOTE needs both classes present"));
    }
    let (minority, majority, minority_label) = if ones.len() <= zeros.len() {
        (ones, zeros, 1.0)
    } else {
        (zeros, ones, 0.0)
    };
    if minority.len() < 2 {
        return Err(TriageError::domain(
            "SMOTE needs at least two minority rows",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let keep_majority = ((majority.len() as f64 * cfg.undersample_majority).round() as usize)
        .clamp(1, majority.len());
    let mut kept_major: Vec<usize> = if keep_majority == majority.len() {
        majority.clone()
    } else {
        sample(&mut rng, majority.len(), keep_majority)
            .into_iter()
            .map(|i| majority[i])
            .collect()
    };
    kept_major.sort_unstable();

    let target_minority = (cfg.target_ratio * keep_majority as f64).round() as usize;
    let n_synthetic = target_minority.saturating_sub(minority.len());
    let k = cfg.k_neighbors.min(minority.len() - 1);

    let mut originals: Vec<usize> = kept_major.iter().chain(&minority).copied().collect();
    originals.sort_unstable();
    let mut out = x.select_rows(&originals);
    let mut labels: Vec<f64> = originals.iter().map(|&i| y[i]).collect();
    let mut origin: Vec<RowOrigin> = originals.iter().map(|&i| RowOrigin::Original(i)).collect();

    if n_synthetic > 0 {
        let neighbors = minority_neighbors(x, &minority, k);
        for _ in 0..n_synthetic {
            let a = rng.random_range(0..minority.len());
            let b = neighbors[a][rng.random_range(0..k)];
            let gap: f64 = rng.random();
            let (base, nb) = (x.row(minority[a]), x.row(minority[b]));
            let row: Vec<f64> = base
                .iter()
                .zip(nb)
                .map(|(p, q)| p + gap * (q - p))
                .collect();
            out.push_row(&row)?;
            labels.push(minority_label);
            origin.push(RowOrigin::Synthetic {
                base: minority[a],
                neighbor: minority[b],
                gap,
            });
        }
    }
    Ok(Resampled {
        x: out,
        y: labels,
        origin,
        minority_label,
    })
}

/// k nearest minority neighbours (positions within `minority`) of every
/// minority row, by Euclidean distance on standardized features.
fn minority_neighbors(x: &Matrix, minority: &[usize], k: usize) -> Vec<Vec<usize>> {
    let z = Standardizer::fit(x).transform(&x.select_rows(minority));
    let n = minority.len();
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dist: f64 = z
                        .row(i)
                        .iter()
                        .zip(z.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (dist, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(minority: &[[f64; 2]], n_major: usize) -> (Matrix, Vec<f64>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n_major {
            rows.push(vec![10.0 + i as f64, -5.0 - (i % 7) as f64]);
            y.push(0.0);
        }
        for p in minority {
            rows.push(p.to_vec());
            y.push(1.0);
        }
        (Matrix::from_rows(&rows, 2).unwrap(), y)
    }

    #[test]
    fn two_point_minority_stays_on_segment() {
        let (x, y) = data(&[[0.0, 0.0], [1.0, 1.0]], 20);
        let cfg = SmoteConfig {
            k_neighbors: 1,
            ..Default::default()
        };
        let r = smote_resample(&x, &y, &cfg).unwrap();
        let synth: Vec<_> = r
            .origin
            .iter()
            .enumerate()
            .filter(|(_, o)| matches!(o, RowOrigin::Synthetic { .. }))
            .collect();
        assert_eq!(synth.len(), 18);
        for (i, _) in synth {
            let row = r.x.row(i);
            assert!((0.0..=1.0).contains(&row[0]));
            assert_eq!(row[0], row[1]);
        }
    }

    #[test]
    fn identical_minority_points_reproduced() {
        let (x, y) = data(&[[2.0, 3.0]; 4], 12);
        let r = smote_resample(&x, &y, &SmoteConfig::default()).unwrap();
        for (i, o) in r.origin.iter().enumerate() {
            if matches!(o, RowOrigin::Synthetic { .. }) {
                assert_eq!(r.x.row(i), &[2.0, 3.0]);
            }
        }
    }

    #[test]
    fn ratio_arithmetic() {
        let minority: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, (i * i) as f64]).collect();
        let (x, y) = data(&minority, 90);
        let r = smote_resample(&x, &y, &SmoteConfig::default()).unwrap();
        let synthetic = r
            .origin
            .iter()
            .filter(|o| matches!(o, RowOrigin::Synthetic { .. }))
            .count();
        assert_eq!(synthetic, 80);
        assert_eq!(r.y.iter().filter(|&&v| v == 1.0).count(), 90);
    }

    #[test]
    fn undersampling_keeps_requested_fraction() {
        let minority: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 1.0]).collect();
        let (x, y) = data(&minority, 90);
        let cfg = SmoteConfig {
            undersample_majority: 0.5,
            target_ratio: 0.5,
            ..Default::default()
        };
        let r = smote_resample(&x, &y, &cfg).unwrap();
        let major = r.y.iter().filter(|&&v| v == 0.0).count();
        let minor = r.y.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(major, 45);
        assert_eq!(minor, 23);
        // original minority rows all retained
        for i in 90..100 {
            assert!(r.origin.contains(&RowOrigin::Original(i)));
        }
    }

    #[test]
    fn error_paths() {
        let (x, _) = data(&[[0.0, 0.0], [1.0, 1.0]], 3);
        assert!(smote_resample(&x, &[0.0; 5], &SmoteConfig::default()).is_err());
        let (x1, y1) = data(&[[0.0, 0.0]], 3);
        assert!(smote_resample(&x1, &y1, &SmoteConfig::default()).is_err());
        let (x, y) = data(&[[0.0, 0.0], [1.0, 1.0]], 3);
        let bad = SmoteConfig {
            target_ratio: 0.0,
            ..Default::default()
        };
        assert!(smote_resample(&x, &y, &bad).is_err());
        let mut sparse = x.clone();
        sparse.set(0, 0, f64::NAN);
        assert!(smote_resample(&sparse, &y, &SmoteConfig::default()).is_err());
    }
}
