use serde::{Deserialize, Serialize};

use super::RecordTable;
use crate::error::{Result, TriageError};

/// Summary of one feature over its observed cells. Statistics are `None`
/// when the feature has no observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub unit: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub iqr: Option<f64>,
    pub max: Option<f64>,
    pub coverage: f64,
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub features: Vec<FeatureSummary>,
}

impl SummaryStats {
    pub fn get(&self, name: &str) -> Option<&FeatureSummary> {
        self.features.iter().find(|f| f.name == name)
    }
}

/// Quantile of an ascending-sorted sample, interpolating linearly between order statistics.
pub fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Two-sample Kolmogorov-Smirnov statistic: sup |F_a - F_b| over the pooled sample.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(TriageError::domain(
            "ks_two_sample needs two non-empty samples",
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn summarize(table: &RecordTable) -> SummaryStats {
    let n = table.n_patients();
    let labels = table.special_care();
    let features = table
        .features()
        .iter()
        .enumerate()
        .map(|(c, spec)| {
            let mut obs = Vec::new();
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for r in 0..n {
                let v = table.values().get(r, c);
                if v.is_nan() {
                    continue;
                }
                obs.push(v);
                if let Some(l) = labels {
                    if l[r] {
                        pos.push(v)
                    } else {
                        neg.push(v)
                    }
                }
            }
            let coverage = if n == 0 {
                0.0
            } else {
                obs.len() as f64 / n as f64
            };
            let ks = ks_two_sample(&pos, &neg).unwrap_or(0.0);
            if obs.is_empty() {
                return FeatureSummary {
                    name: spec.name.clone(),
                    unit: spec.unit.clone(),
                    mean: None,
                    std: None,
                    min: None,
                    iqr: None,
                    max: None,
                    coverage,
                    ks,
                };
            }
            obs.sort_by(f64::total_cmp);
            let k = obs.len() as f64;
            let mean = obs.iter().sum::<f64>() / k;
            let std = if obs.len() > 1 {
                (obs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            FeatureSummary {
                name: spec.name.clone(),
                unit: spec.unit.clone(),
                // Summation error can push a constant column's mean a ulp outside [min, max].
                mean: Some(mean.clamp(obs[0], obs[obs.len() - 1])),
                std: Some(std),
                min: Some(obs[0]),
                iqr: Some(quantile_linear(&obs, 0.75) - quantile_linear(&obs, 0.25)),
                max: Some(obs[obs.len() - 1]),
                coverage,
                ks,
            }
        })
        .collect();
    SummaryStats { features }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureSpec;
    use crate::matrix::{Matrix, MISSING};
    use proptest::prelude::*;

    fn one_col(vals: &[f64], labels: Option<Vec<bool>>) -> RecordTable {
        let ids = (0..vals.len()).map(|i| format!("p{i}")).collect();
        let rows: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v]).collect();
        RecordTable::new(
            ids,
            vec![FeatureSpec::continuous("x", "")],
            Matrix::from_rows(&rows, 1).unwrap(),
            labels,
            None,
        )
        .unwrap()
    }

    #[test]
    fn basic_summary() {
        let s = summarize(&one_col(&[1.0, 2.0, 3.0], None));
        let f = &s.features[0];
        assert_eq!(f.mean, Some(2.0));
        assert_eq!(f.min, Some(1.0));
        assert_eq!(f.max, Some(3.0));
        assert_eq!(f.coverage, 1.0);
        assert_eq!(f.ks, 0.0);
    }

    #[test]
    fn coverage_counts_observed() {
        let mut v = vec![MISSING; 10];
        v[2] = 4.0;
        v[7] = 5.0;
        assert_eq!(summarize(&one_col(&v, None)).features[0].coverage, 0.2);
    }

    #[test]
    fn constant_and_empty_columns() {
        let f = &summarize(&one_col(&[5.0, 5.0, 5.0], None)).features[0];
        assert_eq!(f.std, Some(0.0));
        assert_eq!(f.iqr, Some(0.0));
        let e = &summarize(&one_col(&[MISSING, MISSING], None)).features[0];
        assert_eq!(e.coverage, 0.0);
        assert!(e.mean.is_none() && e.iqr.is_none());
    }

    #[test]
    fn ks_examples() {
        assert_eq!(
            ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[10.0, 11.0]).unwrap(), 1.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.5]).unwrap(), 0.5);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn summary_ks_splits_on_labels() {
        let t = one_col(
            &[0.0, 1.0, 10.0, 11.0],
            Some(vec![false, false, true, true]),
        );
        assert_eq!(summarize(&t).features[0].ks, 1.0);
    }

    /// Oracle: evaluate both ECDFs at every pooled point.
    fn ks_bruteforce(a: &[f64], b: &[f64]) -> f64 {
        let ecdf =
            |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        a.iter()
            .chain(b)
            .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
            .fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn ks_symmetric_monotone_invariant_and_matches_oracle(
            a in prop::collection::vec(-50i32..50, 1..30),
            b in prop::collection::vec(-50i32..50, 1..30),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let d = ks_two_sample(&a, &b).unwrap();
            prop_assert_eq!(d, ks_two_sample(&b, &a).unwrap());
            prop_assert!((d - ks_bruteforce(&a, &b)).abs() < 1e-12);
            let ta: Vec<f64> = a.iter().map(|v| v.powi(3) + 5.0 * v).collect();
            let tb: Vec<f64> = b.iter().map(|v| v.powi(3) + 5.0 * v).collect();
            prop_assert_eq!(d, ks_two_sample(&ta, &tb).unwrap());
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn summary_permutation_invariant(vals in prop::collection::vec(prop_oneof![Just(f64::NAN), -100.0f64..100.0], 1..25), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = vals.clone();
            shuffled.shuffle(&mut rng);
            let a = summarize(&one_col(&vals, None)).features[0].clone();
            let b = summarize(&one_col(&shuffled, None)).features[0].clone();
            prop_assert_eq!(a.min, b.min);
            prop_assert_eq!(a.max, b.max);
            prop_assert_eq!(a.iqr, b.iqr);
            prop_assert_eq!(a.coverage, b.coverage);
            if let (Some(x), Some(y)) = (a.mean, b.mean) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
                let (sa, sb) = (a.std.unwrap(), b.std.unwrap());
                prop_assert!((sa - sb).abs() <= 1e-9 * (1.0 + sa));
                prop_assert!(a.min.unwrap() <= x && x <= a.max.unwrap());
            }
        }
    }
}
