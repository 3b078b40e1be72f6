//! Seeded surrogate generator for sparse lab-exam cohorts.
//!
//! Each feature has a marginal (mean, std, coverage) and a class shift
//! `signal` in standard-deviation units: positive patients draw from
//! `mean + std * (z + signal)`. Binary features shift their success
//! probability by `signal * std` instead. Cells are observed independently
//! with probability `coverage`.
//!
//! Days under special care are zero for negatives. For positives,
//! `log(days) = log_mean + log_sd * e + sum_j severity_j * z_j` where `z_j` is
//! the patient's within-class standardized deviation on each observed
//! feature; the draw is rounded and floored at one day.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureSpec, RecordTable};
use crate::error::{Result, TriageError};
use crate::matrix::{Matrix, MISSING};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFeature {
    pub spec: FeatureSpec,
    pub mean: f64,
    pub std: f64,
    pub coverage: f64,
    #[serde(default)]
    pub signal: f64,
    #[serde(default)]
    pub severity: f64,
    /// Continuous draws are clamped from below at this value.
    #[serde(default)]
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaysModel {
    pub log_mean: f64,
    pub log_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_patients: usize,
    pub prevalence: f64,
    pub features: Vec<SyntheticFeature>,
    pub days: DaysModel,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 {
            return Err(TriageError::domain("n_patients must be positive"));
        }
        if !(0.0..=1.0).contains(&self.prevalence) {
            return Err(TriageError::domain("prevalence must lie in [0, 1]"));
        }
        for f in &self.features {
            if !(0.0..=1.0).contains(&f.coverage) {
                return Err(TriageError::domain(format!(
                    "coverage of {} outside [0, 1]",
                    f.spec.name
                )));
            }
            if !(f.std >= 0.0)
                || !f.mean.is_finite()
                || !f.signal.is_finite()
                || !f.severity.is_finite()
            {
                return Err(TriageError::domain(format!(
                    "invalid marginal for {}",
                    f.spec.name
                )));
            }
        }
        if !(self.days.log_sd >= 0.0) || !self.days.log_mean.is_finite() {
            return Err(TriageError::domain("invalid days model"));
        }
        let specs: Vec<FeatureSpec> = self.features.iter().map(|f| f.spec.clone()).collect();
        super::validate_schema(&specs)
    }

    pub fn schema(&self) -> Vec<FeatureSpec> {
        self.features.iter().map(|f| f.spec.clone()).collect()
    }

    /// The bundled 30-feature cohort: demographics plus lab exams with
    /// marginals taken from published hospital cohort statistics, a handful
    /// of informative exams, and a days model whose all-patient mean is
    /// about 1.5 days.
    pub fn demo(n_patients: usize, seed: u64) -> Self {
        // name, unit, mean, std, coverage, signal, severity
        const LABS: &[(&str, &str, f64, f64, f64, f64, f64)] = &[
            ("age", "years", 42.48, 13.99, 0.99, 2.2, 0.55),
            ("mch", "pg", 29.16, 2.26, 0.18, 0.0, 0.0),
            ("hematocrit", "%", 39.61, 5.48, 0.18, -1.0, 0.0),
            ("cmch", "pg", 33.09, 1.23, 0.18, 0.0, 0.0),
            ("erythrocytes", "million/mm3", 4.06, 0.80, 0.18, 0.0, 0.0),
            ("leukocytes", "/mm3", 6258.91, 3541.01, 0.18, 1.5, 0.3),
            ("rdw", "%", 13.22, 2.51, 0.18, 0.0, 0.0),
            ("hemoglobin", "g/dL", 12.97, 1.99, 0.18, 0.0, 0.0),
            ("platelets", "/mm3", 205748.36, 78948.08, 0.18, 0.0, 0.0),
            ("neutrophils_pct", "%", 61.71, 14.57, 0.18, 1.2, 0.0),
            ("eosinophils_abs", "/mm3", 81.96, 112.61, 0.18, 0.0, 0.0),
            ("monocytes_pct", "%", 9.24, 4.49, 0.18, 0.0, 0.0),
            ("eosinophils_pct", "%", 1.04, 1.72, 0.18, 0.0, 0.0),
            ("lymphocytes_pct", "%", 25.75, 12.38, 0.18, -1.5, -0.3),
            ("basophils_pct", "%", 0.07, 0.30, 0.18, 0.0, 0.0),
            ("neutrophils_abs", "/mm3", 4132.13, 3142.68, 0.18, 1.0, 0.0),
            ("lymphocytes_abs", "/mm3", 1463.58, 841.17, 0.18, 0.0, 0.0),
            ("basophils_abs", "/mm3", 24.15, 25.71, 0.18, 0.0, 0.0),
            ("monocytes_abs", "/mm3", 575.24, 420.51, 0.18, 0.0, 0.0),
            ("platelet_volume", "fL", 9.85, 0.92, 0.18, 0.0, 0.0),
            ("creatinine", "mg/dL", 0.51, 0.86, 0.16, 0.0, 0.0),
            ("urea", "mg/dL", 34.71, 18.32, 0.16, 2.0, 0.4),
            ("potassium", "mEq/L", 3.54, 0.55, 0.15, 0.0, 0.0),
            ("sodium", "mEq/L", 138.42, 3.05, 0.14, 0.0, 0.0),
            ("alt", "U/L", 37.26, 38.03, 0.13, 0.0, 0.0),
            ("ast", "U/L", 35.76, 45.41, 0.13, 0.0, 0.0),
            ("ldh", "U/L", 488.87, 345.04, 0.11, 1.8, 0.4),
            ("crp", "mg/L", 10.0, 10.0, 0.12, 0.0, 0.0),
            ("d_dimer", "ng/mL", 500.0, 300.0, 0.10, 2.0, 0.0),
        ];
        let mut features = vec![SyntheticFeature {
            spec: FeatureSpec::binary("sex"),
            mean: 0.46,
            std: 0.50,
            coverage: 1.0,
            signal: 0.15,
            severity: 0.0,
            floor: None,
        }];
        features.extend(
            LABS.iter()
                .map(
                    |&(name, unit, mean, std, coverage, signal, severity)| SyntheticFeature {
                        spec: FeatureSpec::continuous(name, unit),
                        mean,
                        std,
                        coverage,
                        signal,
                        severity,
                        floor: Some(0.0),
                    },
                ),
        );
        Self {
            n_patients,
            prevalence: 0.07,
            features,
            days: DaysModel {
                log_mean: 2.85,
                log_sd: 0.3,
            },
            seed,
        }
    }

    /// Same marginals with every class shift and severity zeroed.
    pub fn without_signal(mut self) -> Self {
        for f in &mut self.features {
            f.signal = 0.0;
            f.severity = 0.0;
        }
        self
    }
}

pub fn synth_generate(spec: &SyntheticSpec) -> Result<RecordTable> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_patients;
    let p = spec.features.len();
    let mut values = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    let mut days = Vec::with_capacity(n);
    let width = n.to_string().len().max(6);
    for _ in 0..n {
        let positive = rng.random::<f64>() < spec.prevalence;
        let shift = if positive { 1.0 } else { 0.0 };
        let mut severity = 0.0;
        for f in &spec.features {
            // Fixed draw order keeps streams aligned whatever the outcome.
            let observed = rng.random::<f64>() < f.coverage;
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let (value, dev) = match f.spec.kind {
                FeatureKind::Continuous => {
                    let mut v = f.mean + f.std * (z + f.signal * shift);
                    if let Some(lo) = f.floor {
                        v = v.max(lo);
                    }
                    (v, z)
                }
                FeatureKind::Binary => {
                    let prob = (f.mean + f.signal * f.std * shift).clamp(0.0, 1.0);
                    let v = if u < prob { 1.0 } else { 0.0 };
                    let dev = if f.std > 0.0 { (v - prob) / f.std } else { 0.0 };
                    (v, dev)
                }
            };
            if observed {
                values.push(value);
                severity += f.severity * dev;
            } else {
                values.push(MISSING);
            }
        }
        let e: f64 = rng.sample(StandardNormal);
        labels.push(positive);
        days.push(if positive {
            (spec.days.log_mean + spec.days.log_sd * e + severity)
                .exp()
                .round()
                .max(1.0)
        } else {
            0.0
        });
    }
    let ids = (1..=n).map(|i| format!("P{i:0width$}")).collect();
    RecordTable::new(
        ids,
        spec.schema(),
        Matrix::new(n, p, values)?,
        Some(labels),
        Some(days),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ks_two_sample, summarize};

    #[test]
    fn deterministic_given_seed() {
        let spec = SyntheticSpec::demo(300, 7);
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        assert!(a.values().bit_eq(b.values()));
        assert_eq!(a.special_care(), b.special_care());
        assert_eq!(a.days(), b.days());
        let c = synth_generate(&SyntheticSpec { seed: 8, ..spec }).unwrap();
        assert!(!a.values().bit_eq(c.values()));
    }

    #[test]
    fn prevalence_matches_published_cohort() {
        // 9633 patients at 7%: 674 positives expected, binomial sd ~25.
        let t = synth_generate(&SyntheticSpec::demo(9633, 2021)).unwrap();
        let pos = t.special_care().unwrap().iter().filter(|&&b| b).count() as f64;
        let sd = (9633.0f64 * 0.07 * 0.93).sqrt();
        assert!((pos - 674.0).abs() <= 3.0 * sd, "positives {pos}");
    }

    #[test]
    fn coverage_within_two_points() {
        let spec = SyntheticSpec::demo(20_000, 3);
        let s = summarize(&synth_generate(&spec).unwrap());
        for (f, sf) in spec.features.iter().zip(&s.features) {
            assert!((f.coverage - sf.coverage).abs() <= 0.02, "{}", f.spec.name);
        }
    }

    #[test]
    fn days_zero_for_negatives_positive_for_positives() {
        let t = synth_generate(&SyntheticSpec::demo(5000, 11)).unwrap();
        let days = t.days().unwrap();
        let mut total = 0.0;
        for (l, d) in t.special_care().unwrap().iter().zip(days) {
            if *l {
                assert!(*d >= 1.0);
            } else {
                assert_eq!(*d, 0.0);
            }
            total += d;
        }
        let mean = total / days.len() as f64;
        assert!(mean > 0.9 && mean < 2.3, "mean days {mean}");
    }

    #[test]
    fn signal_shifts_positive_means() {
        let t = synth_generate(&SyntheticSpec::demo(20_000, 5)).unwrap();
        let age = 1;
        let (mut pos, mut neg) = (vec![], vec![]);
        for r in 0..t.n_patients() {
            let v = t.values().get(r, age);
            if v.is_nan() {
                continue;
            }
            if t.special_care().unwrap()[r] {
                pos.push(v)
            } else {
                neg.push(v)
            }
        }
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let shift = (m(&pos) - m(&neg)) / 13.99;
        assert!((shift - 2.2).abs() < 0.15, "age shift {shift}");
    }

    #[test]
    fn no_signal_ks_shrinks_with_n() {
        let ks_max = |n: usize| {
            let mut spec = SyntheticSpec::demo(n, 17).without_signal();
            spec.prevalence = 0.5;
            for f in &mut spec.features {
                f.coverage = 1.0;
            }
            let t = synth_generate(&spec).unwrap();
            let l = t.special_care().unwrap();
            (0..t.n_features())
                .map(|c| {
                    let (mut a, mut b) = (vec![], vec![]);
                    for r in 0..t.n_patients() {
                        if l[r] {
                            a.push(t.values().get(r, c))
                        } else {
                            b.push(t.values().get(r, c))
                        }
                    }
                    ks_two_sample(&a, &b).unwrap()
                })
                .fold(0.0, f64::max)
        };
        let small = ks_max(400);
        let large = ks_max(20_000);
        assert!(large < small);
        assert!(large < 0.05, "{large}");
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut s = SyntheticSpec::demo(10, 1);
        s.prevalence = 1.5;
        assert!(synth_generate(&s).is_err());
        let mut s = SyntheticSpec::demo(10, 1);
        s.features[3].coverage = -0.1;
        assert!(synth_generate(&s).is_err());
    }
}
