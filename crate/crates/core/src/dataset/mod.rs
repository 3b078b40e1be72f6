//! Patient × lab-exam tables: ingestion, first-exam selection, summaries.

mod csv_io;
mod stats;
pub mod synth;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};
use crate::matrix::Matrix;

pub use csv_io::{infer_schema, load_csv, load_csv_with, write_csv, CsvOptions};
pub use stats::{ks_two_sample, quantile_linear, summarize, FeatureSummary, SummaryStats};
pub use synth::{synth_generate, DaysModel, SyntheticFeature, SyntheticSpec};

pub const ID_COLUMN: &str = "patient_id";
pub const LABEL_COLUMN: &str = "special_care";
pub const DAYS_COLUMN: &str = "days";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>, unit: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            kind: FeatureKind::Continuous,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            unit: String::new(),
            kind: FeatureKind::Binary,
        }
    }
}

pub fn validate_schema(features: &[FeatureSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for f in features {
        if f.name.is_empty() {
            return Err(TriageError::schema("feature name must not be empty"));
        }
        if [ID_COLUMN, LABEL_COLUMN, DAYS_COLUMN].contains(&f.name.as_str()) {
            return Err(TriageError::schema(format!(
                "feature name {:?} collides with a reserved column",
                f.name
            )));
        }
        if !seen.insert(f.name.as_str()) {
            return Err(TriageError::schema(format!(
                "duplicate feature name {:?}",
                f.name
            )));
        }
    }
    Ok(())
}

/// Sparse patient × feature table. Missing cells are `NaN` in `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordTable {
    patient_ids: Vec<String>,
    features: Vec<FeatureSpec>,
    values: Matrix,
    special_care: Option<Vec<bool>>,
    days: Option<Vec<f64>>,
}

impl RecordTable {
    pub fn new(
        patient_ids: Vec<String>,
        features: Vec<FeatureSpec>,
        values: Matrix,
        special_care: Option<Vec<bool>>,
        days: Option<Vec<f64>>,
    ) -> Result<Self> {
        validate_schema(&features)?;
        let n = patient_ids.len();
        if values.n_rows() != n || values.n_cols() != features.len() {
            return Err(TriageError::schema(format!(
                "values are {}x{}, expected {}x{}",
                values.n_rows(),
                values.n_cols(),
                n,
                features.len()
            )));
        }
        if values.as_slice().iter().any(|v| v.is_infinite()) {
            return Err(TriageError::domain("table contains non-finite values"));
        }
        if let Some(l) = &special_care {
            if l.len() != n {
                return Err(TriageError::schema(
                    "special_care length differs from patient count",
                ));
            }
        }
        if let Some(d) = &days {
            if d.len() != n {
                return Err(TriageError::schema(
                    "days length differs from patient count",
                ));
            }
            if let Some((i, v)) = d
                .iter()
                .enumerate()
                .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
            {
                return Err(TriageError::domain(format!(
                    "days must be finite and non-negative (patient {}: {v})",
                    patient_ids[i]
                )));
            }
            if let Some(l) = &special_care {
                if let Some(i) = (0..n).find(|&i| !l[i] && d[i] != 0.0) {
                    return Err(TriageError::domain(format!(
                        "patient {} has no special care but {} days",
                        patient_ids[i], d[i]
                    )));
                }
            }
        }
        Ok(Self {
            patient_ids,
            features,
            values,
            special_care,
            days,
        })
    }

    pub fn n_patients(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn patient_ids(&self) -> &[String] {
        &self.patient_ids
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn special_care(&self) -> Option<&[bool]> {
        self.special_care.as_deref()
    }

    pub fn days(&self) -> Option<&[f64]> {
        self.days.as_deref()
    }

    /// Labels as 0/1 reals, or a domain error when the table is unlabeled.
    pub fn labels_f64(&self) -> Result<Vec<f64>> {
        self.special_care
            .as_ref()
            .map(|l| l.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
            .ok_or_else(|| TriageError::domain("table has no special_care column"))
    }

    pub fn days_vec(&self) -> Result<Vec<f64>> {
        self.days
            .clone()
            .ok_or_else(|| TriageError::domain("table has no days column"))
    }

    pub fn select_rows(&self, idx: &[usize]) -> RecordTable {
        RecordTable {
            patient_ids: idx.iter().map(|&i| self.patient_ids[i].clone()).collect(),
            features: self.features.clone(),
            values: self.values.select_rows(idx),
            special_care: self
                .special_care
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            days: self
                .days
                .as_ref()
                .map(|d| idx.iter().map(|&i| d[i]).collect()),
        }
    }

    /// Same rows and labels with the value matrix replaced (e.g. after imputation).
    pub fn with_values(&self, values: Matrix) -> Result<RecordTable> {
        RecordTable::new(
            self.patient_ids.clone(),
            self.features.clone(),
            values,
            self.special_care.clone(),
            self.days.clone(),
        )
    }
}

/// One timestamped lab-exam record before first-exam selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ExamEvent {
    pub patient_id: String,
    pub timestamp: i64,
    pub values: Vec<f64>,
    pub special_care: Option<bool>,
    pub days: Option<f64>,
}

/// Keeps the earliest event of every patient; equal timestamps keep the
/// first in input order. Output order is order of first appearance.
pub fn first_exam_events(events: &[ExamEvent]) -> Vec<ExamEvent> {
    let mut order: Vec<&str> = Vec::new();
    let mut best: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (i, e) in events.iter().enumerate() {
        match best.get(e.patient_id.as_str()) {
            None => {
                order.push(&e.patient_id);
                best.insert(&e.patient_id, i);
            }
            Some(&j) if e.timestamp < events[j].timestamp => {
                best.insert(&e.patient_id, i);
            }
            Some(_) => {}
        }
    }
    order.iter().map(|p| events[best[p]].clone()).collect()
}

pub fn first_exam_filter(events: &[ExamEvent], features: &[FeatureSpec]) -> Result<RecordTable> {
    let kept = first_exam_events(events);
    let rows: Vec<Vec<f64>> = kept.iter().map(|e| e.values.clone()).collect();
    let values = Matrix::from_rows(&rows, features.len())?;
    let labeled = kept.iter().all(|e| e.special_care.is_some());
    let with_days = kept.iter().all(|e| e.days.is_some());
    RecordTable::new(
        kept.iter().map(|e| e.patient_id.clone()).collect(),
        features.to_vec(),
        values,
        (labeled && !kept.is_empty())
            .then(|| kept.iter().map(|e| e.special_care.unwrap()).collect()),
        (with_days && !kept.is_empty()).then(|| kept.iter().map(|e| e.days.unwrap()).collect()),
    )
}
