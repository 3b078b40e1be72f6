//! Versioned JSON model artifact.
//!
//! Reals are written in shortest round-trip form and parsed with exact
//! rounding, so a saved model predicts bit-identically after loading.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{validate_schema, FeatureSpec};
use crate::error::{Result, TriageError};
use crate::eval::{CalibratorModel, Task};
use crate::explain::{FeatureImportance, TreeExplainer};
use crate::impute::ImputerModel;
use crate::matrix::Matrix;
use crate::trees::GbdtModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// SHA-256 of the canonical run configuration, hex encoded.
    pub config_hash: String,
    pub training_rows: usize,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    /// Youden-optimal cutoff on raw probabilities (classifiers only).
    #[serde(default)]
    pub best_threshold: Option<f64>,
    /// The same cutoff on calibrated probabilities, when a calibrator exists.
    #[serde(default)]
    pub best_threshold_calibrated: Option<f64>,
    #[serde(default)]
    pub importance: Vec<FeatureImportance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub task: Task,
    pub features: Vec<FeatureSpec>,
    pub imputer: ImputerModel,
    pub model: GbdtModel,
    #[serde(default)]
    pub calibrator: Option<CalibratorModel>,
    /// Background node covers per tree, for attributions at serving time.
    pub shap_covers: Vec<Vec<f64>>,
    pub metadata: TrainingMetadata,
}

impl ModelArtifact {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(TriageError::Version {
                found: self.format_version.to_string(),
                expected: FORMAT_VERSION,
            });
        }
        if self.features.is_empty() {
            return Err(TriageError::schema("artifact has an empty feature schema"));
        }
        validate_schema(&self.features)?;
        let names: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        if self
            .model
            .feature_names
            .iter()
            .map(String::as_str)
            .ne(names.iter().copied())
        {
            return Err(TriageError::schema(
                "model feature names disagree with the artifact schema",
            ));
        }
        if self.imputer.n_features() != self.features.len() {
            return Err(TriageError::schema(
                "imputer width disagrees with the artifact schema",
            ));
        }
        TreeExplainer::from_covers(&self.model, self.shap_covers.clone())?;
        Ok(())
    }

    pub fn explainer(&self) -> Result<TreeExplainer> {
        TreeExplainer::from_covers(&self.model, self.shap_covers.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Checks the version before decoding the rest, so a newer artifact is
    /// refused with its version rather than a field error.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("format_version")
            .ok_or_else(|| TriageError::schema("artifact has no format_version field"))?;
        if found.as_u64() != Some(FORMAT_VERSION as u64) {
            let found = match found {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            return Err(TriageError::Version {
                found,
                expected: FORMAT_VERSION,
            });
        }
        let artifact: ModelArtifact = serde_json::from_str(text)?;
        artifact.validate()?;
        Ok(artifact)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.validate()?;
        let text = self.to_json()?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text).map_err(|e| TriageError::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| TriageError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| TriageError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Model-space row (imputed) for a raw feature row.
    pub fn prepare_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.imputer.transform_row(row)
    }

    pub fn predict_margin_row(&self, row: &[f64]) -> Result<f64> {
        self.model.predict_margin_row(&self.prepare_row(row)?)
    }

    /// Probability (calibrated when available) or target estimate.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let raw = self.model.link(self.predict_margin_row(row)?);
        Ok(match (&self.calibrator, self.task) {
            (Some(c), Task::Classify) => c.apply(raw),
            _ => raw,
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.rows_iter().map(|r| self.predict_row(r)).collect()
    }
}
