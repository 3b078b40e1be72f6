use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use triage_core::artifact::{ModelArtifact, FORMAT_VERSION};
use triage_core::explain::{FeatureImportance, TreeExplainer};
use triage_core::{FeatureSpec, Result as CoreResult, Task, TriageError, MISSING};

pub const CLASSIFIER_FILE: &str = "special_care.json";
pub const DAYS_FILE: &str = "days.json";
pub const TOP_ATTRIBUTIONS: usize = 5;
pub const TOP_IMPORTANCE: usize = 20;
pub const MAX_OVERRIDES: usize = 64;
pub const API_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
}

impl ApiError {
    pub fn bad_request(msg: impl Into<String>) -> Self {
        Self {
            status: 400,
            error: msg.into(),
        }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Self {
            status: 500,
            error: msg.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionEntry {
    pub feature: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    /// Served probability: calibrated when requested and available.
    pub probability: Option<f64>,
    pub raw_probability: Option<f64>,
    pub margin: Option<f64>,
    pub calibrated: bool,
    pub threshold: Option<f64>,
    pub threshold_flag: Option<bool>,
    /// Never negative; see `days_clamped`.
    pub expected_days: Option<f64>,
    pub raw_days: Option<f64>,
    pub days_clamped: bool,
    /// Largest contributions to the classifier margin (associational).
    pub attributions: Vec<AttributionEntry>,
    pub days_attributions: Vec<AttributionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub task: Task,
    pub seed: u64,
    pub config_hash: String,
    pub training_rows: usize,
    pub metrics: BTreeMap<String, f64>,
    pub n_trees: usize,
    pub calibrated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResponse {
    pub schema_version: u32,
    pub format_version: u32,
    pub features: Vec<FeatureSpec>,
    pub best_threshold: Option<f64>,
    pub best_threshold_calibrated: Option<f64>,
    pub models: Vec<ModelInfo>,
    pub importance: Vec<FeatureImportance>,
}

struct Loaded {
    artifact: ModelArtifact,
    explainer: TreeExplainer,
}

impl Loaded {
    fn new(artifact: ModelArtifact) -> CoreResult<Self> {
        let explainer = artifact.explainer()?;
        Ok(Self {
            artifact,
            explainer,
        })
    }

    fn top_attributions(&self, prepared: &[f64]) -> CoreResult<Vec<AttributionEntry>> {
        let a = self.explainer.explain_row(&self.artifact.model, prepared)?;
        let mut idx: Vec<usize> = (0..a.values.len()).collect();
        idx.sort_by(|&i, &j| {
            a.values[j]
                .abs()
                .total_cmp(&a.values[i].abs())
                .then(i.cmp(&j))
        });
        Ok(idx
            .into_iter()
            .take(TOP_ATTRIBUTIONS)
            .map(|i| AttributionEntry {
                feature: self.artifact.features[i].name.clone(),
                value: a.values[i],
            })
            .collect())
    }
}

/// An immutable pair of loaded models sharing one feature schema.
pub struct Snapshot {
    classifier: Option<Loaded>,
    days: Option<Loaded>,
    features: Vec<FeatureSpec>,
    index: HashMap<String, usize>,
}

impl Snapshot {
    pub fn from_artifacts(
        classifier: Option<ModelArtifact>,
        days: Option<ModelArtifact>,
    ) -> CoreResult<Self> {
        if classifier
            .as_ref()
            .is_some_and(|a| a.task != Task::Classify)
        {
            return Err(TriageError::schema(
                "classifier artifact is not a classification model",
            ));
        }
        if days.as_ref().is_some_and(|a| a.task != Task::Regress) {
            return Err(TriageError::schema(
                "days artifact is not a regression model",
            ));
        }
        let features = match (&classifier, &days) {
            (Some(c), Some(d)) => {
                if c.features != d.features {
                    return Err(TriageError::schema(
                        "classifier and days artifacts use different feature schemas",
                    ));
                }
                c.features.clone()
            }
            (Some(a), None) | (None, Some(a)) => a.features.clone(),
            (None, None) => return Err(TriageError::schema("no model artifacts to serve")),
        };
        let index = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), i))
            .collect();
        Ok(Self {
            classifier: classifier.map(Loaded::new).transpose()?,
            days: days.map(Loaded::new).transpose()?,
            features,
            index,
        })
    }

    /// Loads whichever of the two artifact files exist in `dir`.
    pub fn load_dir(dir: &Path) -> CoreResult<Self> {
        let read = |name: &str| -> CoreResult<Option<ModelArtifact>> {
            let p = dir.join(name);
            if p.exists() {
                ModelArtifact::load(&p).map(Some)
            } else {
                Ok(None)
            }
        };
        let classifier = read(CLASSIFIER_FILE)?;
        let days = read(DAYS_FILE)?;
        if classifier.is_none() && days.is_none() {
            return Err(TriageError::MissingInput {
                path: dir.join(CLASSIFIER_FILE),
                hint: "run `triage train` first".into(),
            });
        }
        Self::from_artifacts(classifier, days)
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    /// Raw feature row from a name → value map; absent names and nulls are missing.
    pub fn parse_features(&self, map: &Map<String, Value>) -> Result<Vec<f64>, ApiError> {
        let mut row = vec![MISSING; self.features.len()];
        self.apply_overrides(&mut row, map)?;
        Ok(row)
    }

    pub fn apply_overrides(
        &self,
        row: &mut [f64],
        map: &Map<String, Value>,
    ) -> Result<(), ApiError> {
        for (name, v) in map {
            let &i = self
                .index
                .get(name)
                .ok_or_else(|| ApiError::bad_request(format!("unknown feature {name:?}")))?;
            row[i] = match v {
                Value::Null => MISSING,
                Value::Number(n) => match n.as_f64() {
                    Some(x) if x.is_finite() => x,
                    _ => {
                        return Err(ApiError::bad_request(format!(
                            "feature {name:?} is not a finite number"
                        )))
                    }
                },
                _ => {
                    return Err(ApiError::bad_request(format!(
                        "feature {name:?} must be a number or null"
                    )))
                }
            };
        }
        Ok(())
    }

    pub fn predict(&self, row: &[f64], calibrated: bool) -> Result<PredictResponse, ApiError> {
        let internal = |e: TriageError| ApiError::internal(e.to_string());
        let mut out = PredictResponse {
            probability: None,
            raw_probability: None,
            margin: None,
            calibrated: false,
            threshold: None,
            threshold_flag: None,
            expected_days: None,
            raw_days: None,
            days_clamped: false,
            attributions: Vec::new(),
            days_attributions: Vec::new(),
        };
        if let Some(c) = &self.classifier {
            let a = &c.artifact;
            let prepared = a.prepare_row(row).map_err(internal)?;
            let margin = a.model.predict_margin_row(&prepared).map_err(internal)?;
            let raw = a.model.link(margin);
            let use_cal = calibrated && a.calibrator.is_some();
            let (p, t) = if use_cal {
                (
                    a.predict_row(row).map_err(internal)?,
                    a.metadata.best_threshold_calibrated,
                )
            } else {
                (raw, a.metadata.best_threshold)
            };
            out.probability = Some(p);
            out.raw_probability = Some(raw);
            out.margin = Some(margin);
            out.calibrated = use_cal;
            out.threshold = t;
            out.threshold_flag = t.map(|t| p >= t);
            out.attributions = c.top_attributions(&prepared).map_err(internal)?;
        }
        if let Some(d) = &self.days {
            let prepared = d.artifact.prepare_row(row).map_err(internal)?;
            let raw = d.artifact.model.predict_row(&prepared).map_err(internal)?;
            out.raw_days = Some(raw);
            out.days_clamped = raw < 0.0;
            out.expected_days = Some(raw.max(0.0));
            out.days_attributions = d.top_attributions(&prepared).map_err(internal)?;
        }
        Ok(out)
    }

    pub fn meta(&self) -> MetaResponse {
        let loaded: Vec<&Loaded> = self.classifier.iter().chain(&self.days).collect();
        let models = loaded
            .iter()
            .map(|l| {
                let m = &l.artifact.metadata;
                ModelInfo {
                    task: l.artifact.task,
                    seed: m.seed,
                    config_hash: m.config_hash.clone(),
                    training_rows: m.training_rows,
                    metrics: m.metrics.clone(),
                    n_trees: l.artifact.model.trees.len(),
                    calibrated: l.artifact.calibrator.is_some(),
                }
            })
            .collect();
        let primary = loaded[0];
        MetaResponse {
            schema_version: API_SCHEMA_VERSION,
            format_version: FORMAT_VERSION,
            features: self.features.clone(),
            best_threshold: self
                .classifier
                .as_ref()
                .and_then(|c| c.artifact.metadata.best_threshold),
            best_threshold_calibrated: self
                .classifier
                .as_ref()
                .and_then(|c| c.artifact.metadata.best_threshold_calibrated),
            models,
            importance: primary
                .artifact
                .metadata
                .importance
                .iter()
                .take(TOP_IMPORTANCE)
                .cloned()
                .collect(),
        }
    }
}
