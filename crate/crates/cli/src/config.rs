//! TOML run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use triage_core::dataset::SyntheticSpec;
use triage_core::impute::{ImputerKind, SoftSvdConfig};
use triage_core::rebalance::SmoteConfig;
use triage_core::Task;

use crate::error::CliError;

pub const DEMO_CONFIG: &str = include_str!("../configs/demo.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub task: TaskSelection,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub days: DaysConfig,
    #[serde(default)]
    pub screening: ScreeningConfig,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("triage-out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSelection {
    SpecialCare,
    Days,
    #[default]
    Both,
}

/// One of the two prediction targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    SpecialCare,
    Days,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::SpecialCare => "special_care",
            Target::Days => "days",
        }
    }

    pub fn task(self) -> Task {
        match self {
            Target::SpecialCare => Task::Classify,
            Target::Days => Task::Regress,
        }
    }
}

impl TaskSelection {
    pub fn targets(self) -> Vec<Target> {
        match self {
            TaskSelection::SpecialCare => vec![Target::SpecialCare],
            TaskSelection::Days => vec![Target::Days],
            TaskSelection::Both => vec![Target::SpecialCare, Target::Days],
        }
    }
}

/// Exactly one of `csv` or `synthetic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<CsvSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default = "default_na_tokens")]
    pub na_tokens: Vec<String>,
}

fn default_na_tokens() -> Vec<String> {
    vec!["NA".into()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Demo,
    /// Demo marginals with every class shift removed.
    NoSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub preset: Preset,
    pub n_patients: usize,
    /// Generator seed; the run seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Replaces the preset's special-care prevalence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prevalence: Option<f64>,
    /// Replaces every feature's coverage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
}

impl SyntheticSource {
    pub fn spec(&self, run_seed: u64) -> SyntheticSpec {
        let mut spec = SyntheticSpec::demo(self.n_patients, self.seed.unwrap_or(run_seed));
        if self.preset == Preset::NoSignal {
            spec = spec.without_signal();
        }
        if let Some(p) = self.prevalence {
            spec.prevalence = p;
        }
        if let Some(c) = self.coverage {
            spec.features.iter_mut().for_each(|f| f.coverage = c);
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Share of patients held out for evaluation.
    pub test_fraction: f64,
    /// Share of the remaining patients reserved for classifier calibration
    /// and threshold selection.
    pub calibration_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            calibration_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationKind {
    None,
    Platt,
    Isotonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub imputer: ImputerKind,
    pub soft_svd: SoftSvdConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smote: Option<SmoteConfig>,
    pub calibration: CalibrationKind,
    pub reliability_bins: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            imputer: ImputerKind::Median,
            soft_svd: SoftSvdConfig::default(),
            smote: None,
            calibration: CalibrationKind::Platt,
            reliability_bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaysConfig {
    pub imputer: ImputerKind,
    pub soft_svd: SoftSvdConfig,
}

impl Default for DaysConfig {
    fn default() -> Self {
        Self {
            imputer: ImputerKind::Passthrough,
            soft_svd: SoftSvdConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningConfig {
    pub folds: usize,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self { folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    pub budget: usize,
    pub n_init: usize,
    pub folds: usize,
    /// The run seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            budget: 40,
            n_init: 10,
            folds: 5,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Rows of training data used to estimate node covers.
    pub background_rows: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            background_rows: triage_core::explain::BACKGROUND_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Record wall-clock timings in leaderboard.csv and trials.jsonl. Turn
    /// off for byte-identical reports across runs.
    pub timings: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { timings: true }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn demo() -> Self {
        Self::from_toml(DEMO_CONFIG).expect("bundled demo config is valid")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        match (&self.data.csv, &self.data.synthetic) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("data needs exactly one source: [data.csv] or [data.synthetic]"),
        }
        if let Some(s) = &self.data.synthetic {
            if s.n_patients == 0 {
                return bad("data.synthetic.n_patients must be positive");
            }
            let unit = |v: Option<f64>| v.is_none_or(|v| (0.0..=1.0).contains(&v));
            if !unit(s.prevalence) || !unit(s.coverage) {
                return bad("data.synthetic prevalence and coverage must lie in [0, 1]");
            }
        }
        let frac_ok = |f: f64| f > 0.0 && f < 1.0;
        if !frac_ok(self.split.test_fraction) || !frac_ok(self.split.calibration_fraction) {
            return bad("split fractions must lie strictly between 0 and 1");
        }
        if self.screening.folds < 2 || self.tuning.folds < 2 {
            return bad("screening and tuning need at least 2 folds");
        }
        if self.tuning.n_init < 2 || self.tuning.budget < self.tuning.n_init {
            return bad("tuning needs budget >= n_init >= 2");
        }
        if self.classifier.reliability_bins < 2 {
            return bad("classifier.reliability_bins must be at least 2");
        }
        if self.explain.background_rows == 0 {
            return bad("explain.background_rows must be positive");
        }
        if let Some(s) = &self.classifier.smote {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn tuning_seed(&self) -> u64 {
        self.tuning.seed.unwrap_or(self.seed)
    }

    /// SHA-256 over the canonical JSON form with the output directory
    /// blanked, so the same run written elsewhere hashes the same.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = PathBuf::new();
        let json = serde_json::to_string(&canon).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
