//! Pipeline stages. Each stage reads its inputs from the output directory
//! and writes its own files there, so stages can be rerun independently.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::{info, warn};
use triage_core::artifact::{ModelArtifact, TrainingMetadata, FORMAT_VERSION};
use triage_core::baselines::{self, default_candidates, write_leaderboard, CandidateSpec, Family};
use triage_core::dataset::{
    infer_schema, load_csv, load_csv_with, summarize, synth_generate, write_csv, CsvOptions,
};
use triage_core::eval::{
    best_threshold, brier, classify_metrics, isotonic_fit, platt_fit, pr_auc, pr_curve,
    regress_metrics, reliability_curve, roc_auc, roc_curve, CalibratorModel, RegressMetrics,
};
use triage_core::explain::{
    background_sample, global_importance, FeatureImportance, TreeExplainer,
};
use triage_core::folds::holdout;
use triage_core::pipeline::{cross_validate, PipelineConfig};
use triage_core::tune::{
    bayes_opt, gbdt_params_from, gbdt_search_space, write_trials_jsonl, BoConfig, Direction,
};
use triage_core::{GbdtParams, Matrix, RecordTable, Task};
use triage_serve::{CLASSIFIER_FILE, DAYS_FILE};

use crate::config::{CalibrationKind, RunConfig, Target};
use crate::error::CliError;

pub type CmdResult = Result<Vec<PathBuf>, CliError>;

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn data_csv(&self) -> PathBuf {
        self.root.join("data.csv")
    }

    pub fn summary_csv(&self) -> PathBuf {
        self.root.join("summary.csv")
    }

    pub fn target_dir(&self, t: Target) -> PathBuf {
        self.root.join(t.name())
    }

    pub fn leaderboard(&self, t: Target) -> PathBuf {
        self.target_dir(t).join("leaderboard.csv")
    }

    pub fn trials(&self, t: Target) -> PathBuf {
        self.target_dir(t).join("trials.jsonl")
    }

    pub fn best_params(&self, t: Target) -> PathBuf {
        self.target_dir(t).join("best_params.json")
    }

    pub fn metrics(&self, t: Target) -> PathBuf {
        self.target_dir(t).join("metrics.json")
    }

    pub fn importance(&self, t: Target) -> PathBuf {
        self.target_dir(t).join("importance.csv")
    }

    pub fn roc(&self) -> PathBuf {
        self.target_dir(Target::SpecialCare).join("roc.csv")
    }

    pub fn pr(&self) -> PathBuf {
        self.target_dir(Target::SpecialCare).join("pr.csv")
    }

    pub fn calibration(&self) -> PathBuf {
        self.target_dir(Target::SpecialCare).join("calibration.csv")
    }

    pub fn scatter(&self) -> PathBuf {
        self.target_dir(Target::Days).join("scatter.csv")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn model(&self, t: Target) -> PathBuf {
        self.models_dir().join(match t {
            Target::SpecialCare => CLASSIFIER_FILE,
            Target::Days => DAYS_FILE,
        })
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    /// Every file the full chain writes before the manifest, with the
    /// command that produces it.
    pub fn declared(&self, cfg: &RunConfig) -> Vec<(PathBuf, &'static str)> {
        let mut files = Vec::new();
        if cfg.data.synthetic.is_some() {
            files.push((self.data_csv(), "synth"));
        }
        files.push((self.summary_csv(), "explore"));
        for t in cfg.task.targets() {
            files.push((self.leaderboard(t), "screen"));
            files.push((self.trials(t), "tune"));
            files.push((self.best_params(t), "tune"));
            files.push((self.model(t), "train"));
            files.push((self.metrics(t), "evaluate"));
            match t {
                Target::SpecialCare => {
                    files.push((self.roc(), "evaluate"));
                    files.push((self.pr(), "evaluate"));
                    files.push((self.calibration(), "evaluate"));
                }
                Target::Days => files.push((self.scatter(), "evaluate")),
            }
            files.push((self.importance(t), "explain"));
        }
        files
    }
}

/// Writes through a temporary sibling so readers never see a partial file.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| triage_core::TriageError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| triage_core::TriageError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| triage_core::TriageError::io(path, e))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> Result<T, CliError> {
    if !path.exists() {
        return Err(CliError::missing(path, hint));
    }
    let text = fs::read_to_string(path).map_err(|e| triage_core::TriageError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn load_model(layout: &Layout, t: Target) -> Result<ModelArtifact, CliError> {
    let path = layout.model(t);
    if !path.exists() {
        return Err(CliError::missing(&path, "run `triage train` first"));
    }
    Ok(ModelArtifact::load(&path)?)
}

fn csv_bytes(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(triage_core::TriageError::from)?;
    for r in rows {
        w.write_record(&r).map_err(triage_core::TriageError::from)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// The patient table plus the row partition every stage agrees on.
pub struct Prepared {
    pub table: RecordTable,
    /// Training rows (everything not held out for testing).
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Training rows the classifier is fitted on.
    pub fit: Vec<usize>,
    /// Training rows reserved for calibration and threshold choice.
    pub calibration: Vec<usize>,
}

impl Prepared {
    pub fn x(&self, rows: &[usize]) -> Matrix {
        self.table.values().select_rows(rows)
    }

    pub fn y(&self, t: Target, rows: &[usize]) -> Result<Vec<f64>, CliError> {
        let all = match t {
            Target::SpecialCare => self.table.labels_f64()?,
            Target::Days => self.table.days_vec()?,
        };
        Ok(rows.iter().map(|&i| all[i]).collect())
    }

    pub fn names(&self) -> Vec<String> {
        self.table.feature_names()
    }
}

pub fn load_table(cfg: &RunConfig, layout: &Layout) -> Result<RecordTable, CliError> {
    if let Some(src) = &cfg.data.csv {
        let schema = infer_schema(&src.path)?;
        let opts = CsvOptions {
            na_tokens: src.na_tokens.clone(),
        };
        return Ok(load_csv_with(&src.path, &schema, &opts)?);
    }
    let synth = cfg.data.synthetic.as_ref().expect("validated data source");
    let path = layout.data_csv();
    if !path.exists() {
        return Err(CliError::missing(&path, "run `triage synth` first"));
    }
    Ok(load_csv(&path, &synth.spec(cfg.seed).schema())?)
}

pub fn prepare(cfg: &RunConfig, layout: &Layout) -> Result<Prepared, CliError> {
    let table = load_table(cfg, layout)?;
    let labels = table.labels_f64().ok();
    let n = table.n_patients();
    let (train, test) = holdout(n, labels.as_deref(), cfg.split.test_fraction, cfg.seed)?;
    let train_labels: Option<Vec<f64>> = labels
        .as_ref()
        .map(|l| train.iter().map(|&i| l[i]).collect());
    let (fit_pos, cal_pos) = holdout(
        train.len(),
        train_labels.as_deref(),
        cfg.split.calibration_fraction,
        cfg.seed.wrapping_add(1),
    )?;
    let fit = fit_pos.iter().map(|&i| train[i]).collect();
    let calibration = cal_pos.iter().map(|&i| train[i]).collect();
    Ok(Prepared {
        table,
        train,
        test,
        fit,
        calibration,
    })
}

pub fn pipeline_config(cfg: &RunConfig, t: Target, params: GbdtParams) -> PipelineConfig {
    match t {
        Target::SpecialCare => {
            let mut p = PipelineConfig::new(Task::Classify, cfg.classifier.imputer, params);
            p.soft_svd = cfg.classifier.soft_svd.clone();
            p.smote = cfg.classifier.smote.clone();
            p
        }
        Target::Days => {
            let mut p = PipelineConfig::new(Task::Regress, cfg.days.imputer, params);
            p.soft_svd = cfg.days.soft_svd.clone();
            p
        }
    }
}

pub fn cmd_synth(cfg: &RunConfig) -> CmdResult {
    let Some(src) = &cfg.data.synthetic else {
        return Err(CliError::Config(
            "synth needs a [data.synthetic] source".into(),
        ));
    };
    let layout = Layout::new(&cfg.out_dir);
    let table = synth_generate(&src.spec(cfg.seed))?;
    fs::create_dir_all(layout.root())
        .map_err(|e| triage_core::TriageError::io(layout.root(), e))?;
    let path = layout.data_csv();
    write_csv(&table, &path)?;
    info!(
        patients = table.n_patients(),
        features = table.n_features(),
        "wrote {}",
        path.display()
    );
    Ok(vec![path])
}

pub fn cmd_explore(cfg: &RunConfig) -> CmdResult {
    let layout = Layout::new(&cfg.out_dir);
    let table = load_table(cfg, &layout)?;
    let stats = summarize(&table);
    let rows = stats.features.iter().map(|f| {
        vec![
            f.name.clone(),
            f.unit.clone(),
            opt(f.mean),
            opt(f.std),
            opt(f.min),
            opt(f.iqr),
            opt(f.max),
            num(f.coverage),
            num(f.ks),
        ]
    });
    let bytes = csv_bytes(
        &[
            "Feature", "Unit", "Mean", "Std", "Min", "IQR", "Max", "Coverage", "KS",
        ],
        rows,
    )?;
    let path = layout.summary_csv();
    write_file(&path, &bytes)?;
    info!("wrote {}", path.display());
    Ok(vec![path])
}

pub fn cmd_screen(cfg: &RunConfig) -> CmdResult {
    let layout = Layout::new(&cfg.out_dir);
    let prep = prepare(cfg, &layout)?;
    let x = prep.x(&prep.train);
    let mut written = Vec::new();
    for t in cfg.task.targets() {
        let y = prep.y(t, &prep.train)?;
        let candidates = default_candidates(t.task());
        let mut rows =
            baselines::screen(&candidates, &x, &y, t.task(), cfg.screening.folds, cfg.seed)?;
        if !cfg.report.timings {
            rows.iter_mut().for_each(|r| r.time_taken = 0.0);
        }
        for r in &rows {
            info!("{}: {r}", t.name());
        }
        let mut bytes = Vec::new();
        write_leaderboard(&rows, t.task(), &mut bytes)?;
        let path = layout.leaderboard(t);
        write_file(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Tuning outcome stored next to the trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestParams {
    pub target: String,
    /// `roc_auc` or `neg_rmse`; higher is better for both.
    pub metric: String,
    pub params: GbdtParams,
    pub cv_score: f64,
    pub fold_scores: Vec<f64>,
    /// Same folds, library-default boosting parameters.
    pub default_cv_score: f64,
    pub default_fold_scores: Vec<f64>,
    pub trials: usize,
}

pub fn cmd_tune(cfg: &RunConfig) -> CmdResult {
    let layout = Layout::new(&cfg.out_dir);
    let prep = prepare(cfg, &layout)?;
    let x = prep.x(&prep.train);
    let names = prep.names();
    let seed = cfg.tuning_seed();
    let space = gbdt_search_space();
    let mut written = Vec::new();
    for t in cfg.task.targets() {
        let y = prep.y(t, &prep.train)?;
        let default = cross_validate(
            &pipeline_config(cfg, t, GbdtParams::default()),
            &x,
            &y,
            &names,
            cfg.tuning.folds,
            seed,
        )?;
        info!(
            "{}: default parameters score {:.4}",
            t.name(),
            default.mean_score
        );
        let objective = |named: &BTreeMap<String, f64>| {
            let pcfg = pipeline_config(cfg, t, gbdt_params_from(named)?);
            Ok(cross_validate(&pcfg, &x, &y, &names, cfg.tuning.folds, seed)?.fold_scores)
        };
        let bo = BoConfig {
            budget: cfg.tuning.budget,
            n_init: cfg.tuning.n_init,
            direction: Direction::Maximize,
            seed,
        };
        let mut result = bayes_opt(objective, &space, &bo)?;
        for (i, trial) in result.history.iter().enumerate() {
            match &trial.error {
                Some(e) => warn!("{} trial {i} failed: {e}", t.name()),
                None => info!("{} trial {i}: {:.4}", t.name(), trial.cv_score),
            }
        }
        if !cfg.report.timings {
            result.history.iter_mut().for_each(|tr| tr.elapsed = 0.0);
        }
        let mut log = Vec::new();
        write_trials_jsonl(&result.history, &mut log)?;
        let trials_path = layout.trials(t);
        write_file(&trials_path, &log)?;
        let best = BestParams {
            target: t.name().into(),
            metric: match t {
                Target::SpecialCare => "roc_auc",
                Target::Days => "neg_rmse",
            }
            .into(),
            params: gbdt_params_from(&result.best.params)?,
            cv_score: result.best.cv_score,
            fold_scores: result.best.fold_scores.clone(),
            default_cv_score: default.mean_score,
            default_fold_scores: default.fold_scores,
            trials: result.history.len(),
        };
        info!(
            "{}: best cv score {:.4} with {:?}",
            t.name(),
            best.cv_score,
            best.params
        );
        let best_path = layout.best_params(t);
        write_json(&best_path, &best)?;
        written.extend([trials_path, best_path]);
    }
    Ok(written)
}

fn fit_calibrator(
    kind: CalibrationKind,
    raw: &[f64],
    y: &[f64],
) -> Result<Option<CalibratorModel>, CliError> {
    Ok(match kind {
        CalibrationKind::None => None,
        CalibrationKind::Platt => Some(platt_fit(raw, y)?),
        CalibrationKind::Isotonic => Some(isotonic_fit(raw, y)?),
    })
}

pub fn cmd_train(cfg: &RunConfig) -> CmdResult {
    let layout = Layout::new(&cfg.out_dir);
    let prep = prepare(cfg, &layout)?;
    let names = prep.names();
    let mut written = Vec::new();
    for t in cfg.task.targets() {
        let best: BestParams = read_json(&layout.best_params(t), "run `triage tune` first")?;
        let pcfg = pipeline_config(cfg, t, best.params.clone());
        // The classifier leaves a calibration fold out; the days model sees every training patient.
        let rows = match t {
            Target::SpecialCare => &prep.fit,
            Target::Days => &prep.train,
        };
        let x = prep.x(rows);
        let y = prep.y(t, rows)?;
        let pipe = pcfg.fit(&x, &y, &names, cfg.seed)?;
        for w in &pipe.warnings {
            warn!("{}: {w}", t.name());
        }
        let xi = pipe.transform(&x)?;
        let background = background_sample(&xi, cfg.explain.background_rows, cfg.seed);
        let explainer = TreeExplainer::new(&pipe.model, &background)?;
        let importance = global_importance(&explainer, &pipe.model, &background)?;

        let mut metrics = BTreeMap::new();
        metrics.insert(format!("cv_{}", best.metric), best.cv_score);
        metrics.insert(format!("default_cv_{}", best.metric), best.default_cv_score);
        let (calibrator, thresholds) = match t {
            Target::SpecialCare => {
                let xc = prep.x(&prep.calibration);
                let yc = prep.y(t, &prep.calibration)?;
                let raw = pipe.predict(&xc)?;
                let calibrator = fit_calibrator(cfg.classifier.calibration, &raw, &yc)?;
                let raw_t = best_threshold(&raw, &yc)?;
                let cal_t = match &calibrator {
                    Some(c) => Some(best_threshold(&c.apply_all(&raw), &yc)?),
                    None => None,
                };
                metrics.insert("calibration_fold_roc_auc".into(), roc_auc(&raw, &yc)?);
                (calibrator, (Some(raw_t), cal_t))
            }
            Target::Days => (None, (None, None)),
        };
        let artifact = ModelArtifact {
            format_version: FORMAT_VERSION,
            task: t.task(),
            features: prep.table.features().to_vec(),
            imputer: pipe.imputer,
            shap_covers: explainer.covers.clone(),
            model: pipe.model,
            calibrator,
            metadata: TrainingMetadata {
                seed: cfg.seed,
                config_hash: cfg.hash(),
                training_rows: rows.len(),
                metrics,
                best_threshold: thresholds.0,
                best_threshold_calibrated: thresholds.1,
                importance,
            },
        };
        let path = layout.model(t);
        fs::create_dir_all(layout.models_dir())
            .map_err(|e| triage_core::TriageError::io(layout.models_dir(), e))?;
        artifact.save(&path)?;
        info!("wrote {}", path.display());
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEvaluation {
    pub test_rows: usize,
    pub positives: usize,
    pub calibrated: bool,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub brier: f64,
    pub raw_roc_auc: f64,
    pub raw_brier: f64,
    /// Operating point chosen on the calibration fold, in the scale of the
    /// reported probabilities.
    pub best_threshold: f64,
    pub balanced_accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    /// Seeded uniform-score baseline on the same rows.
    pub coin_roc_auc: f64,
    pub cv_roc_auc: Option<f64>,
    pub default_cv_roc_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaysEvaluation {
    pub test_rows: usize,
    /// Metrics on served predictions (negatives clamped to zero) against the
    /// training-mean baseline.
    #[serde(flatten)]
    pub metrics: RegressMetrics,
    pub baseline_value: f64,
    pub raw_rmse: f64,
    pub clamped_predictions: usize,
    pub cv_rmse: Option<f64>,
    pub default_cv_rmse: Option<f64>,
}

pub fn cmd_evaluate(cfg: &RunConfig) -> CmdResult {
    let layout = Layout::new(&cfg.out_dir);
    let prep = prepare(cfg, &layout)?;
    let x = prep.x(&prep.test);
    let mut written = Vec::new();
    for t in cfg.task.targets() {
        let artifact = load_model(&layout, t)?;
        let y = prep.y(t, &prep.test)?;
        let meta = &artifact.metadata.metrics;
        match t {
            Target::SpecialCare => {
                let probs = artifact.predict(&x)?;
                let raw = artifact.model.predict(&artifact.imputer.transform(&x)?)?;
                let threshold = artifact
                    .metadata
                    .best_threshold_calibrated
                    .or(artifact.metadata.best_threshold)
                    .ok_or_else(|| {
                        CliError::Internal("classifier artifact has no threshold".into())
                    })?;
                let cm = classify_metrics(&probs, &y, threshold)?;
                let coin = CandidateSpec::new("Coin", Task::Classify, Family::Coin)?;
                let coin_scores = baselines::fit_predict(&coin, &x, &y, &x, cfg.seed)?.scores;
                let report = ClassifierEvaluation {
                    test_rows: y.len(),
                    positives: y.iter().filter(|&&v| v == 1.0).count(),
                    calibrated: artifact.calibrator.is_some(),
                    roc_auc: roc_auc(&probs, &y)?,
                    pr_auc: pr_auc(&probs, &y)?,
                    brier: brier(&probs, &y)?,
                    raw_roc_auc: roc_auc(&raw, &y)?,
                    raw_brier: brier(&raw, &y)?,
                    best_threshold: threshold,
                    balanced_accuracy: cm.balanced_accuracy,
                    sensitivity: cm.recall,
                    specificity: if cm.tn + cm.fp == 0 {
                        0.0
                    } else {
                        cm.tn as f64 / (cm.tn + cm.fp) as f64
                    },
                    precision: cm.precision,
                    f1: cm.f1,
                    coin_roc_auc: roc_auc(&coin_scores, &y)?,
                    cv_roc_auc: meta.get("cv_roc_auc").copied(),
                    default_cv_roc_auc: meta.get("default_cv_roc_auc").copied(),
                };
                info!(
                    "special_care: held-out ROC AUC {:.4}, PR AUC {:.4}, Brier {:.4}",
                    report.roc_auc, report.pr_auc, report.brier
                );
                write_json(&layout.metrics(t), &report)?;

                let curve = |pts: Vec<triage_core::eval::CurvePoint>| {
                    pts.into_iter()
                        .map(|p| vec![num(p.x), num(p.y), num(p.threshold)])
                        .collect::<Vec<_>>()
                };
                write_file(
                    &layout.roc(),
                    &csv_bytes(&["fpr", "tpr", "threshold"], curve(roc_curve(&probs, &y)?))?,
                )?;
                write_file(
                    &layout.pr(),
                    &csv_bytes(
                        &["recall", "precision", "threshold"],
                        curve(pr_curve(&probs, &y)?),
                    )?,
                )?;
                let bins = reliability_curve(&probs, &y, cfg.classifier.reliability_bins)?;
                let rows = bins.iter().map(|b| {
                    vec![
                        num(b.bin_center),
                        num(b.mean_predicted),
                        num(b.observed),
                        b.count.to_string(),
                    ]
                });
                write_file(
                    &layout.calibration(),
                    &csv_bytes(&["bin_center", "mean_predicted", "observed", "count"], rows)?,
                )?;
                written.extend([
                    layout.metrics(t),
                    layout.roc(),
                    layout.pr(),
                    layout.calibration(),
                ]);
            }
            Target::Days => {
                let raw = artifact.predict(&x)?;
                let served: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
                let train_y = prep.y(t, &prep.train)?;
                let baseline_value = train_y.iter().sum::<f64>() / train_y.len() as f64;
                let metrics = regress_metrics(&served, &y, &vec![baseline_value; y.len()])?;
                let raw_rmse = (raw
                    .iter()
                    .zip(&y)
                    .map(|(p, v)| (p - v) * (p - v))
                    .sum::<f64>()
                    / y.len() as f64)
                    .sqrt();
                let report = DaysEvaluation {
                    test_rows: y.len(),
                    baseline_value,
                    raw_rmse,
                    clamped_predictions: raw.iter().filter(|&&v| v < 0.0).count(),
                    cv_rmse: meta.get("cv_neg_rmse").map(|v| -v),
                    default_cv_rmse: meta.get("default_cv_neg_rmse").map(|v| -v),
                    metrics,
                };
                info!(
                    "days: held-out RMSE {:.4} vs baseline {:.4} ({:.1}% better)",
                    report.metrics.rmse,
                    report.metrics.baseline_rmse,
                    report.metrics.rmse_improvement_pct.unwrap_or(f64::NAN)
                );
                write_json(&layout.metrics(t), &report)?;
                let ids = prep.table.patient_ids();
                let rows =
                    prep.test.iter().enumerate().map(|(k, &i)| {
                        vec![ids[i].clone(), num(y[k]), num(served[k]), num(raw[k])]
                    });
                write_file(
                    &layout.scatter(),
                    &csv_bytes(
                        &[
                            "patient_id",
                            "true_days",
                            "predicted_days",
                            "raw_prediction",
                        ],
                        rows,
                    )?,
                )?;
                written.extend([layout.metrics(t), layout.scatter()]);
            }
        }
    }
    Ok(written)
}

pub fn cmd_explain(cfg: &RunConfig) -> CmdResult {
    let layout = Layout::new(&cfg.out_dir);
    let prep = prepare(cfg, &layout)?;
    let x = prep.x(&prep.test);
    let mut written = Vec::new();
    for t in cfg.task.targets() {
        let artifact = load_model(&layout, t)?;
        let explainer = artifact.explainer()?;
        let xi = artifact.imputer.transform(&x)?;
        let importance: Vec<FeatureImportance> =
            global_importance(&explainer, &artifact.model, &xi)?;
        let rows = importance.iter().enumerate().map(|(i, f)| {
            vec![
                (i + 1).to_string(),
                f.feature.clone(),
                num(f.mean_abs_attribution),
            ]
        });
        let path = layout.importance(t);
        write_file(
            &path,
            &csv_bytes(&["rank", "feature", "mean_abs_attribution"], rows)?,
        )?;
        if let Some(top) = importance.first() {
            info!("{}: most influential feature {}", t.name(), top.feature);
        }
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub command: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub timings_recorded: bool,
    pub files: Vec<ManifestEntry>,
}

pub fn cmd_report(cfg: &RunConfig) -> CmdResult {
    let layout = Layout::new(&cfg.out_dir);
    let mut files = Vec::new();
    for (path, command) in layout.declared(cfg) {
        if !path.exists() {
            return Err(CliError::missing(
                &path,
                format!("run `triage {command}` first"),
            ));
        }
        let bytes = fs::read(&path).map_err(|e| triage_core::TriageError::io(&path, e))?;
        let rel = path.strip_prefix(layout.root()).unwrap_or(&path);
        files.push(ManifestEntry {
            path: rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/"),
            command: command.into(),
            bytes: bytes.len() as u64,
            sha256: Sha256::digest(&bytes)
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect(),
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        timings_recorded: cfg.report.timings,
        files,
    };
    let path = layout.manifest();
    write_json(&path, &manifest)?;
    info!(
        "wrote {} listing {} files",
        path.display(),
        manifest.files.len()
    );
    Ok(vec![path])
}

/// Every stage in order.
pub fn cmd_run(cfg: &RunConfig) -> CmdResult {
    let mut written = Vec::new();
    if cfg.data.synthetic.is_some() {
        written.extend(cmd_synth(cfg)?);
    }
    for stage in [
        cmd_explore,
        cmd_screen,
        cmd_tune,
        cmd_train,
        cmd_evaluate,
        cmd_explain,
        cmd_report,
    ] {
        written.extend(stage(cfg)?);
    }
    Ok(written)
}
