//! Gaussian-process Bayesian optimization of boosting hyperparameters.

mod gp;
mod space;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gp::{
    expected_improvement, gp_fit, gp_posterior, log_marginal_likelihood, matern52, nelder_mead,
    Direction, GpConfig, GpSurrogate, MIN_JITTER,
};
pub use space::{
    gbdt_params_from, gbdt_search_space, ParamDescriptor, ParamKind, ParamSpace, Scale,
};

use crate::error::{Result, TriageError};

pub const N_CANDIDATES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub params: BTreeMap<String, f64>,
    pub cv_score: f64,
    pub fold_scores: Vec<f64>,
    /// Wall-clock seconds spent in the objective.
    pub elapsed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub values: Vec<f64>,
    pub ei: f64,
    /// EI of every raw quasi-random candidate, in evaluation order.
    pub candidate_ei: Vec<f64>,
}

fn shift(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

/// Maximizes EI over seeded quasi-random candidates, then refines the winner
/// one coordinate at a time. Integer coordinates are rounded before scoring.
pub fn propose_next(
    gp: &GpSurrogate,
    space: &ParamSpace,
    direction: Direction,
    seed: u64,
) -> Proposal {
    let d = space.dim();
    let best = gp.best_output(direction);
    let ei_at = |u: &[f64]| {
        let (mu, sd) = gp.posterior(u);
        expected_improvement(mu, sd, best, direction)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sh = shift(&mut rng, d);
    let mut best_u = Vec::new();
    let mut best_ei = f64::NEG_INFINITY;
    let mut candidate_ei = Vec::with_capacity(N_CANDIDATES);
    for i in 0..N_CANDIDATES {
        let u = space.snap_unit(&space::halton(i, d, &sh));
        let e = ei_at(&u);
        candidate_ei.push(e);
        if e > best_ei {
            best_ei = e;
            best_u = u;
        }
    }
    for _sweep in 0..3 {
        let mut improved = false;
        for j in 0..d {
            let desc = &space.params()[j];
            let moves: Vec<f64> = match desc.kind {
                ParamKind::Integer => {
                    let v = desc.from_unit(best_u[j]);
                    [v - 1.0, v + 1.0]
                        .iter()
                        .filter(|x| **x >= desc.lower && **x <= desc.upper)
                        .map(|&x| desc.to_unit(x))
                        .collect()
                }
                ParamKind::Continuous => [0.05, 0.01, 0.002]
                    .iter()
                    .flat_map(|s| [best_u[j] - s, best_u[j] + s])
                    .map(|x| x.clamp(0.0, 1.0))
                    .collect(),
            };
            for m in moves {
                let mut u = best_u.clone();
                u[j] = m;
                let u = space.snap_unit(&u);
                let e = ei_at(&u);
                if e > best_ei {
                    best_ei = e;
                    best_u = u;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Proposal {
        values: space.from_unit(&best_u),
        ei: best_ei,
        candidate_ei,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub budget: usize,
    pub n_init: usize,
    pub direction: Direction,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            budget: 40,
            n_init: 10,
            direction: Direction::Maximize,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoResult {
    pub best: Trial,
    pub history: Vec<Trial>,
}

fn worst(scores: impl Iterator<Item = f64>, direction: Direction) -> Option<f64> {
    scores
        .filter(|v| v.is_finite())
        .reduce(|a, b| if direction.better(a, b) { b } else { a })
}

/// Runs `n_init` quasi-random trials, then `budget - n_init` rounds of
/// fit surrogate, propose, evaluate. The objective returns per-fold scores;
/// a failing objective is logged and scored as the worst score seen.
pub fn bayes_opt<F>(mut objective: F, space: &ParamSpace, cfg: &BoConfig) -> Result<BoResult>
where
    F: FnMut(&BTreeMap<String, f64>) -> Result<Vec<f64>>,
{
    if cfg.n_init < 2 || cfg.budget < cfg.n_init {
        return Err(TriageError::domain(format!(
            "need budget >= n_init >= 2 (budget {}, n_init {})",
            cfg.budget, cfg.n_init
        )));
    }
    let d = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init_shift = shift(&mut rng, d);
    let mut history: Vec<Trial> = Vec::with_capacity(cfg.budget);
    let mut evaluate = |values: Vec<f64>, history: &mut Vec<Trial>| {
        let params = space.named(&values);
        let started = Instant::now();
        let outcome = objective(&params).and_then(|folds| {
            if folds.is_empty() || folds.iter().any(|v| !v.is_finite()) {
                Err(TriageError::Degenerate(
                    "objective returned no finite fold scores".into(),
                ))
            } else {
                Ok(folds)
            }
        });
        let elapsed = started.elapsed().as_secs_f64();
        let trial = match outcome {
            Ok(folds) => Trial {
                params,
                cv_score: folds.iter().sum::<f64>() / folds.len() as f64,
                fold_scores: folds,
                elapsed,
                error: None,
            },
            Err(e) => Trial {
                params,
                cv_score: worst(history.iter().map(|t| t.cv_score), cfg.direction)
                    .unwrap_or(f64::NAN),
                fold_scores: Vec::new(),
                elapsed,
                error: Some(e.to_string()),
            },
        };
        history.push(trial);
    };
    for i in 0..cfg.n_init {
        let values = space.from_unit(&space::halton(i, d, &init_shift));
        evaluate(values, &mut history);
    }
    for round in cfg.n_init..cfg.budget {
        let fill = worst(history.iter().map(|t| t.cv_score), cfg.direction);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for t in &history {
            let y = if t.cv_score.is_finite() {
                Some(t.cv_score)
            } else {
                fill
            };
            if let Some(y) = y {
                xs.push(space.to_unit(&space.values_of(&t.params)?));
                ys.push(y);
            }
        }
        let gp_cfg = GpConfig {
            seed: cfg.seed.wrapping_add(round as u64),
            ..GpConfig::default()
        };
        let round_seed = rng.random::<u64>();
        let values = match gp_fit(&xs, &ys, &gp_cfg) {
            Ok(gp) => propose_next(&gp, space, cfg.direction, round_seed),
            Err(_) => Proposal {
                values: space.from_unit(&space::halton(round, d, &init_shift)),
                ei: 0.0,
                candidate_ei: Vec::new(),
            },
        }
        .values;
        evaluate(values, &mut history);
    }
    let Some(fill) = worst(history.iter().map(|t| t.cv_score), cfg.direction) else {
        return Err(TriageError::Degenerate(format!(
            "every trial failed; first error: {}",
            history[0].error.as_deref().unwrap_or("unknown")
        )));
    };
    for t in &mut history {
        if !t.cv_score.is_finite() {
            t.cv_score = fill;
        }
    }
    let mut best = 0;
    for (i, t) in history.iter().enumerate() {
        if t.error.is_none()
            && (history[best].error.is_some()
                || cfg.direction.better(t.cv_score, history[best].cv_score))
        {
            best = i;
        }
    }
    Ok(BoResult {
        best: history[best].clone(),
        history,
    })
}

/// One JSON object per line.
pub fn write_trials_jsonl<W: Write>(trials: &[Trial], mut out: W) -> Result<()> {
    for t in trials {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")
            .map_err(|e| TriageError::io("trials", e))?;
    }
    Ok(())
}

pub fn read_trials_jsonl(text: &str) -> Result<Vec<Trial>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
