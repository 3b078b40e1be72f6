use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};
use crate::trees::{GbdtParams, TUNING_BOUNDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Continuous,
    Integer,
}

/// `Log` maps `x` to `ln(1 + x - lower) / ln(1 + upper - lower)`, which
/// stretches the low end and tolerates a zero lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDescriptor {
    pub name: String,
    pub kind: ParamKind,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
}

impl ParamDescriptor {
    pub fn new(
        name: impl Into<String>,
        kind: ParamKind,
        lower: f64,
        upper: f64,
        scale: Scale,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            lower,
            upper,
            scale,
        }
    }

    /// Position of `x` in [0, 1].
    pub fn to_unit(&self, x: f64) -> f64 {
        let u = match self.scale {
            Scale::Linear => (x - self.lower) / (self.upper - self.lower),
            Scale::Log => (1.0 + x - self.lower).ln() / (1.0 + self.upper - self.lower).ln(),
        };
        u.clamp(0.0, 1.0)
    }

    /// Value at unit position `u`; integer parameters are rounded.
    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let x = match self.scale {
            Scale::Linear => self.lower + u * (self.upper - self.lower),
            Scale::Log => self.lower + (u * (1.0 + self.upper - self.lower).ln()).exp() - 1.0,
        };
        let x = x.clamp(self.lower, self.upper);
        match self.kind {
            ParamKind::Continuous => x,
            ParamKind::Integer => x.round(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    params: Vec<ParamDescriptor>,
}

impl ParamSpace {
    pub fn new(params: Vec<ParamDescriptor>) -> Result<Self> {
        if params.is_empty() {
            return Err(TriageError::domain("parameter space is empty"));
        }
        for p in &params {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(TriageError::domain(format!(
                    "{}: need finite lower < upper",
                    p.name
                )));
            }
            if p.kind == ParamKind::Integer && (p.lower.fract() != 0.0 || p.upper.fract() != 0.0) {
                return Err(TriageError::domain(format!(
                    "{}: integer bounds must be integral",
                    p.name
                )));
            }
        }
        let mut names: Vec<&str> = params.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(TriageError::domain("duplicate parameter names"));
        }
        Ok(Self { params })
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ParamDescriptor] {
        &self.params
    }

    pub fn to_unit(&self, values: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .zip(values)
            .map(|(p, &v)| p.to_unit(v))
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .zip(u)
            .map(|(p, &v)| p.from_unit(v))
            .collect()
    }

    /// Unit point moved onto the value grid the objective will actually see.
    pub fn snap_unit(&self, u: &[f64]) -> Vec<f64> {
        self.to_unit(&self.from_unit(u))
    }

    pub fn named(&self, values: &[f64]) -> BTreeMap<String, f64> {
        self.params
            .iter()
            .zip(values)
            .map(|(p, &v)| (p.name.clone(), v))
            .collect()
    }

    pub fn values_of(&self, named: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        self.params
            .iter()
            .map(|p| {
                named
                    .get(&p.name)
                    .copied()
                    .ok_or_else(|| TriageError::schema(format!("missing parameter {}", p.name)))
            })
            .collect()
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dim()
            && self.params.iter().zip(values).all(|(p, &v)| {
                v >= p.lower
                    && v <= p.upper
                    && (p.kind == ParamKind::Continuous || v.fract() == 0.0)
            })
    }
}

/// The seven boosting hyperparameters over their tuning intervals.
pub fn gbdt_search_space() -> ParamSpace {
    let params = TUNING_BOUNDS
        .iter()
        .map(|&(name, lo, hi)| {
            let kind = match name {
                "max_depth" | "n_estimators" => ParamKind::Integer,
                _ => ParamKind::Continuous,
            };
            let scale = match name {
                "gamma" | "lambda" | "alpha" | "n_estimators" => Scale::Log,
                _ => Scale::Linear,
            };
            ParamDescriptor::new(name, kind, lo, hi, scale)
        })
        .collect();
    ParamSpace::new(params).expect("tuning bounds are valid")
}

pub fn gbdt_params_from(named: &BTreeMap<String, f64>) -> Result<GbdtParams> {
    GbdtParams::from_named(named.iter().map(|(k, v)| (k.as_str(), *v)))
}

/// Radical-inverse Halton sequence with a Cranley-Patterson shift.
pub(crate) fn halton(index: usize, dim: usize, shift: &[f64]) -> Vec<f64> {
    const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index + 1;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            (r + shift.get(d).copied().unwrap_or(0.0)).fract()
        })
        .collect()
}
