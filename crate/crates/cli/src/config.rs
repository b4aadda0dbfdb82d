//! Experiment configuration: one JSON document per run.

use std::path::PathBuf;

use clap::ValueEnum;
use dbm_edge::coupling::CouplingMode;
use dbm_edge::cutoff::Closure;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Read(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("missing parameter `{0}` for {1}")]
    Missing(&'static str, Kind),
    #[error("invalid parameter `{0}`: {1}")]
    Invalid(&'static str, String),
    #[error("config is for {found}, but {requested} was requested")]
    KindMismatch { found: Kind, requested: Kind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SampleGbe,
    RunDbm,
    RunWindow,
    RunCoupled,
    AnalyzeGapTail,
    AnalyzeBrownian,
    AnalyzeHolder,
    AnalyzeResidual,
    AnalyzeRigidity,
    AnalyzeEdgeLaw,
    SaoSample,
    CompareLab,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

/// Seeds `start, start + 1, …, start + count − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

impl Default for SeedRange {
    fn default() -> Self {
        Self { start: 0, count: 1 }
    }
}

impl SeedRange {
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.count).map(move |j| self.start + j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Two-sample KS bound for stationarity.
    pub ks_max: f64,
    /// Allowed distance of the gap-tail slope from 1 + β.
    pub gap_tail: f64,
    /// Smallest acceptable Hölder exponent; the upper reference is 1 − 1/(1 + β).
    pub holder_floor: f64,
    pub rigidity_fail_rate: f64,
    pub stieltjes_bound: f64,
    pub stieltjes_pass_rate: f64,
    pub contraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ks_max: 0.05,
            gap_tail: 0.3,
            holder_floor: 0.6,
            rigidity_fail_rate: 0.01,
            stieltjes_bound: 50.0,
            stieltjes_pass_rate: 0.95,
            contraction: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaoGrid {
    pub length: f64,
    pub h: f64,
}

/// Every parameter any experiment reads. Each experiment picks its own subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Kind>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub k: Option<usize>,
    pub k_list: Option<Vec<usize>>,
    pub duration: Option<f64>,
    pub t_burn: Option<f64>,
    pub dt_base: Option<f64>,
    /// Regularization ε; defaults to 10⁻⁸ N^{-1/3}.
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub seeds: SeedRange,
    pub decimation: Option<u64>,
    pub keep: Option<usize>,
    pub index: Option<usize>,
    pub i_max: Option<usize>,
    pub delta_c: Option<f64>,
    pub omega: Option<f64>,
    pub closure: Option<Closure>,
    pub confinement_term: Option<bool>,
    pub mode: Option<CouplingMode>,
    pub xi: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub steps_per_eps: Option<u64>,
    /// Size of the GβE samples that seed the energy-decay start vector.
    pub n_sample: Option<usize>,
    pub eps_ell: Option<f64>,
    pub sao: Option<SaoGrid>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_beta() -> f64 {
    2.0
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks that `kind` finds everything it needs, before any compute.
    pub fn validate(&self, kind: Kind) -> Result<(), ConfigError> {
        if let Some(found) = self.experiment {
            if found != kind {
                return Err(ConfigError::KindMismatch { found, requested: kind });
            }
        }
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            return Err(ConfigError::Invalid("beta", format!("need a finite beta >= 1, got {}", self.beta)));
        }
        if self.seeds.count == 0 {
            return Err(ConfigError::Invalid("seeds", "count must be positive".into()));
        }
        positive("dt_base", self.dt_base)?;
        positive("duration", self.duration)?;
        positive("horizon", self.horizon)?;
        nonnegative("t_burn", self.t_burn)?;
        nonnegative("epsilon", self.epsilon)?;
        if self.decimation == Some(0) {
            return Err(ConfigError::Invalid("decimation", "must be at least 1".into()));
        }
        if self.steps_per_eps == Some(0) {
            return Err(ConfigError::Invalid("steps_per_eps", "must be at least 1".into()));
        }
        if let Some(d) = self.delta_c {
            if !(d > 0.0 && d < 1.0) {
                return Err(ConfigError::Invalid("delta_c", "must lie in (0, 1)".into()));
            }
        }
        if let Some(o) = self.omega {
            if !(o > 0.0 && o <= 1.0) {
                return Err(ConfigError::Invalid("omega", "must lie in (0, 1]".into()));
            }
        }
        if let Some(e) = self.eps_ell {
            if !(e > 0.0 && e < 1.0 / 6.0) {
                return Err(ConfigError::Invalid("eps_ell", "must lie in (0, 1/6)".into()));
            }
        }

        let n = self.n.ok_or(ConfigError::Missing("n", kind));
        match kind {
            Kind::SampleGbe => {
                let n = n?;
                self.check_keep(n)?;
            }
            Kind::RunDbm => {
                let n = n?;
                self.need("duration", self.duration.is_some(), kind)?;
                self.need("dt_base", self.dt_base.is_some(), kind)?;
                self.check_keep(n)?;
            }
            Kind::RunWindow => {
                let n = n?;
                self.need("duration", self.duration.is_some(), kind)?;
                self.need("dt_base", self.dt_base.is_some(), kind)?;
                if let Some(k) = self.k {
                    if k < 1 || k > n {
                        return Err(ConfigError::Invalid("k", format!("need 1 <= k <= n, got {k}")));
                    }
                }
                self.check_keep(self.k.unwrap_or(n))?;
            }
            Kind::RunCoupled => {
                let list = self.n_list.as_ref().ok_or(ConfigError::Missing("n_list", kind))?;
                if list.len() < 2 {
                    return Err(ConfigError::Invalid("n_list", "need at least two sizes".into()));
                }
                let i_max = self.i_max.unwrap_or(4);
                if list.iter().any(|&m| m < i_max.max(self.keep.unwrap_or(4))) {
                    return Err(ConfigError::Invalid("n_list", "every size must cover the probed particles".into()));
                }
                if i_max > self.keep.unwrap_or(4) {
                    return Err(ConfigError::Invalid("i_max", "cannot exceed keep".into()));
                }
            }
            Kind::AnalyzeGapTail => {
                let n = n?;
                let i = self.index.unwrap_or(1);
                if i < 1 || i >= n {
                    return Err(ConfigError::Invalid("index", format!("need 1 <= index < n, got {i}")));
                }
            }
            Kind::AnalyzeBrownian => {
                let n = n?;
                self.check_index(n)?;
                let eps = self.eps_list.as_ref().ok_or(ConfigError::Missing("eps_list", kind))?;
                if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) {
                    return Err(ConfigError::Invalid("eps_list", "need positive scales".into()));
                }
            }
            Kind::AnalyzeHolder => {
                let n = n?;
                self.check_index(n)?;
                self.need("duration", self.duration.is_some(), kind)?;
                self.need("dt_base", self.dt_base.is_some(), kind)?;
                let steps = self.duration.unwrap() / self.dt_base.unwrap();
                let r = steps.round();
                if (steps - r).abs() > 1e-6 || !(r as u64).is_power_of_two() {
                    return Err(ConfigError::Invalid("dt_base", "duration / dt_base must be a power of two".into()));
                }
            }
            Kind::AnalyzeResidual => {
                let n = n?;
                self.need("duration", self.duration.is_some(), kind)?;
                self.need("dt_base", self.dt_base.is_some(), kind)?;
                let ks = self.k_list.as_ref().ok_or(ConfigError::Missing("k_list", kind))?;
                let i = self.index.unwrap_or(1);
                if ks.is_empty() || ks.iter().any(|&k| k < i || k > n) {
                    return Err(ConfigError::Invalid("k_list", "need index <= K <= n for every K".into()));
                }
            }
            Kind::AnalyzeRigidity => {
                n?;
                positive("xi", self.xi)?;
            }
            Kind::AnalyzeEdgeLaw => {
                let list = self.n_list.as_ref().ok_or(ConfigError::Missing("n_list", kind))?;
                if list.is_empty() || list.contains(&0) {
                    return Err(ConfigError::Invalid("n_list", "need positive sizes".into()));
                }
                if self.seeds.count < 500 {
                    return Err(ConfigError::Invalid("seeds", "need at least 500 samples per source".into()));
                }
            }
            Kind::SaoSample => {
                if let Some(g) = self.sao {
                    dbm_edge::airy::SaoConfig { length: g.length, h: g.h, beta: self.beta }
                        .validate()
                        .map_err(|e| ConfigError::Invalid("sao", e.to_string()))?;
                }
            }
            Kind::CompareLab => {
                n?;
                let ks = self.k_list.as_ref().ok_or(ConfigError::Missing("k_list", kind))?;
                if ks.is_empty() || ks.iter().any(|&k| k < 2) {
                    return Err(ConfigError::Invalid("k_list", "need window sizes >= 2".into()));
                }
            }
        }
        Ok(())
    }

    fn need(&self, name: &'static str, present: bool, kind: Kind) -> Result<(), ConfigError> {
        if present {
            Ok(())
        } else {
            Err(ConfigError::Missing(name, kind))
        }
    }

    fn check_keep(&self, n: usize) -> Result<(), ConfigError> {
        match self.keep {
            Some(k) if k < 1 || k > n => Err(ConfigError::Invalid("keep", format!("need 1 <= keep <= {n}"))),
            _ => Ok(()),
        }
    }

    fn check_index(&self, n: usize) -> Result<(), ConfigError> {
        let i = self.index.unwrap_or(1);
        if i < 1 || i > n {
            return Err(ConfigError::Invalid("index", format!("need 1 <= index <= {n}")));
        }
        Ok(())
    }

    pub fn keep_for(&self, n: usize) -> usize {
        self.keep.unwrap_or(n.min(8))
    }
}

fn positive(name: &'static str, v: Option<f64>) -> Result<(), ConfigError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(ConfigError::Invalid(name, format!("must be positive, got {x}"))),
        _ => Ok(()),
    }
}

fn nonnegative(name: &'static str, v: Option<f64>) -> Result<(), ConfigError> {
    match v {
        Some(x) if !(x >= 0.0 && x.is_finite()) => Err(ConfigError::Invalid(name, format!("must be nonnegative, got {x}"))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"n": 4, "bogus": 1}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        let err = ExperimentConfig::from_json(r#"{"n": 4, "tolerances": {"ks": 1}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn requirements_per_kind() {
        let cfg = ExperimentConfig::from_json(r#"{"n": 4}"#).unwrap();
        assert!(cfg.validate(Kind::SampleGbe).is_ok());
        assert!(matches!(cfg.validate(Kind::RunDbm), Err(ConfigError::Missing("duration", _))));
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "run-dbm", "n": 4}"#).unwrap();
        assert!(matches!(cfg.validate(Kind::SampleGbe), Err(ConfigError::KindMismatch { .. })));
        let cfg = ExperimentConfig::from_json(r#"{"n": 4, "beta": 0.5}"#).unwrap();
        assert!(cfg.validate(Kind::SampleGbe).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"n": 64, "duration": 1, "dt_base": 0.003, "index": 1}"#).unwrap();
        assert!(cfg.validate(Kind::AnalyzeHolder).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        assert_eq!(Kind::AnalyzeGapTail.to_string(), "analyze-gap-tail");
        let k: Kind = serde_json::from_str("\"compare-lab\"").unwrap();
        assert_eq!(k, Kind::CompareLab);
    }
}
