use std::fs;
use std::path::Path;

use igabem::adaptivity::{AdaptiveConfig, EstimatorKind, RefinementStrategy};
use igabem::assembly::Ansatz;
use igabem::geometry::{builtin_problem_scaled, ModelProblem, PROBLEM_NAMES};
use igabem::quadrature::QuadConfig;
use serde::{Deserialize, Serialize};

/// Run configuration as read from JSON.
///
/// `geometry` is optional and, when present, must name the geometry of the
/// built-in `problem`. `scale` only affects the slit problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<String>,
    pub scale: f64,
    pub p: usize,
    pub theta: f64,
    pub estimator: EstimatorKind,
    pub strategy: RefinementStrategy,
    pub ansatz: Ansatz,
    #[serde(rename = "N_max")]
    pub n_max: usize,
    pub eta_tol: f64,
    pub quad: QuadConfig,
    /// Number of trailing levels for the slope fit; default window if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_window: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let a = AdaptiveConfig::default();
        Self {
            problem: String::new(),
            geometry: None,
            scale: 1.0,
            p: a.p,
            theta: a.theta,
            estimator: a.estimator,
            strategy: a.strategy,
            ansatz: a.ansatz,
            n_max: a.n_max,
            eta_tol: a.eta_tol,
            quad: a.quad,
            slope_window: None,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed config: {e}"))
    }

    /// Checks everything that can be checked before a run and returns the
    /// problem together with the adaptive parameters.
    pub fn resolve(&self, with_error_proxy: bool, keep_indicators: bool) -> Result<(ModelProblem, AdaptiveConfig), String> {
        if self.problem.is_empty() {
            return Err(format!("missing field 'problem' (one of {})", PROBLEM_NAMES.join(", ")));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(format!("scale = {} must be positive", self.scale));
        }
        let problem = builtin_problem_scaled(&self.problem, self.scale).map_err(|e| e.to_string())?;
        if let Some(g) = &self.geometry {
            let expected = problem.name.split('-').next().unwrap_or_default();
            if g != expected {
                return Err(format!("problem '{}' lives on '{expected}', not on '{g}'", self.problem));
            }
        }
        if self.slope_window == Some(1) || self.slope_window == Some(0) {
            return Err("slope_window needs at least 2 levels".into());
        }
        let cfg = AdaptiveConfig {
            p: self.p,
            theta: self.theta,
            estimator: self.estimator,
            strategy: self.strategy,
            ansatz: self.ansatz,
            n_max: self.n_max,
            eta_tol: self.eta_tol,
            quad: self.quad,
            with_error_proxy,
            keep_indicators,
        };
        problem.validate().map_err(|e| e.to_string())?;
        cfg.validate(problem.kind).map_err(|e| e.to_string())?;
        Ok((problem, cfg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::from_json(r#"{"problem": "slit"}"#).unwrap();
        assert_eq!(c.n_max, 2048);
        assert_eq!(c.estimator, EstimatorKind::Residual);
        assert!(c.resolve(false, false).is_ok());
    }

    #[test]
    fn short_estimator_names() {
        let c = RunConfig::from_json(r#"{"problem": "slit", "estimator": "fae", "N_max": 64}"#).unwrap();
        assert_eq!(c.estimator, EstimatorKind::Faermann);
        assert_eq!(c.n_max, 64);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_json(r#"{"problem": "slit", "thetta": 0.5}"#).is_err());
        assert!(RunConfig::from_json("{").is_err());
        let bad = [
            r#"{}"#,
            r#"{"problem": "square"}"#,
            r#"{"problem": "slit", "theta": 0.0}"#,
            r#"{"problem": "slit", "geometry": "heart"}"#,
            r#"{"problem": "heart", "p": 0}"#,
            r#"{"problem": "heart", "p": 1, "estimator": "faermann"}"#,
            r#"{"problem": "slit", "quad": {"regular_order": 0}}"#,
        ];
        for b in bad {
            let c = RunConfig::from_json(b).unwrap();
            assert!(c.resolve(false, false).is_err(), "{b}");
        }
    }

    #[test]
    fn geometry_of_hyp_variant() {
        let c = RunConfig::from_json(r#"{"problem": "circle-hyp", "geometry": "circle", "p": 1}"#).unwrap();
        assert!(c.resolve(false, false).is_ok());
    }

    #[test]
    fn round_trip() {
        let c = RunConfig {
            problem: "pacman".into(),
            slope_window: Some(5),
            ..Default::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"N_max\""));
        assert_eq!(RunConfig::from_json(&s).unwrap(), c);
    }
}
