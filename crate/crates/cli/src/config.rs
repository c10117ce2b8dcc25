//! JSON scenario configuration.

use std::fmt;
use std::path::Path;

use qfrac_core::rl::AlphaVec;
use qfrac_core::{Box4, QuadratureSpec, Quaternion, StructuralSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A configuration problem, located by its JSON path.
#[derive(Debug, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: &str, message: impl fmt::Display) -> Self {
        ConfigError { path: path.to_string(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "rl_fundamental")]
    RlFundamental,
    #[serde(rename = "rl_const")]
    RlConst,
    #[serde(rename = "stokes_classical")]
    StokesClassical,
    #[serde(rename = "bp_classical")]
    BpClassical,
    #[serde(rename = "prop_items_1_4")]
    PropItems,
    #[serde(rename = "frac_stokes")]
    FracStokes,
    #[serde(rename = "frac_bp_decomposed")]
    FracBpDecomposed,
    #[serde(rename = "frac_bp_direct")]
    FracBpDirect,
    #[serde(rename = "gamma_resolution")]
    GammaResolution,
    #[serde(rename = "iterated_bp")]
    IteratedBp,
    #[serde(rename = "frac_bp_higher")]
    FracBpHigher,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::RlFundamental,
        Scenario::RlConst,
        Scenario::StokesClassical,
        Scenario::BpClassical,
        Scenario::PropItems,
        Scenario::FracStokes,
        Scenario::FracBpDecomposed,
        Scenario::FracBpDirect,
        Scenario::GammaResolution,
        Scenario::IteratedBp,
        Scenario::FracBpHigher,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scenario::RlFundamental => "rl_fundamental",
            Scenario::RlConst => "rl_const",
            Scenario::StokesClassical => "stokes_classical",
            Scenario::BpClassical => "bp_classical",
            Scenario::PropItems => "prop_items_1_4",
            Scenario::FracStokes => "frac_stokes",
            Scenario::FracBpDecomposed => "frac_bp_decomposed",
            Scenario::FracBpDirect => "frac_bp_direct",
            Scenario::GammaResolution => "gamma_resolution",
            Scenario::IteratedBp => "iterated_bp",
            Scenario::FracBpHigher => "frac_bp_higher",
        }
    }

    fn needs_first_order(self) -> bool {
        !matches!(self, Scenario::StokesClassical | Scenario::BpClassical | Scenario::IteratedBp)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Box corners as written in the config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub a: [f64; 4],
    pub b: [f64; 4],
}

impl Default for BoxSpec {
    fn default() -> Self {
        BoxSpec { a: [0.0; 4], b: [1.0; 4] }
    }
}

impl From<Box4> for BoxSpec {
    fn from(b: Box4) -> Self {
        BoxSpec { a: b.a, b: b.b }
    }
}

/// `"std"` for `{1, i, j, k}` or 16 reals, four per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PsiSpec {
    Name(String),
    Reals(Vec<f64>),
}

impl Default for PsiSpec {
    fn default() -> Self {
        PsiSpec::Name("std".into())
    }
}

impl PsiSpec {
    pub fn resolve(&self) -> Result<StructuralSet, ConfigError> {
        match self {
            PsiSpec::Name(n) if n == "std" => Ok(StructuralSet::standard()),
            PsiSpec::Name(n) => Err(ConfigError::at("psi", format!("unknown structural set {n:?}, expected \"std\" or 16 reals"))),
            PsiSpec::Reals(v) if v.len() == 16 => {
                let q: [Quaternion; 4] = std::array::from_fn(|k| Quaternion([v[4 * k], v[4 * k + 1], v[4 * k + 2], v[4 * k + 3]]));
                StructuralSet::new(q).map_err(|e| ConfigError::at("psi", e))
            }
            PsiSpec::Reals(v) => Err(ConfigError::at("psi", format!("expected 16 reals, got {}", v.len()))),
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_samples() -> usize {
    20
}

/// The JSON document accepted by `qfrac run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(rename = "box", default)]
    pub domain: BoxSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaVec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<AlphaVec>,
    #[serde(default)]
    pub psi: PsiSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Use only the first `max_fields` corpus members.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_fields: Option<usize>,
    /// Nested boxes for the higher-order scenarios, outermost first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nested: Option<Vec<BoxSpec>>,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioConfig {
            scenario,
            domain: BoxSpec::default(),
            alpha: None,
            beta: None,
            psi: PsiSpec::default(),
            quadrature: QuadratureSpec::default(),
            seed: default_seed(),
            samples: default_samples(),
            max_fields: None,
            nested: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError { path: if path == "." { "<root>".into() } else { path }, message: e.into_inner().to_string() }
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks every field and fills in scenario defaults.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let domain = Box4::new(self.domain.a, self.domain.b).map_err(|e| ConfigError::at("box", e))?;
        let alpha = match self.alpha {
            Some(a) => a,
            None => AlphaVec::real([0.3, 0.5, 0.7, 0.5]).expect("valid default"),
        };
        let beta = match self.beta {
            Some(b) => b,
            // item 4 needs α_j + β_j < 1
            None if self.scenario == Scenario::PropItems => AlphaVec::real([0.5, 0.3, 0.2, 0.4]).expect("valid default"),
            None => AlphaVec::real([0.5, 0.3, 0.5, 0.7]).expect("valid default"),
        };
        if self.scenario.needs_first_order() {
            for (name, v) in [("alpha", &alpha), ("beta", &beta)] {
                if v.n() != 1 {
                    return Err(ConfigError::at(name, "scenario needs 0 < Re α < 1 on every axis"));
                }
            }
        }
        let psi = self.psi.resolve()?;
        self.quadrature.validate().map_err(|e| ConfigError::at("quadrature", e))?;
        if self.samples == 0 {
            return Err(ConfigError::at("samples", "must be positive"));
        }
        if self.max_fields == Some(0) {
            return Err(ConfigError::at("max_fields", "must be positive"));
        }
        let nested = match &self.nested {
            Some(v) => v
                .iter()
                .enumerate()
                .map(|(i, b)| Box4::new(b.a, b.b).map_err(|e| ConfigError::at(&format!("nested[{i}]"), e)))
                .collect::<Result<Vec<_>, _>>()?,
            None => default_nested(self.scenario, &domain),
        };
        Ok(Resolved { scenario: self.scenario, domain, alpha, beta, psi, spec: self.quadrature, seed: self.seed, samples: self.samples, max_fields: self.max_fields, nested })
    }
}

/// `domain` shrunk by `fraction` of its side on every face.
pub fn shrink(domain: &Box4, fraction: f64) -> Box4 {
    let a = std::array::from_fn(|k| domain.a[k] + fraction * domain.len(k));
    let b = std::array::from_fn(|k| domain.b[k] - fraction * domain.len(k));
    Box4::new(a, b).expect("fraction below one half")
}

fn default_nested(scenario: Scenario, domain: &Box4) -> Vec<Box4> {
    match scenario {
        Scenario::FracBpHigher => vec![shrink(domain, 0.1), shrink(domain, 0.25)],
        _ => vec![*domain, shrink(domain, 0.15)],
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub domain: Box4,
    pub alpha: AlphaVec,
    pub beta: AlphaVec,
    pub psi: StructuralSet,
    pub spec: QuadratureSpec,
    pub seed: u64,
    pub samples: usize,
    pub max_fields: Option<usize>,
    pub nested: Vec<Box4>,
}

impl Resolved {
    /// The point `a + t ⊙ (b − a)` of the domain.
    pub fn rel(&self, t: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|k| self.domain.a[k] + t[k] * self.domain.len(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ScenarioConfig::from_json(r#"{"scenario": "rl_const"}"#).unwrap();
        assert_eq!(c, ScenarioConfig::new(Scenario::RlConst));
        let r = c.resolve().unwrap();
        assert_eq!(r.domain, Box4::unit());
        assert_eq!(r.nested.len(), 2);
    }

    #[test]
    fn errors_carry_paths() {
        let e = ScenarioConfig::from_json(r#"{"scenario": "nope"}"#).unwrap_err();
        assert_eq!(e.path, "scenario");
        let e = ScenarioConfig::from_json(r#"{"scenario": "rl_const", "quadrature": {"order": "x"}}"#).unwrap_err();
        assert_eq!(e.path, "quadrature.order");
        let e = ScenarioConfig::from_json(r#"{"scenario": "rl_const", "alpha": [0.5, 0.5, 1.5, 0.5]}"#).unwrap_err();
        assert_eq!(e.path, "alpha");
        let e = ScenarioConfig::from_json(r#"{"scenario": "rl_const", "colour": 1}"#).unwrap_err();
        assert_eq!(e.path, "colour");
        let bad_box = ScenarioConfig::from_json(r#"{"scenario": "rl_const", "box": {"a": [0,0,0,0], "b": [1,1,0,1]}}"#).unwrap();
        assert_eq!(bad_box.resolve().unwrap_err().path, "box");
        let bad_psi = ScenarioConfig::from_json(r#"{"scenario": "rl_const", "psi": [1,0,0,0]}"#).unwrap();
        assert_eq!(bad_psi.resolve().unwrap_err().path, "psi");
        let first = ScenarioConfig::from_json(r#"{"scenario": "frac_stokes", "alpha": [1.5, 1.5, 1.5, 1.5]}"#).unwrap();
        assert_eq!(first.resolve().unwrap_err().path, "alpha");
    }

    #[test]
    fn psi_from_reals() {
        let std_reals: Vec<f64> = vec![1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.];
        assert_eq!(PsiSpec::Reals(std_reals).resolve().unwrap(), StructuralSet::standard());
        let skew: Vec<f64> = vec![0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1.];
        assert!(PsiSpec::Reals(skew).resolve().is_ok());
    }

    #[test]
    fn every_scenario_id_round_trips() {
        for s in Scenario::ALL {
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.id()));
            assert_eq!(serde_json::from_str::<Scenario>(&json).unwrap(), s);
        }
    }
}
