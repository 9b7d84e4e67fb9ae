//! TOML experiment configuration.

use std::collections::BTreeMap;

use poisson_ou::{EngineMode, Gate, TalagrandForm};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub mode: ModeSpec,
    /// Outer samples in Monte Carlo mode.
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Mehler draws per `P_t F(c)` estimate in Monte Carlo mode.
    #[serde(default = "default_inner_replications")]
    pub inner_replications: usize,
    pub space: SpaceSpec,
    #[serde(default)]
    pub truncation: TruncationSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Named DSL functionals.
    #[serde(default)]
    pub functionals: BTreeMap<String, String>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

fn default_seed() -> u64 {
    0x5eed
}

fn default_replications() -> usize {
    100_000
}

fn default_inner_replications() -> usize {
    256
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    #[default]
    Exact,
    Mc,
}

impl From<ModeSpec> for EngineMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Exact => EngineMode::Exact,
            ModeSpec::Mc => EngineMode::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub weights: Vec<f64>,
}

/// Either a target tail mass or explicit caps. Caps win when both are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<Vec<u32>>,
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn default_budget() -> u64 {
    poisson_ou::ground::DEFAULT_STATE_BUDGET
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self {
            tail_mass: None,
            caps: None,
            budget: default_budget(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_report")]
    pub report: String,
}

fn default_dir() -> String {
    "out".into()
}

fn default_report() -> String {
    "report.txt".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            report: default_report(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormSpec {
    Printed,
    OneAtom,
}

impl From<FormSpec> for TalagrandForm {
    fn from(f: FormSpec) -> Self {
        match f {
            FormSpec::Printed => TalagrandForm::Printed,
            FormSpec::OneAtom => TalagrandForm::OneAtom,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateSpec {
    Enforce,
    Bypass,
}

impl From<GateSpec> for Gate {
    fn from(g: GateSpec) -> Self {
        match g {
            GateSpec::Enforce => Gate::Enforce,
            GateSpec::Bypass => Gate::Bypass,
        }
    }
}

/// One entry of the check list. Grids expand to their Cartesian product over
/// the parameters the check uses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<FormSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    /// Constant tested by `lsi_failure`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma: Vec<f64>,
    /// Atom weights for examples that build their own one-atom space.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k: Vec<u32>,
    /// Maxima outside mass.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m: Vec<f64>,
    /// Level `M` of the increments `g = 1{j <= M}`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub level: Vec<u32>,
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self, CliError> {
        toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(src, s.start));
            CliError::Config {
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Serialize(e.to_string()))
    }
}

/// One-based line and column of a byte offset.
pub fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_toml("[space]\nweights = [1.0]\n").unwrap();
        assert_eq!(c.seed, 0x5eed);
        assert_eq!(c.mode, ModeSpec::Exact);
        assert_eq!(c.truncation.budget, 1_000_000);
        assert!(c.checks.is_empty());
    }

    #[test]
    fn unknown_key_reports_position() {
        let err = ExperimentConfig::from_toml("[space]\nweights = [1.0]\nbogus = 3\n").unwrap_err();
        match err {
            CliError::Config { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
