//! TOML scenario configuration.
//!
//! Every section is optional at the schema level; [`ScenarioConfig::require`]
//! helpers enforce what each mode needs and name the missing field.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use conveyor_core::dispersion::Polynomial;
use num_complex::Complex;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Belt,
    Range,
    Differential,
    Fringe,
    Dip,
    Estimate,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Belt => "belt",
            RunMode::Range => "range",
            RunMode::Differential => "differential",
            RunMode::Fringe => "fringe",
            RunMode::Dip => "dip",
            RunMode::Estimate => "estimate",
        })
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "belt" => Ok(RunMode::Belt),
            "range" => Ok(RunMode::Range),
            "differential" => Ok(RunMode::Differential),
            "fringe" => Ok(RunMode::Fringe),
            "dip" => Ok(RunMode::Dip),
            "estimate" => Ok(RunMode::Estimate),
            other => Err(format!(
                "unknown mode `{other}` (expected belt, range, differential, fringe, dip or estimate)"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Option<RunMode>,
    pub clocks: Option<ClocksSection>,
    pub belt: Option<BeltSection>,
    pub drive: Option<DriveSection>,
    pub spectrum: Option<SpectrumSection>,
    pub dispersion: Option<DispersionSection>,
    pub biphoton: Option<BiphotonSection>,
    pub scan: Option<ScanSection>,
    pub estimate: Option<EstimateSection>,
    pub grid: Option<GridSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClocksSection {
    pub t0_a: Option<f64>,
    pub t0_b: Option<f64>,
    pub rate_b: Option<f64>,
    pub drift_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeltSection {
    pub s: Option<f64>,
    #[serde(rename = "T")]
    pub transit: Option<f64>,
    #[serde(rename = "T_prime")]
    pub return_transit: Option<f64>,
    pub belt_speed: Option<f64>,
    /// External time at which the simulated level is read (default: one
    /// transit after the transient ends).
    pub t_eval: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub v: Option<f64>,
    pub c: Option<f64>,
    #[serde(rename = "L")]
    pub distance: Option<f64>,
    #[serde(default)]
    pub relativistic: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub omega0: Option<f64>,
    pub delta_omega: Option<f64>,
    pub total_photons: Option<f64>,
    #[serde(default)]
    pub shape: Shape,
    pub omega: Option<Vec<f64>>,
    pub power: Option<Vec<f64>>,
    pub phase: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    #[default]
    Gaussian,
    Tabulated,
}

/// A dispersion coefficient: real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Real(f64),
    Complex([f64; 2]),
}

impl Coefficient {
    fn to_complex(self) -> Complex<f64> {
        match self {
            Coefficient::Real(re) => Complex::new(re, 0.0),
            Coefficient::Complex([re, im]) => Complex::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    pub center: Option<f64>,
    #[serde(default)]
    pub diag_to: Vec<Coefficient>,
    #[serde(default)]
    pub diag_from: Vec<Coefficient>,
    #[serde(default)]
    pub anti_to: Vec<Coefficient>,
    #[serde(default)]
    pub anti_from: Vec<Coefficient>,
}

pub fn polynomial(coeffs: &[Coefficient]) -> Polynomial<f64> {
    Polynomial::new(coeffs.iter().map(|c| c.to_complex()).collect())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiphotonSection {
    pub omega0: Option<f64>,
    pub sigma_q: Option<f64>,
    #[serde(rename = "T_c")]
    pub coincidence_window: Option<f64>,
    pub detuning: Option<Vec<f64>>,
    pub density: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub offset_min: Option<f64>,
    pub offset_max: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub kind: Option<String>,
    pub shift_min: Option<f64>,
    pub shift_max: Option<f64>,
    pub shift_points: Option<usize>,
    pub pulses_per_shift: Option<u64>,
    pub repetitions: Option<u32>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub use_complementary: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: Option<usize>,
    pub half_span: Option<f64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }
}

/// Unwraps a required section or field, naming it in the error.
pub fn need<T: Clone>(value: &Option<T>, name: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Config(format!("missing required field `{name}`")))
}
