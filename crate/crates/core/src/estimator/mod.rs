//! Instrumental-variable estimators of `F¹(t) − F⁰(t)`: the averaged
//! conditional Wald plug-in, the efficient-influence-function one-step
//! correction, and the (confounding-naive) G-formula comparator.

mod eif;
mod gformula;
mod output;
mod variance;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use eif::{eif_da, eif_dr, eif_table, estimate_onestep, estimate_plugin, EifRow, EifTable, SubjectTerms};
pub use gformula::{estimate_gformula, gformula_from_model};
pub use output::{read_results_csv, write_results_csv};
pub use variance::{variance_ci, WaldInterval};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Plugin,
    Onestep,
    Gformula,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gformula, Method::Plugin, Method::Onestep];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Plugin => "plugin",
            Method::Onestep => "onestep",
            Method::Gformula => "gformula",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "plugin" => Ok(Method::Plugin),
            "onestep" => Ok(Method::Onestep),
            "gformula" => Ok(Method::Gformula),
            other => Err(Error::invalid(format!("unknown method `{other}` (expected plugin, onestep or gformula)"))),
        }
    }
}

/// What to do when `|π̂(1|1,x) − π̂(1|0,x)|` falls below the floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakInstrumentPolicy {
    /// Fail, naming the subject.
    #[default]
    Error,
    /// Push the denominator out to `±floor` and count the subject.
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorOptions {
    pub alpha: f64,
    /// Minimum `|Ψ_X^A|`.
    pub denominator_floor: f64,
    /// Probabilities entering denominators are kept in `[clip, 1 − clip]`.
    pub clip: f64,
    pub weak_instrument: WeakInstrumentPolicy,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            denominator_floor: 1e-3,
            clip: 1e-4,
            weak_instrument: WeakInstrumentPolicy::Error,
        }
    }
}

impl EstimatorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must be in (0,1)"));
        }
        if !(self.denominator_floor > 0.0) || !(self.clip > 0.0 && self.clip < 0.5) {
            return Err(Error::invalid("denominator floor must be positive and clip in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Point estimate and (when available) Wald interval at one horizon.
///
/// Plug-in and G-formula results carry no standard error; their intervals
/// come from the spread of estimates across simulated datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    pub horizon: f64,
    pub method: Method,
    pub estimate: f64,
    pub std_err: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n: usize,
    /// Fraction of subjects with at least one clipped probability.
    pub clipped_fraction: f64,
    /// Fraction of subjects whose Wald denominator was truncated.
    pub weak_fraction: f64,
}

impl AteResult {
    pub(crate) fn point(horizon: f64, method: Method, estimate: f64, n: usize) -> Self {
        Self {
            horizon,
            method,
            estimate,
            std_err: None,
            ci_low: None,
            ci_high: None,
            n,
            clipped_fraction: 0.0,
            weak_fraction: 0.0,
        }
    }
}

/// `(ψ_R1 − ψ_R0) / (ψ_A1 − ψ_A0)`; errors when the denominator is
/// smaller than `floor` in absolute value.
pub fn conditional_wald(psi_r1: f64, psi_r0: f64, psi_a1: f64, psi_a0: f64, floor: f64) -> Result<f64> {
    let den = psi_a1 - psi_a0;
    if den.abs() < floor || !den.is_finite() {
        return Err(Error::WeakInstrument {
            subject: 0,
            denominator: den,
            floor,
            covariates: Vec::new(),
        });
    }
    Ok((psi_r1 - psi_r0) / den)
}

pub(crate) fn check_horizons(horizons: &[f64]) -> Result<()> {
    if horizons.is_empty() {
        return Err(Error::invalid("no horizons requested"));
    }
    if let Some(t) = horizons.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::invalid(format!("horizon {t} must be a finite nonnegative time")));
    }
    Ok(())
}
