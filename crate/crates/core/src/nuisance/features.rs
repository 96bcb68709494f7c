use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::ObservedRecord;
use crate::error::{Error, Result};

/// The inputs a fitted model may condition on: instrument, treatment and
/// the baseline covariates.
#[derive(Debug, Clone, Copy)]
pub struct Profile<'a> {
    pub instrument: bool,
    pub treatment: bool,
    pub covariates: &'a [f64],
}

impl<'a> Profile<'a> {
    pub fn of(record: &'a ObservedRecord) -> Self {
        Self {
            instrument: record.instrument,
            treatment: record.treatment,
            covariates: &record.covariates,
        }
    }

    pub fn with_instrument(self, z: bool) -> Self {
        Self { instrument: z, ..self }
    }

    pub fn with_treatment(self, a: bool) -> Self {
        Self { treatment: a, ..self }
    }
}

/// One column of a design matrix. Covariate indices are zero-based; the
/// text form uses the one-based CSV names (`x1`, `x2`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Feature {
    Instrument,
    Treatment,
    Covariate(usize),
    /// `exp(x / 2)`
    ExpHalf(usize),
    /// `(x_i * x_j / 25 + 0.6)^3`
    CubicProduct(usize, usize),
    /// `(x + 20)^2 / 50`
    ShiftedSquare(usize),
}

impl Feature {
    pub fn eval(&self, p: &Profile<'_>) -> f64 {
        let x = p.covariates;
        match *self {
            Feature::Instrument => p.instrument as u8 as f64,
            Feature::Treatment => p.treatment as u8 as f64,
            Feature::Covariate(j) => x[j],
            Feature::ExpHalf(j) => (x[j] / 2.0).exp(),
            Feature::CubicProduct(i, j) => (x[i] * x[j] / 25.0 + 0.6).powi(3),
            Feature::ShiftedSquare(j) => (x[j] + 20.0).powi(2) / 50.0,
        }
    }

    fn max_covariate(&self) -> Option<usize> {
        match *self {
            Feature::Instrument | Feature::Treatment => None,
            Feature::Covariate(j) | Feature::ExpHalf(j) | Feature::ShiftedSquare(j) => Some(j),
            Feature::CubicProduct(i, j) => Some(i.max(j)),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Feature::Instrument => write!(f, "z"),
            Feature::Treatment => write!(f, "a"),
            Feature::Covariate(j) => write!(f, "x{}", j + 1),
            Feature::ExpHalf(j) => write!(f, "exp_half(x{})", j + 1),
            Feature::CubicProduct(i, j) => write!(f, "cubic_product(x{},x{})", i + 1, j + 1),
            Feature::ShiftedSquare(j) => write!(f, "shifted_square(x{})", j + 1),
        }
    }
}

fn covariate_index(s: &str) -> Result<usize> {
    s.trim()
        .strip_prefix('x')
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| k >= 1)
        .map(|k| k - 1)
        .ok_or_else(|| Error::invalid(format!("bad covariate name `{s}`")))
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "z" => return Ok(Feature::Instrument),
            "a" => return Ok(Feature::Treatment),
            _ => {}
        }
        if let Some((name, rest)) = s.split_once('(') {
            let args = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::invalid(format!("unbalanced parenthesis in `{s}`")))?;
            let args: Vec<&str> = args.split(',').collect();
            return match (name, args.as_slice()) {
                ("exp_half", [x]) => Ok(Feature::ExpHalf(covariate_index(x)?)),
                ("shifted_square", [x]) => Ok(Feature::ShiftedSquare(covariate_index(x)?)),
                ("cubic_product", [x, y]) => Ok(Feature::CubicProduct(covariate_index(x)?, covariate_index(y)?)),
                _ => Err(Error::invalid(format!("unknown feature `{s}`"))),
            };
        }
        Ok(Feature::Covariate(covariate_index(s)?))
    }
}

impl TryFrom<String> for Feature {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Feature> for String {
    fn from(f: Feature) -> String {
        f.to_string()
    }
}

/// Ordered list of features a model is fitted on.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureMap(pub Vec<Feature>);

impl FeatureMap {
    pub fn new(features: Vec<Feature>) -> Self {
        Self(features)
    }

    /// `x1..xp`
    pub fn covariates(p: usize) -> Self {
        Self((0..p).map(Feature::Covariate).collect())
    }

    /// `z, x1..xp`
    pub fn instrument_and_covariates(p: usize) -> Self {
        let mut f = vec![Feature::Instrument];
        f.extend((0..p).map(Feature::Covariate));
        Self(f)
    }

    /// `a, x1..xp`
    pub fn treatment_and_covariates(p: usize) -> Self {
        let mut f = vec![Feature::Treatment];
        f.extend((0..p).map(Feature::Covariate));
        Self(f)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.0
    }

    pub fn contains(&self, f: Feature) -> bool {
        self.0.contains(&f)
    }

    pub fn eval_into(&self, p: &Profile<'_>, out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.0) {
            *o = f.eval(p);
        }
    }

    pub fn eval(&self, p: &Profile<'_>) -> Vec<f64> {
        self.0.iter().map(|f| f.eval(p)).collect()
    }

    /// Check that every referenced covariate exists.
    pub fn check_dimension(&self, p: usize) -> Result<()> {
        match self.0.iter().find(|f| f.max_covariate().is_some_and(|j| j >= p)) {
            Some(f) => Err(Error::invalid(format!("feature `{f}` needs more than {p} covariates"))),
            None => Ok(()),
        }
    }

    pub fn linear_predictor(&self, coefs: &[f64], p: &Profile<'_>) -> f64 {
        self.0.iter().zip(coefs).map(|(f, b)| b * f.eval(p)).sum()
    }
}

impl fmt::Display for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        for s in ["z", "a", "x1", "x12", "exp_half(x1)", "cubic_product(x1,x3)", "shifted_square(x4)"] {
            let f: Feature = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("x0".parse::<Feature>().is_err());
        assert!("foo(x1)".parse::<Feature>().is_err());
        let m: FeatureMap = serde_json::from_str(r#"["z","x2","exp_half(x1)"]"#).unwrap();
        assert_eq!(m.0, vec![Feature::Instrument, Feature::Covariate(1), Feature::ExpHalf(0)]);
    }

    #[test]
    fn transformed_covariates() {
        let x = [0.0, 5.0, 0.0, 0.0];
        let p = Profile {
            instrument: true,
            treatment: false,
            covariates: &x,
        };
        assert_eq!(Feature::ExpHalf(0).eval(&p), 1.0);
        assert!((Feature::CubicProduct(0, 2).eval(&p) - 0.216).abs() < 1e-15);
        assert_eq!(Feature::ShiftedSquare(3).eval(&p), 8.0);
        assert_eq!(Feature::Instrument.eval(&p), 1.0);
        assert!(FeatureMap::covariates(4).check_dimension(3).is_err());
    }
}
