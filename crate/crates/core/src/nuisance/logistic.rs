use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::{FeatureMap, Profile};
use super::newton::{maximize, Concave, NewtonFailure, NewtonOptions};
use crate::dataset::{Cohort, ObservedRecord};
use crate::error::{Error, Result};

/// Which binary column a logistic model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryTarget {
    /// `π(1 | z, x)`
    Treatment,
    /// `γ(1 | x)`
    Instrument,
}

impl BinaryTarget {
    pub fn of(self, r: &ObservedRecord) -> bool {
        match self {
            BinaryTarget::Treatment => r.treatment,
            BinaryTarget::Instrument => r.instrument,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticOptions {
    #[serde(flatten)]
    pub newton: NewtonOptions,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::with_tolerance(1e-10),
        }
    }
}

pub(crate) fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(eta))` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood of a design with an implicit leading intercept.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    design: Vec<Vec<f64>>,
    target: Vec<f64>,
}

impl LogisticObjective {
    /// `design` rows exclude the intercept column.
    pub fn new(design: Vec<Vec<f64>>, target: &[bool]) -> Self {
        Self {
            design,
            target: target.iter().map(|&y| y as u8 as f64).collect(),
        }
    }

    fn eta(&self, i: usize, beta: &[f64]) -> f64 {
        beta[0] + self.design[i].iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn n_params(&self) -> usize {
        1 + self.design.first().map_or(0, Vec::len)
    }

    pub fn log_likelihood(&self, beta: &[f64]) -> f64 {
        (0..self.target.len())
            .map(|i| {
                let eta = self.eta(i, beta);
                self.target[i] * eta - softplus(eta)
            })
            .sum()
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        self.full(beta).1.iter().copied().collect()
    }

    pub fn full(&self, beta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = self.n_params();
        let mut ll = 0.0;
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        let mut x = vec![1.0; k];
        for i in 0..self.target.len() {
            x[1..].copy_from_slice(&self.design[i]);
            let eta = self.eta(i, beta);
            let p = expit(eta);
            let w = p * (1.0 - p);
            let r = self.target[i] - p;
            ll += self.target[i] * eta - softplus(eta);
            for a in 0..k {
                g[a] += x[a] * r;
                for b in 0..=a {
                    h[(a, b)] += w * x[a] * x[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        (ll, g, h)
    }
}

impl Concave for LogisticObjective {
    fn value(&self, beta: &[f64]) -> f64 {
        self.log_likelihood(beta)
    }
    fn derivatives(&self, beta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        self.full(beta)
    }
}

/// Fitted logistic regression; `coefficients[0]` is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub features: FeatureMap,
    pub coefficients: Vec<f64>,
    pub target: BinaryTarget,
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn linear_predictor(&self, p: &Profile<'_>) -> f64 {
        self.coefficients[0] + self.features.linear_predictor(&self.coefficients[1..], p)
    }

    pub fn probability(&self, p: &Profile<'_>) -> f64 {
        expit(self.linear_predictor(p))
    }
}

/// Maximum likelihood by damped Newton (IRLS).
pub fn fit_logistic(cohort: &Cohort, features: &FeatureMap, target: BinaryTarget, opts: &LogisticOptions) -> Result<LogisticModel> {
    features.check_dimension(cohort.p())?;
    let y: Vec<bool> = cohort.records().iter().map(|r| target.of(r)).collect();
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::ConstantTarget { model: "logistic" });
    }
    let design: Vec<Vec<f64>> = cohort.records().iter().map(|r| features.eval(&Profile::of(r))).collect();
    let objective = LogisticObjective::new(design, &y);
    let opt = maximize(&objective, vec![0.0; objective.n_params()], &opts.newton).map_err(|f| match f {
        NewtonFailure::NonConvergence { iterations, gradient_norm } => Error::NonConvergence {
            model: "logistic",
            iterations,
            gradient_norm,
        },
        // index 0 is the intercept
        NewtonFailure::Diverging { index } => Error::Separation { index },
        NewtonFailure::Singular => Error::Separation { index: 0 },
    })?;
    Ok(LogisticModel {
        features: features.clone(),
        coefficients: opt.beta,
        target,
        log_likelihood: opt.value,
        iterations: opt.iterations,
    })
}

/// Predicted probability at the given inputs.
pub fn predict_prob(model: &LogisticModel, p: &Profile<'_>) -> f64 {
    model.probability(p)
}
