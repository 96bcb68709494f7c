//! Cox proportional hazards with Breslow ties and the Breslow baseline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::features::{FeatureMap, Profile};
use super::newton::{maximize, Concave, NewtonFailure, NewtonOptions};
use super::step::StepFunction;
use crate::dataset::Cohort;
use crate::error::{Error, Result};

/// Which event a survival model treats as the failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Failure,
    /// Censoring is the event; used for the censoring survival `G`.
    Censoring,
}

impl EventKind {
    fn name(self) -> &'static str {
        match self {
            EventKind::Failure => "failure",
            EventKind::Censoring => "censoring",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoxOptions {
    #[serde(flatten)]
    pub newton: NewtonOptions,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::with_tolerance(1e-8),
        }
    }
}

/// Log partial likelihood (Breslow ties) of a design with its gradient and
/// information matrix.
#[derive(Debug, Clone)]
pub struct CoxObjective {
    /// Row-major `n x k` design, rows sorted by descending time.
    design: Vec<f64>,
    k: usize,
    /// Start index of each tie group in the sorted order, plus `n`.
    groups: Vec<usize>,
    events: Vec<bool>,
    times: Vec<f64>,
}

impl CoxObjective {
    pub fn new(design: &[Vec<f64>], times: &[f64], events: &[bool]) -> Self {
        let n = times.len();
        let k = design.first().map_or(0, Vec::len);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
        let mut flat = Vec::with_capacity(n * k);
        for &i in &order {
            flat.extend_from_slice(&design[i]);
        }
        let sorted_times: Vec<f64> = order.iter().map(|&i| times[i]).collect();
        let mut groups = vec![0];
        for i in 1..n {
            if sorted_times[i] != sorted_times[i - 1] {
                groups.push(i);
            }
        }
        groups.push(n);
        Self {
            design: flat,
            k,
            groups,
            events: order.iter().map(|&i| events[i]).collect(),
            times: sorted_times,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.k..(i + 1) * self.k]
    }

    fn linear_predictors(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.times.len())
            .map(|i| self.row(i).iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect()
    }

    /// Walk tie groups from the longest time down, growing the risk set.
    /// `on_group(group_time, events_in_group, s0, s1, s2, event_lp_sum, event_x_sum)`
    fn sweep(&self, beta: &[f64], second_order: bool, mut on_group: impl FnMut(f64, usize, f64, &[f64], &[f64], f64, &[f64])) -> f64 {
        let k = self.k;
        let lp = self.linear_predictors(beta);
        let shift = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; k];
        let mut s2 = vec![0.0; if second_order { k * k } else { 0 }];
        let mut xsum = vec![0.0; k];
        for g in self.groups.windows(2) {
            let (lo, hi) = (g[0], g[1]);
            let mut d = 0;
            let mut lpsum = 0.0;
            xsum.iter_mut().for_each(|v| *v = 0.0);
            for (i, &eta) in lp.iter().enumerate().take(hi).skip(lo) {
                let w = (eta - shift).exp();
                let x = self.row(i);
                s0 += w;
                for a in 0..k {
                    s1[a] += w * x[a];
                    if second_order {
                        for b in 0..k {
                            s2[a * k + b] += w * x[a] * x[b];
                        }
                    }
                }
                if self.events[i] {
                    d += 1;
                    lpsum += eta;
                    for a in 0..k {
                        xsum[a] += x[a];
                    }
                }
            }
            if d > 0 {
                on_group(self.times[lo], d, s0, &s1, &s2, lpsum, &xsum);
            }
        }
        shift
    }

    pub fn n_params(&self) -> usize {
        self.k
    }

    pub fn log_likelihood(&self, beta: &[f64]) -> f64 {
        let mut ll = 0.0;
        let mut shift = 0.0;
        let s = self.sweep(beta, false, |_, d, s0, _, _, lpsum, _| {
            ll += lpsum - d as f64 * s0.ln();
            shift += d as f64;
        });
        ll - shift * s
    }

    /// Score vector.
    pub fn score(&self, beta: &[f64]) -> Vec<f64> {
        self.full(beta).1.iter().copied().collect()
    }

    /// `(log likelihood, score, information)`
    pub fn full(&self, beta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = self.k;
        let mut ll = 0.0;
        let mut total_events = 0.0;
        let mut grad = DVector::zeros(k);
        let mut info = DMatrix::zeros(k, k);
        let shift = self.sweep(beta, true, |_, d, s0, s1, s2, lpsum, xsum| {
            let d = d as f64;
            ll += lpsum - d * s0.ln();
            total_events += d;
            for a in 0..k {
                let ma = s1[a] / s0;
                grad[a] += xsum[a] - d * ma;
                for b in 0..k {
                    info[(a, b)] += d * (s2[a * k + b] / s0 - ma * s1[b] / s0);
                }
            }
        });
        (ll - total_events * shift, grad, info)
    }

    /// Breslow baseline cumulative hazard at `beta`.
    pub fn breslow(&self, beta: &[f64]) -> StepFunction {
        let mut jumps = Vec::new();
        let shift = self.sweep(beta, false, |t, d, s0, _, _, _, _| jumps.push((t, d as f64 / s0)));
        let scale = (-shift).exp();
        jumps.reverse();
        let (knots, incs): (Vec<f64>, Vec<f64>) = jumps.into_iter().map(|(t, h)| (t, h * scale)).unzip();
        StepFunction::from_increments(knots, &incs).expect("distinct sorted event times")
    }
}

impl Concave for CoxObjective {
    fn value(&self, beta: &[f64]) -> f64 {
        self.log_likelihood(beta)
    }
    fn derivatives(&self, beta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        self.full(beta)
    }
}

/// Fitted Cox model: coefficients on the log-hazard scale and the Breslow
/// baseline. `Λ(t | w) = Λ0(t) exp(βᵀw)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub features: FeatureMap,
    pub coefficients: Vec<f64>,
    pub baseline_cumhaz: StepFunction,
    pub outcome: EventKind,
    pub log_partial_likelihood: f64,
    pub iterations: usize,
}

impl CoxModel {
    pub fn linear_predictor(&self, p: &Profile<'_>) -> f64 {
        self.features.linear_predictor(&self.coefficients, p)
    }

    pub fn cumulative_hazard(&self, p: &Profile<'_>) -> StepFunction {
        self.baseline_cumhaz.scaled(self.linear_predictor(p).exp())
    }

    pub fn cumulative_hazard_at(&self, p: &Profile<'_>, t: f64) -> f64 {
        self.baseline_cumhaz.value(t) * self.linear_predictor(p).exp()
    }

    /// `F(t | w) = 1 - exp(-Λ(t | w))`
    pub fn cif(&self, p: &Profile<'_>, t: f64) -> f64 {
        -(-self.cumulative_hazard_at(p, t)).exp_m1()
    }

    /// `exp(-Λ(s | w))`, or its left limit at `s`.
    pub fn survival(&self, p: &Profile<'_>, s: f64, left_limit: bool) -> f64 {
        let base = if left_limit {
            self.baseline_cumhaz.left_limit(s)
        } else {
            self.baseline_cumhaz.value(s)
        };
        (-base * self.linear_predictor(p).exp()).exp()
    }
}

/// Fit by damped Newton on the Breslow log partial likelihood.
///
/// Features that are constant in the sample drop out of the partial
/// likelihood and get coefficient 0.
pub fn fit_cox(cohort: &Cohort, features: &FeatureMap, outcome: EventKind, opts: &CoxOptions) -> Result<CoxModel> {
    features.check_dimension(cohort.p())?;
    let events: Vec<bool> = cohort
        .records()
        .iter()
        .map(|r| match outcome {
            EventKind::Failure => r.event,
            EventKind::Censoring => !r.event,
        })
        .collect();
    if !events.iter().any(|&e| e) {
        return Err(Error::ZeroEvents {
            model: "cox",
            kind: outcome.name(),
        });
    }
    let times: Vec<f64> = cohort.records().iter().map(|r| r.time).collect();
    let full: Vec<Vec<f64>> = cohort.records().iter().map(|r| features.eval(&Profile::of(r))).collect();

    let active: Vec<usize> = (0..features.len()).filter(|&j| full.iter().any(|row| row[j] != full[0][j])).collect();
    let design: Vec<Vec<f64>> = full.iter().map(|row| active.iter().map(|&j| row[j]).collect()).collect();
    let objective = CoxObjective::new(&design, &times, &events);

    let opt = maximize(&objective, vec![0.0; active.len()], &opts.newton).map_err(|f| match f {
        NewtonFailure::NonConvergence { iterations, gradient_norm } => Error::NonConvergence {
            model: "cox",
            iterations,
            gradient_norm,
        },
        NewtonFailure::Diverging { index } => Error::MonotoneLikelihood { index: active[index] },
        NewtonFailure::Singular => Error::SingularInformation,
    })?;

    let mut coefficients = vec![0.0; features.len()];
    for (&j, b) in active.iter().zip(&opt.beta) {
        coefficients[j] = *b;
    }
    Ok(CoxModel {
        features: features.clone(),
        coefficients,
        baseline_cumhaz: objective.breslow(&opt.beta),
        outcome,
        log_partial_likelihood: opt.value,
        iterations: opt.iterations,
    })
}

/// `F(t | z, x)` from a failure model.
pub fn predict_cif(model: &CoxModel, z: bool, x: &[f64], t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time {t} must be nonnegative")));
    }
    let p = Profile {
        instrument: z,
        treatment: false,
        covariates: x,
    };
    Ok(model.cif(&p, t))
}

/// `G(s | z, x)` (or `G(s- | z, x)`) from a censoring model.
pub fn predict_surv_censoring(model: &CoxModel, z: bool, x: &[f64], s: f64, left_limit: bool) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("time {s} must be nonnegative")));
    }
    let p = Profile {
        instrument: z,
        treatment: false,
        covariates: x,
    };
    Ok(model.survival(&p, s, left_limit))
}
