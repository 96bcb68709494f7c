use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_horizons, variance_ci, AteResult, EstimatorOptions, Method, WeakInstrumentPolicy};
use crate::dataset::{Cohort, ObservedRecord};
use crate::error::{Error, Result};
use crate::nuisance::{CrossFitted, FoldAssignment, NuisanceBundle, Profile};
use crate::stats::{mean, sum};

/// Clamps probabilities that enter denominators and remembers whether it had to.
struct Clip {
    eps: f64,
    hit: bool,
}

impl Clip {
    fn new(eps: f64) -> Self {
        Self { eps, hit: false }
    }

    /// Into `[eps, 1 − eps]`.
    fn both(&mut self, p: f64) -> f64 {
        let c = p.clamp(self.eps, 1.0 - self.eps);
        self.hit |= c != p;
        c
    }

    /// Survival-type denominators only need the lower bound.
    fn floor(&mut self, p: f64) -> f64 {
        if p < self.eps {
            self.hit = true;
            self.eps
        } else {
            p
        }
    }
}

/// `(2Z − 1) / γ̂(Z | X)`
fn instrument_weight(record: &ObservedRecord, bundle: &NuisanceBundle, clip: &mut Clip) -> f64 {
    let g1 = clip.both(bundle.prevalence.probability(&Profile::of(record)));
    if record.instrument {
        1.0 / g1
    } else {
        -1.0 / (1.0 - g1)
    }
}

/// Martingale term at every horizon.
///
/// The integral over `[0, min(T̃, t)]` is a sum over the jump points of the
/// fitted `Λ̂(·|Z,X)` plus the subject's own event jump; `1 − F̂(s)` and
/// `Ĝ(s)` in the integrand are taken as left limits at `s`.
fn dr_at(record: &ObservedRecord, bundle: &NuisanceBundle, horizons: &[f64], clip: &mut Clip) -> Vec<f64> {
    let own = Profile::of(record);
    let weight = instrument_weight(record, bundle, clip);
    let cumhaz = bundle.cif.cumulative_hazard(&own);
    let cens = bundle.censoring.cumulative_hazard(&own);
    let t_max = horizons.iter().copied().fold(0.0, f64::max);
    let upper = record.time.min(t_max);

    let knots = cumhaz.knots();
    let values = cumhaz.values();
    let m = knots.partition_point(|&s| s <= upper);
    let mut compensator = Vec::with_capacity(m);
    let mut acc = 0.0;
    let mut prev = 0.0;
    for (k, g_left) in cens.left_limits_sorted(knots[..m].iter().copied()).enumerate() {
        let d_lambda = values[k] - prev;
        let s_left = clip.floor((-prev).exp());
        let g_left = clip.floor((-g_left).exp());
        acc -= d_lambda / (s_left * g_left);
        compensator.push(acc);
        prev = values[k];
    }
    let jump = if record.event && record.time <= t_max {
        let s_left = clip.floor((-cumhaz.left_limit(record.time)).exp());
        let g_left = clip.floor((-cens.left_limit(record.time)).exp());
        1.0 / (s_left * g_left)
    } else {
        0.0
    };

    horizons
        .iter()
        .map(|&t| {
            let limit = record.time.min(t);
            let idx = knots[..m].partition_point(|&s| s <= limit);
            let mut integral = if idx == 0 { 0.0 } else { compensator[idx - 1] };
            if record.event && record.time <= t {
                integral += jump;
            }
            weight * (-cumhaz.value(t)).exp() * integral
        })
        .collect()
}

fn da_of(record: &ObservedRecord, bundle: &NuisanceBundle, clip: &mut Clip) -> f64 {
    let weight = instrument_weight(record, bundle, clip);
    let pi = clip.both(bundle.propensity.probability(&Profile::of(record)));
    weight * (record.treatment as u8 as f64 - pi)
}

/// `D^R` at horizon `t` for one subject.
pub fn eif_dr(record: &ObservedRecord, bundle: &NuisanceBundle, t: f64, opts: &EstimatorOptions) -> f64 {
    dr_at(record, bundle, &[t], &mut Clip::new(opts.clip))[0]
}

/// `D^A = (2Z − 1) / γ̂(Z|X) · (A − π̂(1|Z,X))`
pub fn eif_da(record: &ObservedRecord, bundle: &NuisanceBundle, opts: &EstimatorOptions) -> f64 {
    da_of(record, bundle, &mut Clip::new(opts.clip))
}

/// Per-subject building blocks at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectTerms {
    pub dr: f64,
    pub da: f64,
    /// Conditional Wald ratio `Ψ_X^R / Ψ_X^A`.
    pub psi_x: f64,
    /// `π̂(1|1,X) − π̂(1|0,X)` after the floor policy.
    pub psi_x_a: f64,
}

impl SubjectTerms {
    /// `Ψ_X + D^R/Ψ_X^A − Ψ_X · D^A/Ψ_X^A`, the uncentered one-step summand.
    pub fn summand(&self) -> f64 {
        self.psi_x + self.dr / self.psi_x_a - self.psi_x * self.da / self.psi_x_a
    }
}

/// Influence-function row: the building blocks plus the centered value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EifRow {
    pub dr: f64,
    pub da: f64,
    pub psi_x: f64,
    pub psi_x_a: f64,
    pub eif: f64,
}

struct SubjectOutcome {
    terms: Vec<SubjectTerms>,
    clipped: bool,
    truncated: bool,
}

fn subject_terms(i: usize, record: &ObservedRecord, bundle: &NuisanceBundle, horizons: &[f64], opts: &EstimatorOptions) -> Result<SubjectOutcome> {
    let mut clip = Clip::new(opts.clip);
    let own = Profile::of(record);
    let (p1, p0) = (own.with_instrument(true), own.with_instrument(false));
    let mut psi_a = clip.both(bundle.propensity.probability(&p1)) - clip.both(bundle.propensity.probability(&p0));
    let mut truncated = false;
    if !(psi_a.abs() >= opts.denominator_floor) {
        match opts.weak_instrument {
            WeakInstrumentPolicy::Error => {
                return Err(Error::WeakInstrument {
                    subject: i,
                    denominator: psi_a,
                    floor: opts.denominator_floor,
                    covariates: record.covariates.clone(),
                })
            }
            WeakInstrumentPolicy::Truncate => {
                psi_a = if psi_a < 0.0 { -opts.denominator_floor } else { opts.denominator_floor };
                truncated = true;
            }
        }
    }
    let dr = dr_at(record, bundle, horizons, &mut clip);
    let da = da_of(record, bundle, &mut clip);
    let terms = horizons
        .iter()
        .zip(dr)
        .map(|(&t, dr)| SubjectTerms {
            dr,
            da,
            psi_x: (bundle.cif.cif(&p1, t) - bundle.cif.cif(&p0, t)) / psi_a,
            psi_x_a: psi_a,
        })
        .collect();
    Ok(SubjectOutcome {
        terms,
        clipped: clip.hit,
        truncated,
    })
}

/// Per-subject influence-function building blocks at several horizons,
/// computed in one pass over the cohort. Plug-in and one-step estimates
/// are aggregates of this table.
#[derive(Debug, Clone)]
pub struct EifTable {
    horizons: Vec<f64>,
    /// `terms[h][i]`
    terms: Vec<Vec<SubjectTerms>>,
    clipped: Vec<bool>,
    truncated: Vec<bool>,
    folds: Option<FoldAssignment>,
}

pub fn eif_table(cohort: &Cohort, fitted: &CrossFitted, horizons: &[f64], opts: &EstimatorOptions) -> Result<EifTable> {
    opts.validate()?;
    check_horizons(horizons)?;
    let outcomes = (0..cohort.len())
        .into_par_iter()
        .map(|i| subject_terms(i, cohort.get(i), fitted.for_subject(i), horizons, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut terms = vec![Vec::with_capacity(cohort.len()); horizons.len()];
    let mut clipped = Vec::with_capacity(cohort.len());
    let mut truncated = Vec::with_capacity(cohort.len());
    for o in outcomes {
        for (h, t) in o.terms.into_iter().enumerate() {
            terms[h].push(t);
        }
        clipped.push(o.clipped);
        truncated.push(o.truncated);
    }
    Ok(EifTable {
        horizons: horizons.to_vec(),
        terms,
        clipped,
        truncated,
        folds: fitted.folds().cloned(),
    })
}

impl EifTable {
    pub fn horizons(&self) -> &[f64] {
        &self.horizons
    }

    pub fn n(&self) -> usize {
        self.clipped.len()
    }

    /// Subject terms at horizon index `h`.
    pub fn terms(&self, h: usize) -> &[SubjectTerms] {
        &self.terms[h]
    }

    pub fn clipped_fraction(&self) -> f64 {
        self.clipped.iter().filter(|&&c| c).count() as f64 / self.n() as f64
    }

    pub fn weak_fraction(&self) -> f64 {
        self.truncated.iter().filter(|&&c| c).count() as f64 / self.n() as f64
    }

    /// Mean of `values`; with cross-fitting, the mean of per-fold means.
    fn aggregate(&self, values: &[f64]) -> f64 {
        match &self.folds {
            None => mean(values),
            Some(f) => {
                let fold_means: Vec<f64> = (0..f.k())
                    .map(|k| {
                        let members = f.members(k);
                        sum(members.iter().map(|&i| values[i])) / members.len() as f64
                    })
                    .collect();
                mean(&fold_means)
            }
        }
    }

    fn result(&self, h: usize, method: Method, estimate: f64) -> AteResult {
        AteResult {
            clipped_fraction: self.clipped_fraction(),
            weak_fraction: self.weak_fraction(),
            ..AteResult::point(self.horizons[h], method, estimate, self.n())
        }
    }

    /// Averaged conditional Wald estimate at every horizon (no standard error).
    pub fn plugin(&self) -> Vec<AteResult> {
        (0..self.horizons.len())
            .map(|h| {
                let psi: Vec<f64> = self.terms[h].iter().map(|t| t.psi_x).collect();
                self.result(h, Method::Plugin, self.aggregate(&psi))
            })
            .collect()
    }

    /// One-step estimate, Wald interval and centered influence rows at every horizon.
    pub fn onestep(&self, alpha: f64) -> Result<Vec<(AteResult, Vec<EifRow>)>> {
        (0..self.horizons.len())
            .map(|h| {
                let summands: Vec<f64> = self.terms[h].iter().map(SubjectTerms::summand).collect();
                let estimate = self.aggregate(&summands);
                let rows: Vec<EifRow> = self.terms[h]
                    .iter()
                    .zip(&summands)
                    .map(|(t, s)| EifRow {
                        dr: t.dr,
                        da: t.da,
                        psi_x: t.psi_x,
                        psi_x_a: t.psi_x_a,
                        eif: s - estimate,
                    })
                    .collect();
                let eif: Vec<f64> = rows.iter().map(|r| r.eif).collect();
                let w = variance_ci(&eif, estimate, self.n(), alpha)?;
                let result = AteResult {
                    std_err: Some(w.std_err),
                    ci_low: Some(w.ci_low),
                    ci_high: Some(w.ci_high),
                    ..self.result(h, Method::Onestep, estimate)
                };
                Ok((result, rows))
            })
            .collect()
    }
}

pub fn estimate_plugin(cohort: &Cohort, fitted: &CrossFitted, t: f64, opts: &EstimatorOptions) -> Result<AteResult> {
    Ok(eif_table(cohort, fitted, &[t], opts)?.plugin().remove(0))
}

pub fn estimate_onestep(cohort: &Cohort, fitted: &CrossFitted, t: f64, opts: &EstimatorOptions) -> Result<(AteResult, Vec<EifRow>)> {
    Ok(eif_table(cohort, fitted, &[t], opts)?.onestep(opts.alpha)?.remove(0))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::nuisance::{BinaryPredictor, StepFunction, SurvivalPredictor};

    #[derive(Debug)]
    struct FixedCurve(StepFunction);
    impl SurvivalPredictor for FixedCurve {
        fn cumulative_hazard(&self, _: &Profile<'_>) -> StepFunction {
            self.0.clone()
        }
    }

    #[derive(Debug)]
    struct FixedProb(f64);
    impl BinaryPredictor for FixedProb {
        fn probability(&self, _: &Profile<'_>) -> f64 {
            self.0
        }
    }

    fn bundle(cif: StepFunction, cens: StepFunction, pi: f64, gamma: f64) -> NuisanceBundle {
        NuisanceBundle {
            cif: Arc::new(FixedCurve(cif)),
            censoring: Arc::new(FixedCurve(cens)),
            propensity: Arc::new(FixedProb(pi)),
            prevalence: Arc::new(FixedProb(gamma)),
        }
    }

    #[test]
    fn censored_before_first_jump_has_zero_dr() {
        let b = bundle(
            StepFunction::from_increments(vec![2.0], &[0.3]).unwrap(),
            StepFunction::default(),
            0.5,
            0.5,
        );
        let r = ObservedRecord::new(1.0, false, true, true, vec![0.0]);
        assert_eq!(eif_dr(&r, &b, 5.0, &EstimatorOptions::default()), 0.0);
    }

    #[test]
    fn single_jump_hand_computation() {
        // Λ jumps by 0.1 at 0.5, 0.2 at 1 and 0.4 at 1.5; censoring Λc jumps 0.1 at 1.
        let cif = StepFunction::from_increments(vec![0.5, 1.0, 1.5], &[0.1, 0.2, 0.4]).unwrap();
        let cens = StepFunction::from_increments(vec![1.0], &[0.1]).unwrap();
        let b = bundle(cif, cens, 0.5, 0.5);
        let r = ObservedRecord::new(1.0, true, true, true, vec![0.0]);
        let s_t = (-0.7f64).exp();
        // s = 0.5: S(0.5-) = 1, G(0.5-) = 1; s = 1: S(1-) = e^-0.1, G(1-) = 1
        let at_half = -0.1 / (1.0 * 1.0);
        let at_one = (1.0 - 0.2) / ((-0.1f64).exp() * 1.0);
        let expected = 2.0 * s_t * (at_half + at_one);
        let got = eif_dr(&r, &b, 2.0, &EstimatorOptions::default());
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn da_arithmetic_and_clipping() {
        let b = bundle(StepFunction::default(), StepFunction::default(), 0.25, 0.5);
        let r = ObservedRecord::new(1.0, true, true, false, vec![0.0]);
        assert!((eif_da(&r, &b, &EstimatorOptions::default()) + 1.5).abs() < 1e-15);

        let b = bundle(StepFunction::default(), StepFunction::default(), 1.0, 0.5);
        let r = ObservedRecord::new(1.0, true, true, true, vec![0.0]);
        let da = eif_da(&r, &b, &EstimatorOptions::default());
        assert!(da.abs() < 1e-3 && da > 0.0);
    }

    #[derive(Debug)]
    struct ByInstrument(f64, f64);
    impl SurvivalPredictor for ByInstrument {
        /// Constant CIF `F1` or `F0` from time 0.5 onward.
        fn cumulative_hazard(&self, p: &Profile<'_>) -> StepFunction {
            let f = if p.instrument { self.1 } else { self.0 };
            StepFunction::new(vec![0.5], vec![-(1.0 - f).ln()]).unwrap()
        }
    }

    #[derive(Debug)]
    struct FollowsInstrument;
    impl BinaryPredictor for FollowsInstrument {
        fn probability(&self, p: &Profile<'_>) -> f64 {
            p.instrument as u8 as f64
        }
    }

    fn compliant_cohort(n: usize) -> Cohort {
        let records = (0..n)
            .map(|i| {
                let z = i % 2 == 0;
                ObservedRecord::new(0.1 + (i % 7) as f64 * 0.3, i % 3 != 0, z, z, vec![i as f64 / n as f64])
            })
            .collect();
        Cohort::new(records).unwrap()
    }

    fn compliant_bundle() -> CrossFitted {
        CrossFitted::single(NuisanceBundle {
            cif: Arc::new(ByInstrument(0.2, 0.5)),
            censoring: Arc::new(FixedCurve(StepFunction::default())),
            propensity: Arc::new(FollowsInstrument),
            prevalence: Arc::new(FixedProb(0.5)),
        })
    }

    #[test]
    fn full_compliance_plugin_is_cif_difference() {
        let cohort = compliant_cohort(20);
        let r = estimate_plugin(&cohort, &compliant_bundle(), 1.0, &EstimatorOptions::default()).unwrap();
        // Ψ^A clips to (1 − 1e-4) − 1e-4.
        assert!((r.estimate - 0.3 / (1.0 - 2e-4)).abs() < 1e-12, "{}", r.estimate);
        assert_eq!(r.clipped_fraction, 1.0);
    }

    #[test]
    fn centered_rows_and_order_invariance() {
        let cohort = compliant_cohort(31);
        let opts = EstimatorOptions::default();
        let (r, rows) = estimate_onestep(&cohort, &compliant_bundle(), 1.0, &opts).unwrap();
        assert!(sum(rows.iter().map(|r| r.eif)).abs() < 1e-12);
        assert!(r.std_err.unwrap() > 0.0);

        let mut reversed = cohort.records().to_vec();
        reversed.reverse();
        let rev = Cohort::new(reversed).unwrap();
        let (r2, _) = estimate_onestep(&rev, &compliant_bundle(), 1.0, &opts).unwrap();
        assert!((r.estimate - r2.estimate).abs() < 1e-14);
        assert!((r.std_err.unwrap() - r2.std_err.unwrap()).abs() < 1e-14);
    }

    #[test]
    fn onestep_is_plugin_plus_mean_correction() {
        let records = (0..10)
            .map(|i| ObservedRecord::new(if i == 0 { 0.4 } else { 0.2 }, i == 0, i % 2 == 0, i % 2 == 1, vec![0.0]))
            .collect();
        let cohort = Cohort::new(records).unwrap();
        let b = CrossFitted::single(NuisanceBundle {
            cif: Arc::new(ByInstrument(0.2, 0.5)),
            censoring: Arc::new(FixedCurve(StepFunction::default())),
            propensity: Arc::new(FixedProb(0.5)),
            prevalence: Arc::new(FixedProb(0.5)),
        });
        let opts = EstimatorOptions {
            weak_instrument: WeakInstrumentPolicy::Truncate,
            ..Default::default()
        };
        let table = eif_table(&cohort, &b, &[1.0], &opts).unwrap();
        assert_eq!(table.weak_fraction(), 1.0);
        // Censored before the first CIF jump.
        assert!(table.terms(0)[1..].iter().all(|t| t.dr == 0.0));
        assert!(table.terms(0)[0].dr != 0.0);
        let plugin = table.plugin()[0].estimate;
        let correction: Vec<f64> = table.terms(0).iter().map(|t| (t.dr - t.psi_x * t.da) / t.psi_x_a).collect();
        let by_hand = plugin + mean(&correction);
        let (one, _) = table.onestep(0.05).unwrap().remove(0);
        assert!((one.estimate - by_hand).abs() < 1e-9 * by_hand.abs().max(1.0));

        let strict = eif_table(&cohort, &b, &[1.0], &EstimatorOptions::default()).unwrap_err();
        assert!(matches!(strict, Error::WeakInstrument { subject: 0, .. }));
    }
}
