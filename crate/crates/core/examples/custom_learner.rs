//! Plugging a different survival model into the estimator: a Nelson–Aalen
//! estimate within each instrument arm, ignoring covariates.
//!
//! cargo run --release --example custom_learner

use std::sync::Arc;

use ivsurv::dataset::{event_time_quantile, Cohort};
use ivsurv::estimator::{estimate_onestep, EstimatorOptions, WeakInstrumentPolicy};
use ivsurv::nuisance::{fit_bundle, EventKind, LearnerSpec, Learners, Profile, StepFunction, SurvivalLearner, SurvivalPredictor};
use ivsurv::simulate::{generate, DesignSet, DgpSpec};

#[derive(Debug)]
struct ArmNelsonAalen;

#[derive(Debug)]
struct ByArm([StepFunction; 2]);

impl SurvivalPredictor for ByArm {
    fn cumulative_hazard(&self, profile: &Profile<'_>) -> StepFunction {
        self.0[profile.instrument as usize].clone()
    }
}

fn nelson_aalen(cohort: &Cohort, arm: bool, outcome: EventKind) -> ivsurv::Result<StepFunction> {
    let mut rows: Vec<(f64, bool)> = cohort
        .records()
        .iter()
        .filter(|r| r.instrument == arm)
        .map(|r| (r.time, r.event == (outcome == EventKind::Failure)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut knots, mut increments) = (Vec::new(), Vec::new());
    let mut at_risk = rows.len() as f64;
    let mut i = 0;
    while i < rows.len() {
        let t = rows[i].0;
        let (mut tied, mut events) = (0.0, 0.0);
        while i < rows.len() && rows[i].0 == t {
            tied += 1.0;
            events += rows[i].1 as u8 as f64;
            i += 1;
        }
        if events > 0.0 {
            knots.push(t);
            increments.push(events / at_risk);
        }
        at_risk -= tied;
    }
    StepFunction::from_increments(knots, &increments)
}

impl SurvivalLearner for ArmNelsonAalen {
    fn fit(&self, cohort: &Cohort, outcome: EventKind) -> ivsurv::Result<Arc<dyn SurvivalPredictor>> {
        Ok(Arc::new(ByArm([
            nelson_aalen(cohort, false, outcome)?,
            nelson_aalen(cohort, true, outcome)?,
        ])))
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = generate(&DgpSpec::new(DesignSet::Set1Weak, 1000, 21))?.cohort;
    let t = event_time_quantile(&cohort, 0.5)?;
    let parametric = LearnerSpec::main_effects(cohort.p()).learners();
    let custom = Learners {
        outcome: Arc::new(ArmNelsonAalen),
        censoring: Arc::new(ArmNelsonAalen),
        ..parametric.clone()
    };
    let opts = EstimatorOptions {
        weak_instrument: WeakInstrumentPolicy::Truncate,
        ..Default::default()
    };
    for (label, learners) in [("Cox", &parametric), ("Nelson–Aalen by arm", &custom)] {
        let fitted = fit_bundle(&cohort, learners, None)?;
        let (r, _) = estimate_onestep(&cohort, &fitted, t, &opts)?;
        println!("{label:>20}: {:.4} [{:.4}, {:.4}]", r.estimate, r.ci_low.unwrap(), r.ci_high.unwrap());
    }
    Ok(())
}
