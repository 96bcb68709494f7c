use super::{check_horizons, AteResult, Method};
use crate::dataset::Cohort;
use crate::error::Result;
use crate::nuisance::{EventKind, Profile, SurvivalLearner, SurvivalPredictor};
use crate::stats::sum;

/// Fit `F̂(t | A, X)` with `learner` and standardize over the cohort.
///
/// The learner's features decide what the outcome model adjusts for; an
/// instrument feature is allowed but defeats the purpose of the comparator.
pub fn estimate_gformula(cohort: &Cohort, horizons: &[f64], learner: &dyn SurvivalLearner) -> Result<Vec<AteResult>> {
    check_horizons(horizons)?;
    let model = learner.fit(cohort, EventKind::Failure)?;
    Ok(gformula_from_model(cohort, model.as_ref(), horizons))
}

/// `P_n[F̂(t|1,X_i) − F̂(t|0,X_i)]` for an already fitted outcome model.
pub fn gformula_from_model(cohort: &Cohort, model: &dyn SurvivalPredictor, horizons: &[f64]) -> Vec<AteResult> {
    let diffs: Vec<Vec<f64>> = cohort
        .records()
        .iter()
        .map(|r| {
            let own = Profile::of(r);
            let (treated, control) = (own.with_treatment(true), own.with_treatment(false));
            horizons.iter().map(|&t| model.cif(&treated, t) - model.cif(&control, t)).collect()
        })
        .collect();
    horizons
        .iter()
        .enumerate()
        .map(|(h, &t)| {
            let estimate = sum(diffs.iter().map(|d| d[h])) / cohort.len() as f64;
            AteResult::point(t, Method::Gformula, estimate, cohort.len())
        })
        .collect()
}
