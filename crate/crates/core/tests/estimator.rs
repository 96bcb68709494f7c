mod common;

use common::{brute_force_on_grid, brute_force_summands, random_cohort};
use ivsurv::estimator::{eif_table, estimate_onestep, EstimatorOptions, Method};
use ivsurv::nuisance::{fit_bundle, make_folds, LearnerSpec, NuisanceBundle};
use ivsurv::simulate::{run_design, Design, DesignSet, McConfig, McModels, Misspecification, COVARIATES};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn multi_horizon_table_matches_flat_loop() {
    let cohort = random_cohort(31, 40, 1);
    let fitted = fit_bundle(&cohort, &LearnerSpec::main_effects(1).learners(), None).unwrap();
    let horizons = [0.3, 0.8, 1.5];
    let table = eif_table(&cohort, &fitted, &horizons, &EstimatorOptions::default()).unwrap();
    assert_eq!(table.clipped_fraction(), 0.0);
    for (h, (result, _)) in table.onestep(0.05).unwrap().into_iter().enumerate() {
        let oracle = mean(&brute_force_summands(&cohort, fitted.for_subject(0), horizons[h]));
        assert!(
            (result.estimate - oracle).abs() < 1e-12,
            "t={}: {} vs {oracle}",
            horizons[h],
            result.estimate
        );
    }
}

#[test]
fn cross_fitted_estimate_is_mean_of_fold_estimates() {
    let cohort = random_cohort(12, 90, 1);
    let folds = make_folds(cohort.len(), 3, 5).unwrap();
    let fitted = fit_bundle(&cohort, &LearnerSpec::main_effects(1).learners(), Some(&folds)).unwrap();
    let t = 0.7;
    let (result, rows) = estimate_onestep(&cohort, &fitted, t, &EstimatorOptions::default()).unwrap();

    let fold_estimates: Vec<f64> = (0..3)
        .map(|k| {
            let members = folds.members(k);
            let sub = cohort.subset(&members).unwrap();
            let bundle: &NuisanceBundle = &fitted.bundles()[k];
            mean(&brute_force_on_grid(&sub, &cohort, bundle, t))
        })
        .collect();
    assert_eq!(result.clipped_fraction, 0.0);
    assert!(
        (result.estimate - mean(&fold_estimates)).abs() < 1e-12,
        "{} vs {:?}",
        result.estimate,
        fold_estimates
    );
    assert!(rows.iter().map(|r| r.eif).sum::<f64>().abs() < 1e-9);
}

/// Treatment assigned by coin flip, event times depending on `x` and `a` only.
#[derive(Debug)]
struct Randomized;

impl Design for Randomized {
    fn instrument_prob(&self, _: &[f64; COVARIATES]) -> f64 {
        0.5
    }
    fn treatment_prob(&self, _: &[f64; COVARIATES], _: bool, _: f64) -> f64 {
        0.5
    }
    fn event_mean(&self, x: &[f64; COVARIATES], a: bool, _: f64) -> f64 {
        (0.3 * x[0] - 0.4 * x[2] - 1.2 * a as u8 as f64).exp()
    }
    fn censoring_mean(&self, x: &[f64; COVARIATES], _: bool) -> f64 {
        2.0 * (0.2 * x[1]).exp()
    }
    fn name(&self) -> Option<String> {
        Some("randomized".into())
    }
}

#[test]
fn gformula_recovers_randomized_effect() {
    let config = McConfig {
        methods: vec![Method::Gformula],
        reps: 100,
        quantiles: vec![0.3, 0.6],
        oracle_reps: 200_000,
        ..Default::default()
    };
    let report = run_design(&Randomized, 500, 17, &McModels::parametric(&Misspecification::default()), &config).unwrap();
    for c in &report.cells {
        assert!(c.true_ate > 0.1);
        assert!(c.bias.abs() < 3.0 * c.mc_se + 2e-3, "{c:?}");
    }
}

#[test]
fn set1_effect_is_an_increase_in_incidence() {
    let config = McConfig {
        methods: vec![Method::Gformula],
        reps: 2,
        oracle_reps: 200_000,
        ..Default::default()
    };
    let report = run_design(&DesignSet::Set1Weak, 300, 1, &McModels::parametric(&Misspecification::default()), &config).unwrap();
    assert!(report.true_ate.iter().all(|&t| t > 0.0));
    assert!(report.true_ate.windows(2).all(|w| w[1] > w[0]));
}
