//! One-step estimate with nuisances cross-fitted over K folds, next to the
//! same estimate without sample splitting.
//!
//! cargo run --release --example cross_fitting -- 5

use ivsurv::estimator::{estimate_onestep, EstimatorOptions, WeakInstrumentPolicy};
use ivsurv::nuisance::{fit_bundle, make_folds, LearnerSpec};
use ivsurv::simulate::{generate, DesignSet, DgpSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k: usize = std::env::args().nth(1).map_or(Ok(5), |s| s.parse())?;
    let cohort = generate(&DgpSpec::new(DesignSet::Set1Strong, 2000, 3))?.cohort;
    let t = ivsurv::dataset::event_time_quantile(&cohort, 0.5)?;
    let learners = LearnerSpec::main_effects(cohort.p()).learners();
    let opts = EstimatorOptions {
        weak_instrument: WeakInstrumentPolicy::Truncate,
        ..Default::default()
    };

    let full = fit_bundle(&cohort, &learners, None)?;
    let (whole, _) = estimate_onestep(&cohort, &full, t, &opts)?;

    let folds = make_folds(cohort.len(), k, 11)?;
    println!("fold sizes {:?}", folds.sizes());
    let split = fit_bundle(&cohort, &learners, Some(&folds))?;
    let (crossed, rows) = estimate_onestep(&cohort, &split, t, &opts)?;

    for (label, r) in [("full sample", &whole), ("cross-fitted", &crossed)] {
        println!(
            "{label:>13}: {:.4} (se {:.4}), CI [{:.4}, {:.4}]",
            r.estimate,
            r.std_err.unwrap(),
            r.ci_low.unwrap(),
            r.ci_high.unwrap()
        );
    }
    let largest = rows.iter().map(|r| r.eif.abs()).fold(0.0, f64::max);
    println!("largest |EIF| {largest:.3}");
    Ok(())
}
