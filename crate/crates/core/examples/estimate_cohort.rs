//! Plug-in, one-step and G-formula estimates on a cohort read from CSV.
//!
//! cargo run --release --example estimate_cohort [-- path/to/cohort.csv]
//!
//! Without a path, a cohort simulated from a design with positive compliance
//! everywhere is written to a temporary file first.
//! The CSV needs `time`, `event`, `a`, `z` and covariate columns `x1, x2, ...`.

use ivsurv::dataset::{event_time_quantile, load_cohort, save_cohort, CohortSchema};
use ivsurv::estimator::{eif_table, estimate_gformula, EstimatorOptions, WeakInstrumentPolicy};
use ivsurv::nuisance::{fit_bundle, CoxLearner, FeatureMap, LearnerSpec};
use ivsurv::simulate::{generate_with, Design, DesignSet, COVARIATES};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug)]
struct Demo;

impl Design for Demo {
    fn instrument_prob(&self, x: &[f64; COVARIATES]) -> f64 {
        DesignSet::Set1Weak.instrument_prob(x)
    }

    fn treatment_prob(&self, x: &[f64; COVARIATES], z: bool, u: f64) -> f64 {
        0.2 + 0.2 / (1.0 + (x[1] - x[0]).exp()) + 0.5 * z as u8 as f64 + 0.2 * (u - 0.5)
    }

    fn event_mean(&self, x: &[f64; COVARIATES], a: bool, u: f64) -> f64 {
        DesignSet::Set1Strong.event_mean(x, a, u)
    }

    fn censoring_mean(&self, x: &[f64; COVARIATES], a: bool) -> f64 {
        DesignSet::Set1Strong.censoring_mean(x, a)
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let p = std::env::temp_dir().join("ivsurv_example_cohort.csv");
            save_cohort(&generate_with(&Demo, 1000, &mut ChaCha8Rng::seed_from_u64(7))?.cohort, &p)?;
            p
        }
    };
    let cohort = load_cohort(&path, &CohortSchema::default())?;
    println!(
        "{}: {} subjects, {:.1}% events",
        path.display(),
        cohort.len(),
        100.0 * cohort.event_fraction()
    );

    let horizons = [0.3, 0.4, 0.5, 0.6]
        .iter()
        .map(|&q| event_time_quantile(&cohort, q))
        .collect::<Result<Vec<_>, _>>()?;

    let spec = LearnerSpec::main_effects(cohort.p());
    let fitted = fit_bundle(&cohort, &spec.learners(), None)?;
    let opts = EstimatorOptions {
        weak_instrument: WeakInstrumentPolicy::Truncate,
        ..Default::default()
    };
    let table = eif_table(&cohort, &fitted, &horizons, &opts)?;
    let plugin = table.plugin();
    let onestep = table.onestep(opts.alpha)?;
    let gformula = estimate_gformula(&cohort, &horizons, &CoxLearner::new(FeatureMap::treatment_and_covariates(cohort.p())))?;

    println!("{:>10} {:>9} {:>9} {:>9} {:>21}", "t", "gformula", "plugin", "onestep", "95% CI");
    for h in 0..horizons.len() {
        let os = &onestep[h].0;
        println!(
            "{:>10.5} {:>9.4} {:>9.4} {:>9.4}   [{:>7.4}, {:>7.4}]",
            horizons[h],
            gformula[h].estimate,
            plugin[h].estimate,
            os.estimate,
            os.ci_low.unwrap(),
            os.ci_high.unwrap()
        );
    }
    println!(
        "clipped: {:.1}% of subjects, truncated denominators: {:.1}%",
        100.0 * table.clipped_fraction(),
        100.0 * table.weak_fraction()
    );
    Ok(())
}
