use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate_with, Design, DgpSpec, Misspecification, COVARIATES};
use super::truth::{true_ate, DEFAULT_ORACLE_REPS};
use crate::dataset::sorted_quantile;
use crate::error::{Error, Result};
use crate::estimator::{eif_table, estimate_gformula, AteResult, EstimatorOptions, Method, WeakInstrumentPolicy};
use crate::nuisance::{fit_bundle, make_folds, CoxLearner, Feature, FeatureMap, LearnerSpec, Learners, SurvivalLearner};
use crate::stats::{mean, normal_quantile, sample_sd, sum};

/// Stream reserved for the calibration sample that fixes the horizons.
const CALIBRATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub methods: Vec<Method>,
    pub reps: usize,
    /// Horizons as quantiles of observed follow-up in a calibration sample of `10 n`.
    pub quantiles: Vec<f64>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub oracle_reps: usize,
    pub k_folds: Option<usize>,
    pub estimator: EstimatorOptions,
    /// Keep every replicate's estimates in the report.
    pub keep_replicates: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            reps: 500,
            quantiles: vec![0.3, 0.4, 0.5, 0.6],
            workers: 0,
            oracle_reps: DEFAULT_ORACLE_REPS,
            k_folds: None,
            estimator: EstimatorOptions {
                weak_instrument: WeakInstrumentPolicy::Truncate,
                ..EstimatorOptions::default()
            },
            keep_replicates: false,
        }
    }
}

/// Working models fitted in every replicate.
#[derive(Debug, Clone)]
pub struct McModels {
    pub nuisance: Learners,
    /// Outcome model of the G-formula comparator.
    pub gformula: Arc<dyn SurvivalLearner>,
}

impl McModels {
    /// Cox and logistic main-effects models, with Set-2 misspecified
    /// variants where `mis` asks for them.
    pub fn parametric(mis: &Misspecification) -> Self {
        let mut spec = LearnerSpec::main_effects(COVARIATES);
        let (w1, w3, w4) = (Feature::ExpHalf(0), Feature::CubicProduct(0, 2), Feature::ShiftedSquare(3));
        if mis.outcome {
            spec.outcome = FeatureMap::new(vec![Feature::Instrument, w1, w3, w4]);
        }
        if mis.treatment {
            spec.propensity = FeatureMap::new(vec![Feature::Instrument, w1, w3]);
        }
        if mis.censoring {
            spec.censoring = FeatureMap::new(vec![Feature::Instrument, w1, w3, w4]);
        }
        if mis.instrument {
            spec.prevalence = FeatureMap::new(vec![w1, w3, w4]);
        }
        let mut gformula = CoxLearner::new(FeatureMap::treatment_and_covariates(COVARIATES));
        gformula.options = spec.cox;
        Self {
            nuisance: spec.learners(),
            gformula: Arc::new(gformula),
        }
    }
}

/// Summary of one method at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub method: Method,
    pub quantile: f64,
    pub horizon: f64,
    pub true_ate: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_ci_width: f64,
    /// Mean of `|estimate − truth|` over replicates.
    pub mean_abs_bias: f64,
    /// Sampling SD of the estimates.
    pub sd: f64,
    /// Monte Carlo standard error of the bias, `sd / √B`.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub results: Vec<AteResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub set: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub misspecification: Misspecification,
    pub quantiles: Vec<f64>,
    pub horizons: Vec<f64>,
    pub true_ate: Vec<f64>,
    pub oracle_reps: usize,
    pub failures: usize,
    pub failure_messages: Vec<String>,
    /// Averages over successful replicates.
    pub censored_fraction: f64,
    pub weak_fraction: f64,
    pub clamped_fraction: f64,
    pub cells: Vec<McCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<Vec<ReplicateRecord>>,
}

impl McReport {
    pub fn cell(&self, method: Method, quantile: f64) -> Option<&McCell> {
        self.cells.iter().find(|c| c.method == method && c.quantile == quantile)
    }
}

struct Replicate {
    index: usize,
    results: Vec<AteResult>,
    censored: f64,
    weak: f64,
    clamped: f64,
}

/// Bias, RMSE, coverage and interval width for one method at one horizon.
/// Without per-replicate standard errors the intervals use the sampling SD.
pub(crate) fn summarize(method: Method, quantile: f64, horizon: f64, truth: f64, estimates: &[f64], std_errs: Option<&[f64]>, alpha: f64) -> McCell {
    let b = estimates.len() as f64;
    let z = normal_quantile(1.0 - alpha / 2.0);
    let sd = sample_sd(estimates);
    let se = |r: usize| std_errs.map_or(sd, |s| s[r]);
    let covered = (0..estimates.len()).filter(|&r| (estimates[r] - truth).abs() <= z * se(r)).count();
    let mean_estimate = mean(estimates);
    McCell {
        method,
        quantile,
        horizon,
        true_ate: truth,
        mean_estimate,
        bias: mean_estimate - truth,
        rmse: (sum(estimates.iter().map(|e| (e - truth) * (e - truth))) / b).sqrt(),
        coverage: covered as f64 / b,
        mean_ci_width: sum((0..estimates.len()).map(|r| 2.0 * z * se(r))) / b,
        mean_abs_bias: sum(estimates.iter().map(|e| (e - truth).abs())) / b,
        sd,
        mc_se: sd / b.sqrt(),
    }
}

fn replicate(design: &dyn Design, n: usize, seed: u64, index: usize, horizons: &[f64], models: &McModels, config: &McConfig) -> Result<Replicate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let sim = generate_with(design, n, &mut rng)?;
    let cohort = &sim.cohort;
    let mut results = Vec::new();
    let mut weak = 0.0;
    let wants = |m| config.methods.contains(&m);
    if wants(Method::Plugin) || wants(Method::Onestep) {
        let folds = config.k_folds.map(|k| make_folds(n, k, seed.wrapping_add(index as u64))).transpose()?;
        let fitted = fit_bundle(cohort, &models.nuisance, folds.as_ref())?;
        let table = eif_table(cohort, &fitted, horizons, &config.estimator)?;
        weak = table.weak_fraction();
        if wants(Method::Plugin) {
            results.extend(table.plugin());
        }
        if wants(Method::Onestep) {
            results.extend(table.onestep(config.estimator.alpha)?.into_iter().map(|(r, _)| r));
        }
    }
    if wants(Method::Gformula) {
        results.extend(estimate_gformula(cohort, horizons, models.gformula.as_ref())?);
    }
    Ok(Replicate {
        index,
        results,
        censored: 1.0 - cohort.event_fraction(),
        weak,
        clamped: sim.clamped as f64 / n as f64,
    })
}

/// Observed-time quantiles of one calibration draw of size `10 n`.
pub fn calibrate_horizons(design: &dyn Design, n: usize, seed: u64, quantiles: &[f64]) -> Result<Vec<f64>> {
    if let Some(q) = quantiles.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::invalid(format!("quantile {q} outside (0,1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CALIBRATION_STREAM);
    let sim = generate_with(design, 10 * n, &mut rng)?;
    let mut times: Vec<f64> = sim.cohort.records().iter().map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    Ok(quantiles.iter().map(|&q| sorted_quantile(&times, q)).collect())
}

/// Monte Carlo study of a built-in design with parametric working models.
pub fn run_mc(spec: &DgpSpec, config: &McConfig) -> Result<McReport> {
    spec.validate()?;
    let models = McModels::parametric(&spec.misspecification);
    let mut report = run_design(&spec.set, spec.n, spec.seed, &models, config)?;
    report.misspecification = spec.misspecification;
    Ok(report)
}

/// Monte Carlo study of any design with any working models. Replicate `r`
/// draws from stream `r` of a generator seeded with `seed`, so the report
/// does not depend on the number of workers.
pub fn run_design(design: &dyn Design, n: usize, seed: u64, models: &McModels, config: &McConfig) -> Result<McReport> {
    if config.reps < 2 {
        return Err(Error::invalid("need at least 2 replicates"));
    }
    if config.methods.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    config.estimator.validate()?;
    let horizons = calibrate_horizons(design, n, seed, &config.quantiles)?;
    let truth = true_ate(design, &horizons, config.oracle_reps)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<Replicate>> = pool.install(|| {
        (0..config.reps)
            .into_par_iter()
            .map(|r| replicate(design, n, seed, r, &horizons, models, config))
            .collect()
    });

    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failure_messages = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(rep) => ok.push(rep),
            Err(e) => {
                log::warn!("replicate {r} failed: {e}");
                failure_messages.push(format!("replicate {r}: {e}"));
            }
        }
    }
    let failures = failure_messages.len();
    if failures * 20 > config.reps {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: config.reps,
            first: failure_messages.swap_remove(0),
        });
    }
    if ok.len() < 2 {
        return Err(Error::invalid("fewer than 2 replicates succeeded"));
    }

    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let mut cells = Vec::new();
    for &method in &methods {
        for (h, (&q, &t)) in config.quantiles.iter().zip(&horizons).enumerate() {
            let pick = |rep: &Replicate| {
                rep.results
                    .iter()
                    .find(|r| r.method == method && r.horizon == t)
                    .cloned()
                    .expect("every requested method is estimated at every horizon")
            };
            let rows: Vec<AteResult> = ok.iter().map(pick).collect();
            let estimates: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
            let std_errs: Option<Vec<f64>> = rows.iter().map(|r| r.std_err).collect();
            cells.push(summarize(method, q, t, truth[h], &estimates, std_errs.as_deref(), config.estimator.alpha));
        }
    }
    let avg = |f: fn(&Replicate) -> f64| sum(ok.iter().map(f)) / ok.len() as f64;
    Ok(McReport {
        set: design.name().unwrap_or_else(|| "custom".into()),
        n,
        reps: config.reps,
        seed,
        misspecification: Misspecification::default(),
        quantiles: config.quantiles.clone(),
        horizons,
        true_ate: truth,
        oracle_reps: config.oracle_reps,
        failures,
        failure_messages,
        censored_fraction: avg(|r| r.censored),
        weak_fraction: avg(|r| r.weak),
        clamped_fraction: avg(|r| r.clamped),
        cells,
        replicates: config.keep_replicates.then(|| {
            ok.into_iter()
                .map(|r| ReplicateRecord {
                    index: r.index,
                    results: r.results,
                })
                .collect()
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_estimates_with_wide_intervals() {
        let c = summarize(Method::Onestep, 0.5, 1.0, 0.2, &[0.2, 0.2], Some(&[100.0, 100.0]), 0.05);
        assert_eq!(c.bias, 0.0);
        assert_eq!(c.rmse, 0.0);
        assert_eq!(c.coverage, 1.0);
    }

    #[test]
    fn sampling_sd_intervals() {
        let est = [0.1, 0.3, 0.2, 0.6];
        let c = summarize(Method::Plugin, 0.5, 1.0, 0.25, &est, None, 0.05);
        assert!((c.sd - sample_sd(&est)).abs() < 1e-15);
        assert!(c.rmse >= c.bias.abs());
        assert!((c.mean_ci_width - 2.0 * 1.959963984540054 * c.sd).abs() < 1e-7);
        assert_eq!(c.coverage, 1.0);
        assert!((c.mean_abs_bias - 0.15).abs() < 1e-15);
    }
}
