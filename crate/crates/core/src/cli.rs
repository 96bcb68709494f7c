//! The `ivsurv` command line: `estimate`, `simulate` and `build-iv`.
//!
//! Settings come from an optional TOML file (`--config`) and flags; a flag
//! always wins over the file. Data go to `--output` (or stdout), progress and
//! warnings to stderr. Exit codes: 0 success, 2 configuration error, 3 data
//! error, 4 estimation failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dataset::{build_preference_iv, event_time_quantile, load_cohort, load_encounters, write_cohort, Cohort, CohortSchema};
use crate::error::Error;
use crate::estimator::{eif_table, estimate_gformula, write_results_csv, AteResult, EstimatorOptions, Method};
use crate::nuisance::{fit_bundle, make_folds, CoxLearner, FeatureMap, LearnerSpec};
use crate::simulate::{run_mc, write_report_csv, write_report_json, DesignSet, DgpSpec, McConfig, Misspecification};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_ESTIMATION: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Everything a run can be configured with. Every field is optional in the
/// file; commands check for what they need.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub schema: CohortSchema,
    /// Working models; main effects on every covariate when absent.
    pub learners: Option<LearnerSpec>,
    /// Outcome features of the G-formula model; `a` plus every covariate when absent.
    pub gformula: Option<FeatureMap>,
    pub methods: Option<Vec<Method>>,
    pub horizons: Option<Vec<f64>>,
    pub quantiles: Option<Vec<f64>>,
    pub k_folds: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub estimator: EstimatorOptions,
    pub set: Option<DesignSet>,
    pub reps: Option<usize>,
    pub n: Option<usize>,
    pub scenario: Option<u8>,
    pub oracle_reps: Option<usize>,
    pub threshold: Option<f64>,
    pub min_patients: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(
    name = "ivsurv",
    version,
    about = "Instrumental-variable estimates of causal differences in cumulative incidence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate F¹(t) − F⁰(t) on a cohort CSV.
    Estimate(Flags),
    /// Monte Carlo study of a built-in simulation design.
    Simulate(Flags),
    /// Derive a provider-preference instrument from an encounters CSV.
    BuildIv(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// TOML file with run settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Defaults to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Comma-separated: plugin, onestep, gformula.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Comma-separated horizon times.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    /// Comma-separated quantiles of observed follow-up, used as horizons.
    #[arg(long, value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
    /// Cross-fitting folds.
    #[arg(long)]
    k_folds: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    set: Option<DesignSet>,
    /// Monte Carlo replicates.
    #[arg(long)]
    reps: Option<usize>,
    /// Simulated sample size.
    #[arg(long = "n")]
    n: Option<usize>,
    /// Set-2 misspecification scenario, 1-7.
    #[arg(long)]
    scenario: Option<u8>,
    /// Providers treating more than this fraction are high-preference.
    #[arg(long)]
    threshold: Option<f64>,
    /// Providers with fewer encounters are excluded.
    #[arg(long)]
    min_patients: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Data(Error),
    Estimation(Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Data(_) => EXIT_DATA,
            Failure::Estimation(_) => EXIT_ESTIMATION,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Data(e) => write!(f, "data error: {e}"),
            Failure::Estimation(e) => write!(f, "estimation failed: {e}"),
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn config_err(m: impl Into<String>) -> Failure {
    Failure::Config(m.into())
}

/// Errors while reading input are data errors; later ones are estimation errors.
fn loading(e: Error) -> Failure {
    if e.is_data_error() {
        Failure::Data(e)
    } else {
        Failure::Config(e.to_string())
    }
}

fn estimating(e: Error) -> Failure {
    if e.is_data_error() {
        Failure::Data(e)
    } else {
        Failure::Estimation(e)
    }
}

/// Parse `args` (program name first), run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Estimate(f) => resolve(f).and_then(|c| cmd_estimate(&c)),
        Command::Simulate(f) => resolve(f).and_then(|c| cmd_simulate(&c)),
        Command::BuildIv(f) => resolve(f).and_then(|c| cmd_build_iv(&c)),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("ivsurv: {f}");
            f.code()
        }
    }
}

fn read_config(path: &Path) -> Outcome<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// File settings overridden by flags.
fn resolve(f: Flags) -> Outcome<RunConfig> {
    let mut c = match &f.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    macro_rules! over {
        ($($field:ident),*) => { $( if f.$field.is_some() { c.$field = f.$field; } )* };
    }
    over!(
        input,
        output,
        format,
        methods,
        horizons,
        quantiles,
        k_folds,
        seed,
        workers,
        set,
        reps,
        n,
        scenario,
        threshold,
        min_patients
    );
    if let Some(a) = f.alpha {
        c.estimator.alpha = a;
    }
    Ok(c)
}

fn format_for(c: &RunConfig, default: Format) -> Format {
    c.format
        .unwrap_or_else(|| match c.output.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            Some("csv") => Format::Csv,
            _ => default,
        })
}

fn write_output(c: &RunConfig, body: impl FnOnce(&mut dyn Write) -> crate::Result<()>) -> Outcome {
    let io_err = |e: io::Error| Failure::Data(Error::io(c.output.clone().unwrap_or_else(|| "<stdout>".into()), e));
    match &c.output {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(io_err)?);
            body(&mut w).map_err(estimating)?;
            w.flush().map_err(io_err)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).map_err(estimating)?;
            w.flush().map_err(io_err)
        }
    }
}

fn check_k(c: &RunConfig) -> Outcome {
    match c.k_folds {
        Some(k) if k < 2 => Err(config_err("K must be ≥ 2 or omitted")),
        _ => Ok(()),
    }
}

fn horizons_for(c: &RunConfig, cohort: &Cohort) -> Outcome<Vec<f64>> {
    match (&c.horizons, &c.quantiles) {
        (Some(_), Some(_)) => Err(config_err("give either horizons or quantiles, not both")),
        (Some(h), None) if !h.is_empty() => Ok(h.clone()),
        (None, Some(q)) if !q.is_empty() => q
            .iter()
            .map(|&q| event_time_quantile(cohort, q))
            .collect::<crate::Result<_>>()
            .map_err(|e| config_err(e.to_string())),
        _ => Err(config_err("estimate needs horizons or quantiles")),
    }
}

fn cmd_estimate(c: &RunConfig) -> Outcome {
    check_k(c)?;
    c.estimator.validate().map_err(|e| config_err(e.to_string()))?;
    let methods = c.methods.clone().unwrap_or_else(|| vec![Method::Onestep]);
    if methods.is_empty() {
        return Err(config_err("no methods requested"));
    }
    let input = c.input.as_ref().ok_or_else(|| config_err("estimate needs --input"))?;
    let cohort = load_cohort(input, &c.schema).map_err(loading)?;
    let horizons = horizons_for(c, &cohort)?;
    let spec = c.learners.clone().unwrap_or_else(|| LearnerSpec::main_effects(cohort.p()));
    spec.validate(cohort.p()).map_err(|e| config_err(e.to_string()))?;
    log::info!("{} subjects, {} covariates, horizons {:?}", cohort.len(), cohort.p(), horizons);

    let mut results: Vec<AteResult> = Vec::new();
    if methods.contains(&Method::Plugin) || methods.contains(&Method::Onestep) {
        let folds = c
            .k_folds
            .map(|k| make_folds(cohort.len(), k, c.seed.unwrap_or(0)))
            .transpose()
            .map_err(|e| config_err(e.to_string()))?;
        let fitted = fit_bundle(&cohort, &spec.learners(), folds.as_ref()).map_err(estimating)?;
        let table = eif_table(&cohort, &fitted, &horizons, &c.estimator).map_err(estimating)?;
        if table.weak_fraction() > 0.0 {
            log::warn!("{:.1}% of subjects had their Wald denominator truncated", 100.0 * table.weak_fraction());
        }
        for &m in &methods {
            match m {
                Method::Plugin => results.extend(table.plugin()),
                Method::Onestep => results.extend(table.onestep(c.estimator.alpha).map_err(estimating)?.into_iter().map(|(r, _)| r)),
                Method::Gformula => {}
            }
        }
    }
    if methods.contains(&Method::Gformula) {
        let mut learner = CoxLearner::new(c.gformula.clone().unwrap_or_else(|| FeatureMap::treatment_and_covariates(cohort.p())));
        learner.options = spec.cox;
        results.extend(estimate_gformula(&cohort, &horizons, &learner).map_err(estimating)?);
    }
    for r in &results {
        log::info!(
            "{} t={}: {:.6} (clipped {:.2}%)",
            r.method,
            r.horizon,
            r.estimate,
            100.0 * r.clipped_fraction
        );
    }
    match format_for(c, Format::Csv) {
        Format::Csv => write_output(c, |w| write_results_csv(w, &results)),
        Format::Json => write_output(c, |w| {
            serde_json::to_writer_pretty(&mut *w, &results)?;
            writeln!(w).map_err(|e| Error::io("<output>", e))
        }),
    }
}

fn cmd_simulate(c: &RunConfig) -> Outcome {
    check_k(c)?;
    let set = c.set.ok_or_else(|| config_err("simulate needs --set"))?;
    let misspecification = match c.scenario {
        Some(id) if set != DesignSet::Set2 => return Err(config_err(format!("scenario {id} applies only to set2"))),
        Some(id) => Misspecification::scenario(id).map_err(|e| config_err(e.to_string()))?,
        None => Misspecification::default(),
    };
    let defaults = McConfig::default();
    let mut estimator = defaults.estimator;
    estimator.alpha = c.estimator.alpha;
    let mc = McConfig {
        methods: c.methods.clone().unwrap_or(defaults.methods),
        reps: c.reps.unwrap_or(defaults.reps),
        quantiles: c.quantiles.clone().unwrap_or(defaults.quantiles),
        workers: c.workers.unwrap_or(defaults.workers),
        oracle_reps: c.oracle_reps.unwrap_or(defaults.oracle_reps),
        k_folds: c.k_folds,
        estimator,
        keep_replicates: false,
    };
    let spec = DgpSpec {
        set,
        n: c.n.unwrap_or(1000),
        misspecification,
        seed: c.seed.unwrap_or(1),
    };
    log::info!("{set}: n = {}, B = {}, seed {}", spec.n, mc.reps, spec.seed);
    let report = run_mc(&spec, &mc).map_err(|e| match e {
        Error::InvalidArgument(m) => Failure::Config(m),
        e => Failure::Estimation(e),
    })?;
    log::info!(
        "{} failures, {:.1}% censored, {:.2}% truncated denominators",
        report.failures,
        100.0 * report.censored_fraction,
        100.0 * report.weak_fraction
    );
    match format_for(c, Format::Json) {
        Format::Json => write_output(c, |w| {
            write_report_json(&mut *w, &report)?;
            writeln!(w).map_err(|e| Error::io("<output>", e))
        }),
        Format::Csv => write_output(c, |w| write_report_csv(w, &report)),
    }
}

fn cmd_build_iv(c: &RunConfig) -> Outcome {
    let threshold = c.threshold.unwrap_or(0.5);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(config_err("threshold must be in (0,1)"));
    }
    let input = c.input.as_ref().ok_or_else(|| config_err("build-iv needs --input"))?;
    let encounters = load_encounters(input, &c.schema).map_err(loading)?;
    let (cohort, assignment) = build_preference_iv(&encounters, threshold, c.min_patients.unwrap_or(1)).map_err(|e| match e {
        Error::InvalidArgument(m) => Failure::Config(m),
        e => Failure::Data(e),
    })?;
    eprintln!("{:<16} {:>6} {:>9}  level", "provider", "n", "treated");
    for p in &assignment.providers {
        let level = match p.high_preference {
            Some(true) => "1",
            Some(false) => "0",
            None => "excluded",
        };
        eprintln!("{:<16} {:>6} {:>9.3}  {level}", p.provider_id, p.n, p.fraction_treated);
    }
    eprintln!("{} rows excluded", assignment.excluded_rows);
    write_output(c, |w| write_cohort(&cohort, w))
}
