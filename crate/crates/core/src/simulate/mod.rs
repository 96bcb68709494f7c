//! Simulation designs with an unmeasured confounder, a potential-outcome
//! oracle for the true effect, and a Monte Carlo engine that reports bias,
//! RMSE and interval coverage per method and horizon.

mod dgp;
mod mc;
mod report;
mod truth;

pub use dgp::{generate, generate_with, Design, DesignSet, DgpSpec, LatentRecord, Misspecification, Simulated, COVARIATES};
pub use mc::{calibrate_horizons, run_design, run_mc, McCell, McConfig, McModels, McReport, ReplicateRecord};
pub use report::{read_report_csv, read_report_json, write_report_csv, write_report_json, McRow};
pub use truth::{true_ate, DEFAULT_ORACLE_REPS, ORACLE_SEED};
