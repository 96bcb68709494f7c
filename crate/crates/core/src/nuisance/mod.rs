//! The four nuisance functions: conditional CIF `F(t|z,x)`, censoring
//! survival `G(s|z,x)`, treatment probability `π(1|z,x)` and instrument
//! prevalence `γ(1|x)`.
//!
//! Cox and logistic learners ship in-crate. Anything implementing
//! [`SurvivalLearner`] or [`BinaryLearner`] can replace them.

mod bundle;
mod cox;
mod features;
mod folds;
mod logistic;
mod newton;
mod step;

use std::fmt::Debug;
use std::sync::Arc;

pub use bundle::{fit_bundle, CrossFitted, LearnerSpec, Learners, NuisanceBundle};
pub use cox::{fit_cox, predict_cif, predict_surv_censoring, CoxModel, CoxObjective, CoxOptions, EventKind};
pub use features::{Feature, FeatureMap, Profile};
pub use folds::{make_folds, FoldAssignment};
pub use logistic::{fit_logistic, predict_prob, BinaryTarget, LogisticModel, LogisticObjective, LogisticOptions};
pub use newton::NewtonOptions;
pub use step::StepFunction;

pub(crate) use logistic::expit;

use crate::dataset::Cohort;
use crate::error::Result;

/// A fitted conditional survival model.
pub trait SurvivalPredictor: Send + Sync + Debug {
    /// `Λ(· | profile)` as a right-continuous step function.
    fn cumulative_hazard(&self, profile: &Profile<'_>) -> StepFunction;

    fn cumulative_hazard_at(&self, profile: &Profile<'_>, t: f64) -> f64 {
        self.cumulative_hazard(profile).value(t)
    }

    fn cif(&self, profile: &Profile<'_>, t: f64) -> f64 {
        -(-self.cumulative_hazard_at(profile, t)).exp_m1()
    }
}

/// A fitted conditional probability `P(target = 1 | profile)`.
pub trait BinaryPredictor: Send + Sync + Debug {
    fn probability(&self, profile: &Profile<'_>) -> f64;
}

pub trait SurvivalLearner: Send + Sync + Debug {
    fn fit(&self, cohort: &Cohort, outcome: EventKind) -> Result<Arc<dyn SurvivalPredictor>>;
}

pub trait BinaryLearner: Send + Sync + Debug {
    fn fit(&self, cohort: &Cohort, target: BinaryTarget) -> Result<Arc<dyn BinaryPredictor>>;
}

impl SurvivalPredictor for CoxModel {
    fn cumulative_hazard(&self, profile: &Profile<'_>) -> StepFunction {
        CoxModel::cumulative_hazard(self, profile)
    }
    fn cumulative_hazard_at(&self, profile: &Profile<'_>, t: f64) -> f64 {
        CoxModel::cumulative_hazard_at(self, profile, t)
    }
}

impl BinaryPredictor for LogisticModel {
    fn probability(&self, profile: &Profile<'_>) -> f64 {
        LogisticModel::probability(self, profile)
    }
}

#[derive(Debug, Clone)]
pub struct CoxLearner {
    pub features: FeatureMap,
    pub options: CoxOptions,
}

impl CoxLearner {
    pub fn new(features: FeatureMap) -> Self {
        Self {
            features,
            options: CoxOptions::default(),
        }
    }
}

impl SurvivalLearner for CoxLearner {
    fn fit(&self, cohort: &Cohort, outcome: EventKind) -> Result<Arc<dyn SurvivalPredictor>> {
        Ok(Arc::new(fit_cox(cohort, &self.features, outcome, &self.options)?))
    }
}

#[derive(Debug, Clone)]
pub struct LogisticLearner {
    pub features: FeatureMap,
    pub options: LogisticOptions,
}

impl LogisticLearner {
    pub fn new(features: FeatureMap) -> Self {
        Self {
            features,
            options: LogisticOptions::default(),
        }
    }
}

impl BinaryLearner for LogisticLearner {
    fn fit(&self, cohort: &Cohort, target: BinaryTarget) -> Result<Arc<dyn BinaryPredictor>> {
        Ok(Arc::new(fit_logistic(cohort, &self.features, target, &self.options)?))
    }
}
