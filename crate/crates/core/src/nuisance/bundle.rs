use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    BinaryLearner, BinaryPredictor, BinaryTarget, CoxLearner, CoxOptions, EventKind, Feature, FeatureMap, FoldAssignment, LogisticLearner,
    LogisticOptions, SurvivalLearner, SurvivalPredictor,
};
use crate::dataset::Cohort;
use crate::error::{Error, Result};

/// Feature maps for the in-crate Cox and logistic learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    /// CIF model `F(t | z, x)`.
    pub outcome: FeatureMap,
    /// Censoring model `G(s | z, x)`. May use `a` for an `(x, a)`-conditioned model.
    pub censoring: FeatureMap,
    /// Treatment model `π(1 | z, x)`.
    pub propensity: FeatureMap,
    /// Instrument model `γ(1 | x)`.
    pub prevalence: FeatureMap,
    #[serde(default)]
    pub cox: CoxOptions,
    #[serde(default)]
    pub logistic: LogisticOptions,
}

impl LearnerSpec {
    /// Main-effects models on all `p` covariates.
    pub fn main_effects(p: usize) -> Self {
        Self {
            outcome: FeatureMap::instrument_and_covariates(p),
            censoring: FeatureMap::instrument_and_covariates(p),
            propensity: FeatureMap::instrument_and_covariates(p),
            prevalence: FeatureMap::covariates(p),
            cox: CoxOptions::default(),
            logistic: LogisticOptions::default(),
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        for (name, map) in [
            ("outcome", &self.outcome),
            ("censoring", &self.censoring),
            ("propensity", &self.propensity),
            ("prevalence", &self.prevalence),
        ] {
            map.check_dimension(p).map_err(|e| Error::invalid(format!("{name} model: {e}")))?;
        }
        if self.outcome.contains(Feature::Treatment) || self.propensity.contains(Feature::Treatment) {
            return Err(Error::invalid("outcome and propensity models condition on (z, x) only; remove `a`"));
        }
        if self.prevalence.contains(Feature::Instrument) || self.prevalence.contains(Feature::Treatment) {
            return Err(Error::invalid("prevalence model conditions on x only"));
        }
        Ok(())
    }

    pub fn learners(&self) -> Learners {
        Learners {
            outcome: Arc::new(CoxLearner {
                features: self.outcome.clone(),
                options: self.cox,
            }),
            censoring: Arc::new(CoxLearner {
                features: self.censoring.clone(),
                options: self.cox,
            }),
            propensity: Arc::new(LogisticLearner {
                features: self.propensity.clone(),
                options: self.logistic,
            }),
            prevalence: Arc::new(LogisticLearner {
                features: self.prevalence.clone(),
                options: self.logistic,
            }),
        }
    }
}

/// One learner per nuisance function.
#[derive(Debug, Clone)]
pub struct Learners {
    pub outcome: Arc<dyn SurvivalLearner>,
    pub censoring: Arc<dyn SurvivalLearner>,
    pub propensity: Arc<dyn BinaryLearner>,
    pub prevalence: Arc<dyn BinaryLearner>,
}

/// The four fitted nuisance functions.
#[derive(Debug, Clone)]
pub struct NuisanceBundle {
    pub cif: Arc<dyn SurvivalPredictor>,
    pub censoring: Arc<dyn SurvivalPredictor>,
    pub propensity: Arc<dyn BinaryPredictor>,
    pub prevalence: Arc<dyn BinaryPredictor>,
}

impl NuisanceBundle {
    pub fn fit(cohort: &Cohort, learners: &Learners) -> Result<Self> {
        Ok(Self {
            cif: learners.outcome.fit(cohort, EventKind::Failure)?,
            censoring: learners.censoring.fit(cohort, EventKind::Censoring)?,
            propensity: learners.propensity.fit(cohort, BinaryTarget::Treatment)?,
            prevalence: learners.prevalence.fit(cohort, BinaryTarget::Instrument)?,
        })
    }
}

/// Per-subject access to nuisance predictions: one bundle for everybody,
/// or with cross-fitting the bundle trained without the subject's fold.
#[derive(Debug, Clone)]
pub struct CrossFitted {
    bundles: Vec<NuisanceBundle>,
    folds: Option<FoldAssignment>,
}

impl CrossFitted {
    pub fn single(bundle: NuisanceBundle) -> Self {
        Self {
            bundles: vec![bundle],
            folds: None,
        }
    }

    /// Assemble from one bundle per fold (bundle `k` must exclude fold `k`).
    pub fn from_folds(bundles: Vec<NuisanceBundle>, folds: FoldAssignment) -> Result<Self> {
        if bundles.len() != folds.k() {
            return Err(Error::invalid("need exactly one bundle per fold"));
        }
        Ok(Self { bundles, folds: Some(folds) })
    }

    pub fn for_subject(&self, i: usize) -> &NuisanceBundle {
        match &self.folds {
            Some(f) => &self.bundles[f.fold_of(i)],
            None => &self.bundles[0],
        }
    }

    pub fn folds(&self) -> Option<&FoldAssignment> {
        self.folds.as_ref()
    }

    pub fn bundles(&self) -> &[NuisanceBundle] {
        &self.bundles
    }
}

/// Fit nuisance functions, optionally cross-fitted across `folds`.
pub fn fit_bundle(cohort: &Cohort, learners: &Learners, folds: Option<&FoldAssignment>) -> Result<CrossFitted> {
    let Some(folds) = folds else {
        return Ok(CrossFitted::single(NuisanceBundle::fit(cohort, learners)?));
    };
    if folds.len() != cohort.len() {
        return Err(Error::invalid(format!(
            "fold assignment covers {} subjects, cohort has {}",
            folds.len(),
            cohort.len()
        )));
    }
    let bundles = (0..folds.k())
        .into_par_iter()
        .map(|f| {
            let annotate = |e: Error| Error::Fold {
                fold: f,
                source: Box::new(e),
            };
            let train = cohort.subset(&folds.complement(f)).map_err(annotate)?;
            NuisanceBundle::fit(&train, learners).map_err(annotate)
        })
        .collect::<Result<Vec<_>>>()?;
    CrossFitted::from_folds(bundles, folds.clone())
}
