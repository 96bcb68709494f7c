use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Cohort, ObservedRecord};
use crate::error::{Error, Result};
use crate::nuisance::expit;

/// Number of baseline covariates every design draws.
pub const COVARIATES: usize = 4;

/// A data-generating process over `X1, X2 ~ U(−1,1)`, `X3, X4 ~ N(0,1)` and
/// an unmeasured confounder `U ~ U(0,1)`. Event and censoring times are
/// exponential with the returned means.
pub trait Design: Send + Sync + fmt::Debug {
    /// `P(Z = 1 | x)`.
    fn instrument_prob(&self, x: &[f64; COVARIATES]) -> f64;
    /// `P(A = 1 | z, x, u)` before clamping to `[0, 1]`.
    fn treatment_prob(&self, x: &[f64; COVARIATES], z: bool, u: f64) -> f64;
    fn event_mean(&self, x: &[f64; COVARIATES], a: bool, u: f64) -> f64;
    fn censoring_mean(&self, x: &[f64; COVARIATES], a: bool) -> f64;

    /// Identifies the design in reports and the truth cache. Designs without
    /// a name are never cached.
    fn name(&self) -> Option<String> {
        None
    }
}

/// The built-in designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignSet {
    /// Binary instrument, weak unmeasured confounding.
    Set1Weak,
    /// Binary instrument, strong unmeasured confounding.
    Set1Strong,
    /// The double-robustness design (used with misspecified working models).
    Set2,
    /// Nonlinear design where main-effects working models are all wrong.
    Set3,
}

impl DesignSet {
    pub const ALL: [DesignSet; 4] = [DesignSet::Set1Weak, DesignSet::Set1Strong, DesignSet::Set2, DesignSet::Set3];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignSet::Set1Weak => "set1_weak",
            DesignSet::Set1Strong => "set1_strong",
            DesignSet::Set2 => "set2",
            DesignSet::Set3 => "set3",
        }
    }
}

impl fmt::Display for DesignSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown simulation set `{s}` (expected set1_weak, set1_strong, set2 or set3)")))
    }
}

fn b(v: bool) -> f64 {
    v as u8 as f64
}

impl Design for DesignSet {
    fn instrument_prob(&self, x: &[f64; COVARIATES]) -> f64 {
        let [x1, x2, x3, x4] = *x;
        expit(match self {
            DesignSet::Set1Weak | DesignSet::Set1Strong => 0.4 * x1 - 0.3 * x2 - 0.1 * x3 - 0.2 * x4,
            DesignSet::Set2 => 0.2 * x1 - 0.8 * x2 + 0.2 * x3 + 0.1 * x4,
            DesignSet::Set3 => 0.4 * x1 * x2 - 0.8 * x2.powi(3) + 0.15 * x3 * x1 + 0.15 * x4.sin() + 0.4,
        })
    }

    fn treatment_prob(&self, x: &[f64; COVARIATES], z: bool, u: f64) -> f64 {
        let [x1, x2, x3, x4] = *x;
        let z = b(z);
        match self {
            DesignSet::Set1Weak => {
                1.0 / (1.0 + 0.1 * (-5.0 * (-x1 - 2.0 * x2 + 0.5 * x3 - 2.0 * x4)).exp()) + 0.855 * (z - 0.5) + 0.045 * (u - 0.5) + 0.45
            }
            DesignSet::Set1Strong => {
                1.0 / (1.0 + 0.1 * (-5.0 * (-x1 - 2.0 * x2 + 0.5 * x3 - 2.0 * x4)).exp()) + 0.63 * (z - 0.5) + 0.07 * (u - 0.5) + 0.45
            }
            DesignSet::Set2 => {
                1.0 / (1.0 + 0.3 * (-5.0 * (0.5 * x1 - 2.8 * x2 + 0.5 * x3 + 0.1 * x4)).exp()) + 0.63 * (z - 0.5) + 0.07 * (u - 0.5) + 0.35
            }
            DesignSet::Set3 => {
                1.0 / (1.0 + 0.15 * (-5.0 * (-x1 * x2 - 2.0 * x2.powi(3) + 0.75 * x1 * x3 + 0.15 * x4.sin())).exp())
                    + 0.64 * (z - 0.5)
                    + 0.32 * (u - 0.3).powi(2)
                    + 0.24
            }
        }
    }

    fn event_mean(&self, x: &[f64; COVARIATES], a: bool, u: f64) -> f64 {
        let [x1, x2, x3, x4] = *x;
        let a = b(a);
        match self {
            DesignSet::Set1Weak => 0.1 * (-0.2 * x1 + 0.4 * x2 - 0.6 * x3 + 0.4 * x4 - 0.5 * a + 0.6 * u).exp(),
            DesignSet::Set1Strong => 0.1 * (-0.1 * x1 + 0.3 * x2 + 0.1 * x3 - 0.1 * x4 - 2.0 * a + 4.0 * u).exp(),
            DesignSet::Set2 => 0.1 * (0.1 * x1 + 0.45 * x2 - 0.15 * x3 + 0.05 * x4 - 1.5 * a - 0.4 * u).exp(),
            DesignSet::Set3 => 0.2 * (0.8 * x1 * x2 + 2.0 * x2.powi(3) - 1.5 * x1 * x3 - 0.3 * x4.sin() + 1.5 * a - (-6.0 * u).sin() - 1.0).exp(),
        }
    }

    fn censoring_mean(&self, x: &[f64; COVARIATES], a: bool) -> f64 {
        let [x1, x2, x3, x4] = *x;
        let a = b(a);
        match self {
            DesignSet::Set1Weak => 0.05 * (-0.5 * x1 + 1.5 * x2 + 0.1 * x3 - 0.5 * x4 - 1.5 * a).exp(),
            DesignSet::Set1Strong => 0.1 * (-0.5 * x1 + 1.5 * x2 + 0.1 * x3 - 0.5 * x4 - 0.5 * a).exp(),
            DesignSet::Set2 => 0.5 * (0.1 * x1 - 0.5 * x2 + 0.1 * x3 + 0.05 * x4 + 0.5 * a).exp(),
            DesignSet::Set3 => 0.02 * (-0.8 * x1 * x2 - 2.4 * x2.powi(3) + 0.6 * x1 * x3 - 0.3 * x4.sin() + 0.5 * a).exp(),
        }
    }

    fn name(&self) -> Option<String> {
        Some(self.as_str().to_string())
    }
}

/// Which working models a Set-2 analysis deliberately gets wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Misspecification {
    pub outcome: bool,
    pub treatment: bool,
    pub censoring: bool,
    pub instrument: bool,
}

impl Misspecification {
    /// Scenarios 1–7: none, outcome, treatment, censoring, instrument,
    /// outcome + treatment, censoring + instrument.
    pub fn scenario(id: u8) -> Result<Self> {
        let m = |outcome, treatment, censoring, instrument| Self {
            outcome,
            treatment,
            censoring,
            instrument,
        };
        Ok(match id {
            1 => m(false, false, false, false),
            2 => m(true, false, false, false),
            3 => m(false, true, false, false),
            4 => m(false, false, true, false),
            5 => m(false, false, false, true),
            6 => m(true, true, false, false),
            7 => m(false, false, true, true),
            _ => return Err(Error::invalid(format!("scenario must be between 1 and 7, got {id}"))),
        })
    }

    pub fn any(&self) -> bool {
        self.outcome || self.treatment || self.censoring || self.instrument
    }
}

/// What to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub set: DesignSet,
    pub n: usize,
    #[serde(default)]
    pub misspecification: Misspecification,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(set: DesignSet, n: usize, seed: u64) -> Self {
        Self {
            set,
            n,
            misspecification: Misspecification::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.misspecification.any() && self.set != DesignSet::Set2 {
            return Err(Error::invalid("misspecification scenarios apply only to set2"));
        }
        if self.n < 2 {
            return Err(Error::invalid("n must be at least 2"));
        }
        Ok(())
    }
}

/// Unobserved quantities behind one simulated subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub u: f64,
    /// Potential event times under `A = 0` and `A = 1`.
    pub potential: [f64; 2],
    pub event_time: f64,
    pub censoring_time: f64,
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub cohort: Cohort,
    pub latent: Vec<LatentRecord>,
    /// Subjects whose treatment probability fell outside `[0, 1]`.
    pub clamped: usize,
}

pub(crate) fn draw_covariates<R: Rng>(rng: &mut R) -> ([f64; COVARIATES], f64) {
    let x = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ];
    (x, rng.random())
}

/// Draw `n` subjects. Both potential event times share one unit exponential
/// variate, so `T^a = μ(x, a, u) · E`.
pub fn generate_with<R: Rng>(design: &dyn Design, n: usize, rng: &mut R) -> Result<Simulated> {
    let mut records = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    let mut clamped = 0;
    for _ in 0..n {
        let (x, u) = draw_covariates(rng);
        let z = rng.random::<f64>() < design.instrument_prob(&x);
        let p = design.treatment_prob(&x, z, u);
        if !(0.0..=1.0).contains(&p) {
            clamped += 1;
        }
        let a = rng.random::<f64>() < p.clamp(0.0, 1.0);
        let e: f64 = rng.sample(Exp1);
        let potential = [design.event_mean(&x, false, u) * e, design.event_mean(&x, true, u) * e];
        let t = potential[a as usize];
        let c = design.censoring_mean(&x, a) * rng.sample::<f64, _>(Exp1);
        records.push(ObservedRecord::new(t.min(c), t <= c, a, z, x.to_vec()));
        latent.push(LatentRecord {
            u,
            potential,
            event_time: t,
            censoring_time: c,
        });
    }
    if clamped > 0 {
        log::debug!("{clamped} of {n} treatment probabilities clamped to [0, 1]");
    }
    Ok(Simulated {
        cohort: Cohort::new(records)?,
        latent,
        clamped,
    })
}

pub fn generate(spec: &DgpSpec) -> Result<Simulated> {
    spec.validate()?;
    generate_with(&spec.set, spec.n, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}
