#![allow(dead_code)]

use ivsurv::dataset::{Cohort, ObservedRecord};
use ivsurv::nuisance::{NuisanceBundle, Profile};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central differences with step `h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, beta: &[f64], h: f64) -> Vec<f64> {
    (0..beta.len())
        .map(|j| {
            let mut up = beta.to_vec();
            let mut down = beta.to_vec();
            up[j] += h;
            down[j] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / ‖b‖`
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

/// Small cohort with `p` covariates, some tied times and both arms populated.
pub fn random_cohort(seed: u64, n: usize, p: usize) -> Cohort {
    let mut r = rng(seed);
    let records = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
            let z = i % 2 == 0;
            let a = r.random::<f64>() < 0.3 + 0.4 * z as u8 as f64 + 0.1 * x[0];
            let rate = (0.5 * x[0] - 0.7 * a as u8 as f64).exp();
            let t = (-r.random::<f64>().ln() / rate * 20.0).ceil() / 20.0;
            let c = -r.random::<f64>().ln() * 2.0;
            ObservedRecord::new(t.min(c), t <= c, a, z, x)
        })
        .collect();
    Cohort::new(records).unwrap()
}

/// Nelson–Aalen cumulative hazard at each distinct event time.
pub fn nelson_aalen(times: &[f64], events: &[bool]) -> Vec<(f64, f64)> {
    let mut distinct: Vec<f64> = times.iter().zip(events).filter(|(_, &e)| e).map(|(&t, _)| t).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut acc = 0.0;
    distinct
        .into_iter()
        .map(|s| {
            let d = times.iter().zip(events).filter(|(&t, &e)| e && t == s).count() as f64;
            let y = times.iter().filter(|&&t| t >= s).count() as f64;
            acc += d / y;
            (s, acc)
        })
        .collect()
}

/// Uncentered one-step summands at horizon `t`, by a flat loop over
/// subjects and every distinct observed event time. Nuisances are only
/// queried pointwise; left limits are read just below each grid time.
pub fn brute_force_summands(cohort: &Cohort, bundle: &NuisanceBundle, t: f64) -> Vec<f64> {
    brute_force_on_grid(cohort, cohort, bundle, t)
}

/// As [`brute_force_summands`], with the time grid taken from `grid_from`.
pub fn brute_force_on_grid(cohort: &Cohort, grid_from: &Cohort, bundle: &NuisanceBundle, t: f64) -> Vec<f64> {
    let records = cohort.records();
    let mut grid: Vec<f64> = grid_from.records().iter().filter(|r| r.event).map(|r| r.time).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut all_times: Vec<f64> = grid_from.records().iter().chain(records).map(|r| r.time).collect();
    all_times.sort_by(f64::total_cmp);
    all_times.dedup();
    let min_gap = all_times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let eps = min_gap * 1e-3;

    let mut out = Vec::new();
    for r in records {
        let own = Profile {
            instrument: r.instrument,
            treatment: r.treatment,
            covariates: &r.covariates,
        };
        let gamma1 = bundle.prevalence.probability(&own);
        let weight = if r.instrument { 1.0 / gamma1 } else { -1.0 / (1.0 - gamma1) };
        let lam = |s: f64| bundle.cif.cumulative_hazard_at(&own, s);
        let lam_c = |s: f64| bundle.censoring.cumulative_hazard_at(&own, s);

        let mut integral = 0.0;
        for (j, &s) in grid.iter().enumerate() {
            if s > t {
                break;
            }
            let prev = if j == 0 { 0.0 } else { grid[j - 1] };
            let d_lambda = lam(s) - if j == 0 { 0.0 } else { lam(prev) };
            let d_n = if r.event && r.time == s { 1.0 } else { 0.0 };
            let at_risk = if r.time >= s { 1.0 } else { 0.0 };
            let surv_left = (-lam(s - eps)).exp();
            let cens_left = (-lam_c(s - eps)).exp();
            integral += (d_n - at_risk * d_lambda) / (surv_left * cens_left);
        }
        let dr = weight * (-lam(t)).exp() * integral;

        let pi = bundle.propensity.probability(&own);
        let da = weight * (r.treatment as u8 as f64 - pi);
        let p1 = bundle.propensity.probability(&Profile { instrument: true, ..own });
        let p0 = bundle.propensity.probability(&Profile { instrument: false, ..own });
        let f1 = 1.0 - (-bundle.cif.cumulative_hazard_at(&Profile { instrument: true, ..own }, t)).exp();
        let f0 = 1.0 - (-bundle.cif.cumulative_hazard_at(&Profile { instrument: false, ..own }, t)).exp();
        let psi_a = p1 - p0;
        let psi = (f1 - f0) / psi_a;
        out.push(psi + dr / psi_a - psi * da / psi_a);
    }
    out
}
