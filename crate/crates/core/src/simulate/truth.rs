use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::dgp::{draw_covariates, Design};
use crate::error::{Error, Result};

/// Seed of the oracle stream; independent of any replicate seed.
pub const ORACLE_SEED: u64 = 0x5e_ed0f_7247;

pub const DEFAULT_ORACLE_REPS: usize = 1_000_000;

type Key = (String, Vec<u64>, usize);

fn cache() -> &'static Mutex<HashMap<Key, Vec<f64>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Vec<f64>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// `F¹(t) − F⁰(t)` at each horizon from `reps` draws of `(X, U)` with both
/// potential event times generated from one exponential variate.
/// Results for named designs are cached.
pub fn true_ate(design: &dyn Design, horizons: &[f64], reps: usize) -> Result<Vec<f64>> {
    if reps < 100_000 {
        return Err(Error::invalid("oracle needs at least 100000 draws"));
    }
    let key = design
        .name()
        .map(|name| (name, horizons.iter().map(|t| t.to_bits()).collect::<Vec<_>>(), reps));
    if let Some(k) = &key {
        if let Some(v) = cache().lock().unwrap().get(k) {
            return Ok(v.clone());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    // Per horizon: #{T¹ ≤ t} − #{T⁰ ≤ t}.
    let mut diff = vec![0i64; horizons.len()];
    for _ in 0..reps {
        let (x, u) = draw_covariates(&mut rng);
        let e: f64 = rng.sample(Exp1);
        let t0 = design.event_mean(&x, false, u) * e;
        let t1 = design.event_mean(&x, true, u) * e;
        for (d, &t) in diff.iter_mut().zip(horizons) {
            *d += (t1 <= t) as i64 - (t0 <= t) as i64;
        }
    }
    let value: Vec<f64> = diff.iter().map(|&d| d as f64 / reps as f64).collect();
    if let Some(k) = key {
        cache().lock().unwrap().insert(k, value.clone());
    }
    Ok(value)
}
