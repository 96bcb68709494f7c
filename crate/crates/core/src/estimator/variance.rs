use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{normal_quantile, sum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldInterval {
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// `σ̂² = mean(D²)`, `se = σ̂ / √n`, interval `estimate ± z_{1−α/2} · se`.
pub fn variance_ci(eif: &[f64], estimate: f64, n: usize, alpha: f64) -> Result<WaldInterval> {
    if n < 2 || eif.is_empty() {
        return Err(Error::invalid("variance needs at least 2 subjects"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must be in (0,1)"));
    }
    let sigma2 = sum(eif.iter().map(|d| d * d)) / eif.len() as f64;
    if sigma2 == 0.0 {
        log::warn!("influence function values are identical; standard error is 0");
    }
    let std_err = (sigma2 / n as f64).sqrt();
    let z = normal_quantile(1.0 - alpha / 2.0);
    Ok(WaldInterval {
        std_err,
        ci_low: estimate - z * std_err,
        ci_high: estimate + z * std_err,
    })
}
