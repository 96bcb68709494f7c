use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous, piecewise-constant function that is zero before its
/// first knot and jumps only at knots.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// Build from strictly increasing knots and the value on `[knot_k, knot_{k+1})`.
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::invalid("step function: knots and values differ in length"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("step function: knots must be strictly increasing"));
        }
        Ok(Self { knots, values })
    }

    /// Cumulative sum of `increments`, jumping at `knots`.
    pub fn from_increments(knots: Vec<f64>, increments: &[f64]) -> Result<Self> {
        let mut acc = 0.0;
        let values = increments
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect();
        Self::new(knots, values)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Value at `t` (right-continuous).
    pub fn value(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&k| k <= t) {
            0 => 0.0,
            i => self.values[i - 1],
        }
    }

    /// Limit from the left at `t`, excluding any jump at `t` itself.
    pub fn left_limit(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&k| k < t) {
            0 => 0.0,
            i => self.values[i - 1],
        }
    }

    /// Jump sizes at each knot.
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().scan(0.0, |prev, &v| {
            let d = v - *prev;
            *prev = v;
            Some(d)
        })
    }

    /// Pointwise multiple `c * f`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Left limits at each of an ascending sequence of points, in one merge pass.
    pub fn left_limits_sorted<'a>(&'a self, points: impl IntoIterator<Item = f64> + 'a) -> impl Iterator<Item = f64> + 'a {
        let mut idx = 0;
        points.into_iter().map(move |t| {
            while idx < self.knots.len() && self.knots[idx] < t {
                idx += 1;
            }
            if idx == 0 {
                0.0
            } else {
                self.values[idx - 1]
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn right_continuity_and_left_limits() {
        let f = StepFunction::from_increments(vec![1.0, 2.0], &[0.5, 0.1]).unwrap();
        assert_eq!(f.value(0.0), 0.0);
        assert_eq!(f.value(0.999), 0.0);
        assert_eq!(f.value(1.0), 0.5);
        assert_eq!(f.left_limit(1.0), 0.0);
        assert_eq!(f.left_limit(2.0), 0.5);
        assert!((f.value(2.0) - 0.6).abs() < 1e-15);
        assert!((f.value(100.0) - 0.6).abs() < 1e-15);
        let inc: Vec<f64> = f.increments().collect();
        assert!((inc[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(StepFunction::new(vec![2.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(StepFunction::new(vec![1.0, 1.0], vec![0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn merged_left_limits_match_pointwise(
            incs in proptest::collection::vec(0.0f64..1.0, 1..20),
            mut pts in proptest::collection::vec(0.0f64..25.0, 0..30),
        ) {
            let knots: Vec<f64> = (1..=incs.len()).map(|k| k as f64).collect();
            let f = StepFunction::from_increments(knots, &incs).unwrap();
            pts.sort_by(f64::total_cmp);
            let merged: Vec<f64> = f.left_limits_sorted(pts.iter().copied()).collect();
            for (p, m) in pts.iter().zip(&merged) {
                prop_assert_eq!(*m, f.left_limit(*p));
            }
        }
    }
}
