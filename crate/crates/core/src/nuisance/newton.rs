//! Damped Newton ascent shared by the Cox and logistic fitters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A concave objective with analytic gradient and negative Hessian.
pub(crate) trait Concave {
    fn value(&self, beta: &[f64]) -> f64;
    /// `(value, gradient, information = -Hessian)`
    fn derivatives(&self, beta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub gradient_tolerance: f64,
    /// Any |coefficient| beyond this is treated as divergence.
    pub coefficient_bound: f64,
}

impl NewtonOptions {
    pub const fn with_tolerance(gradient_tolerance: f64) -> Self {
        Self {
            max_iterations: 100,
            max_halvings: 30,
            gradient_tolerance,
            coefficient_bound: 50.0,
        }
    }
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self::with_tolerance(1e-8)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Optimum {
    pub beta: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum NewtonFailure {
    NonConvergence { iterations: usize, gradient_norm: f64 },
    Diverging { index: usize },
    Singular,
}

fn argmax_abs(v: impl IntoIterator<Item = f64>) -> usize {
    v.into_iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) })
        .0
}

fn solve(info: DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    info.cholesky().map(|c| c.solve(grad))
}

/// Maximize from `start`. A gradient that vanishes while the Newton step
/// stays large means the supremum is at infinity (monotone likelihood or
/// separation) and is reported as divergence.
pub(crate) fn maximize<F: Concave>(f: &F, start: Vec<f64>, opts: &NewtonOptions) -> Result<Optimum, NewtonFailure> {
    let mut beta = start;
    let (mut value, mut grad, mut info) = f.derivatives(&beta);
    let diverging = |beta: &[f64]| beta.iter().any(|b| b.abs() > opts.coefficient_bound);

    for iteration in 0..=opts.max_iterations {
        let step = solve(info.clone(), &grad);
        if grad.norm() < opts.gradient_tolerance {
            return match step {
                Some(s) if s.amax() > 1e-3 => Err(NewtonFailure::Diverging {
                    index: argmax_abs(s.iter().copied()),
                }),
                None if beta.iter().any(|b| b.abs() > 10.0) => Err(NewtonFailure::Diverging {
                    index: argmax_abs(beta.iter().copied()),
                }),
                _ => Ok(Optimum {
                    beta,
                    value,
                    iterations: iteration,
                }),
            };
        }
        if iteration == opts.max_iterations {
            break;
        }
        let Some(step) = step else {
            if beta.iter().any(|b| b.abs() > 10.0) {
                return Err(NewtonFailure::Diverging {
                    index: argmax_abs(beta.iter().copied()),
                });
            }
            return Err(NewtonFailure::Singular);
        };

        let slack = 1e-12 * (1.0 + value.abs());
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let v = f.value(&trial);
            if v.is_finite() && v >= value - slack {
                accepted = Some(trial);
                break;
            }
            scale *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(NewtonFailure::NonConvergence {
                iterations: iteration,
                gradient_norm: grad.norm(),
            });
        };
        if diverging(&next) {
            return Err(NewtonFailure::Diverging {
                index: argmax_abs(next.iter().copied()),
            });
        }
        beta = next;
        (value, grad, info) = f.derivatives(&beta);
    }
    Err(NewtonFailure::NonConvergence {
        iterations: opts.max_iterations,
        gradient_norm: grad.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;
    impl Concave for Quadratic {
        fn value(&self, b: &[f64]) -> f64 {
            -(b[0] - 1.0).powi(2) - 2.0 * (b[1] + 3.0).powi(2)
        }
        fn derivatives(&self, b: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
            let g = DVector::from_vec(vec![-2.0 * (b[0] - 1.0), -4.0 * (b[1] + 3.0)]);
            let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
            (self.value(b), g, h)
        }
    }

    #[test]
    fn quadratic_in_one_step() {
        let opt = maximize(&Quadratic, vec![10.0, 10.0], &NewtonOptions::default()).unwrap();
        assert!((opt.beta[0] - 1.0).abs() < 1e-12 && (opt.beta[1] + 3.0).abs() < 1e-12);
        assert_eq!(opt.iterations, 1);
    }

    /// `log(sigmoid(b))`: increasing without bound.
    struct Unbounded;
    impl Concave for Unbounded {
        fn value(&self, b: &[f64]) -> f64 {
            -(1.0 + (-b[0]).exp()).ln()
        }
        fn derivatives(&self, b: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
            let p = 1.0 / (1.0 + (-b[0]).exp());
            (
                self.value(b),
                DVector::from_vec(vec![1.0 - p]),
                DMatrix::from_element(1, 1, p * (1.0 - p)),
            )
        }
    }

    #[test]
    fn unbounded_objective_reports_divergence() {
        let err = maximize(&Unbounded, vec![0.0], &NewtonOptions::default()).unwrap_err();
        assert_eq!(err, NewtonFailure::Diverging { index: 0 });
    }
}
