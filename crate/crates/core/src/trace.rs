//! Per-iteration convergence records and the practical factor estimator.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::problems::ProblemLevel;

/// Window of the practical factor estimate.
pub const FACTOR_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Residual norm, objective gap or gradient norm, per [`Monitor`].
    pub metric: f64,
    pub objective: f64,
    pub seconds: f64,
    /// Estimated factor over the last ten iterations, once available.
    pub factor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; the iteration index must increase.
    pub fn push(&mut self, iteration: usize, metric: f64, objective: f64, seconds: f64) {
        if let Some(last) = self.records.last() {
            assert!(iteration > last.iteration, "trace iterations must increase");
        }
        let factor = if self.records.len() >= FACTOR_WINDOW {
            let past = self.records[self.records.len() - FACTOR_WINDOW].metric;
            Some(window_factor(past, metric))
        } else {
            None
        };
        self.records.push(TraceRecord {
            iteration,
            metric,
            objective,
            seconds,
            factor,
        });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn metrics(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.metric).collect()
    }

    /// Iterations performed (the initial record has index 0).
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }
}

fn window_factor(past: f64, now: f64) -> f64 {
    (now / past).powf(1.0 / FACTOR_WINDOW as f64)
}

/// Tenth root of the ratio of the last metric to the one ten iterations earlier.
pub fn estimate_practical_factor(trace: &ConvergenceTrace) -> Result<f64> {
    estimate_factor_from_values(&trace.metrics())
}

pub fn estimate_factor_from_values(values: &[f64]) -> Result<f64> {
    if values.len() < FACTOR_WINDOW + 1 {
        return Err(Error::InsufficientRecords {
            needed: FACTOR_WINDOW + 1,
            have: values.len(),
        });
    }
    let n = values.len();
    Ok(window_factor(values[n - 1 - FACTOR_WINDOW], values[n - 1]))
}

/// What a run records and stops on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Monitor {
    /// `||f - A u||` with the unscaled operator; linear levels only.
    Residual,
    /// `F(u) - reference`.
    Gap { reference: f64 },
    /// `||grad F(u)|| / h^2`.
    GradientNorm,
}

impl Monitor {
    pub fn metric(&self, level: &ProblemLevel, u: &GridField) -> Result<f64> {
        match *self {
            Monitor::Residual => level.linear_residual_norm(u).ok_or(Error::NotQuadratic),
            Monitor::Gap { reference } => Ok(level.value(u) - reference),
            Monitor::GradientNorm => {
                let h2 = level.h() * level.h();
                Ok(level.gradient(u).norm_sq().sqrt() / h2)
            }
        }
    }

    /// Threshold below which a run counts as converged.
    pub fn threshold(&self, tol: f64) -> f64 {
        match *self {
            Monitor::Gap { reference } => tol * reference.abs(),
            _ => tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub tol: f64,
    pub max_iter: usize,
}

impl StopRule {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: GridField,
    pub trace: ConvergenceTrace,
    pub converged: bool,
    /// Set when a line search could not find a decrease and the run stopped.
    pub failure: Option<String>,
}

/// Runs `step` until the monitored metric drops below the threshold or the
/// iteration budget is exhausted. Iteration 0 records the initial guess.
pub fn run_iterations<F>(
    level: &ProblemLevel,
    x0: GridField,
    monitor: Monitor,
    stop: StopRule,
    mut step: F,
) -> Result<SolveOutcome>
where
    F: FnMut(&GridField) -> Result<GridField>,
{
    let start = Instant::now();
    let threshold = monitor.threshold(stop.tol);
    let mut trace = ConvergenceTrace::new();
    let mut x = x0;
    let m0 = monitor.metric(level, &x)?;
    trace.push(0, m0, level.value(&x), 0.0);
    let mut converged = m0 < threshold;
    let mut k = 0;
    let mut failure = None;
    while !converged && k < stop.max_iter {
        k += 1;
        x = match step(&x) {
            Ok(v) => v,
            Err(e @ Error::LineSearchFailure { .. }) => {
                failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let m = monitor.metric(level, &x)?;
        if !m.is_finite() {
            break;
        }
        trace.push(k, m, level.value(&x), start.elapsed().as_secs_f64());
        converged = m < threshold;
    }
    Ok(SolveOutcome {
        x,
        trace,
        converged,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn geometric_sequence() {
        let v: Vec<f64> = (0..30).map(|k| 0.5f64.powi(k)).collect();
        assert_relative_eq!(estimate_factor_from_values(&v).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn noisy_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v: Vec<f64> = (0..40)
            .map(|k| 3.0 * 0.7f64.powi(k) * (1.0 + 0.01 * (rng.random::<f64>() - 0.5)))
            .collect();
        assert!((estimate_factor_from_values(&v).unwrap() - 0.7).abs() < 0.01);
    }

    #[test]
    fn needs_eleven_records() {
        let mut t = ConvergenceTrace::new();
        for k in 0..10 {
            t.push(k, 1.0 / (k + 1) as f64, 0.0, 0.0);
        }
        assert!(matches!(
            estimate_practical_factor(&t),
            Err(Error::InsufficientRecords { needed: 11, have: 10 })
        ));
        assert!(t.last().unwrap().factor.is_none());
        t.push(10, 0.01, 0.0, 0.0);
        assert!(t.last().unwrap().factor.is_some());
        assert!(estimate_practical_factor(&t).is_ok());
    }

    #[test]
    #[should_panic]
    fn iterations_must_increase() {
        let mut t = ConvergenceTrace::new();
        t.push(3, 1.0, 0.0, 0.0);
        t.push(3, 1.0, 0.0, 0.0);
    }
}
