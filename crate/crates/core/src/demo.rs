//! One-dimensional worked example of the fixed-point solver.
//!
//! The pair is `f(x) = sin(15x) + 8x + 3` as the accurate model and
//! `f_s(x) = 6x` as the surrogate, with target reading 0: the solver hunts
//! the root of `f`. All roots of `f` lie where `8x + 3` cancels the bounded
//! sine term, i.e. inside `[-0.5, -0.25]`, and there is exactly one.
//!
//! A fixed-step gradient descent on `f^2/2` is included for comparison: from
//! `x = 0` it walks into the nearest stationary point of the squared
//! objective, which is not a root, while the fixed-point iteration reaches
//! the root from the same data.

use crate::solver::{
    mbsa_step, IterationRecord, IterationTrace, MeasurementSet, ModelError, ModelPair,
    SolverError, SolverStatus,
};

/// The 1-D model pair: accurate `sin(15x) + 8x + 3`, surrogate `6x`.
pub struct DemoPair;

impl DemoPair {
    pub const SURROGATE_SLOPE: f64 = 6.0;

    pub fn f(x: f64) -> f64 {
        (15.0 * x).sin() + 8.0 * x + 3.0
    }

    pub fn f_prime(x: f64) -> f64 {
        8.0 + 15.0 * (15.0 * x).cos()
    }
}

impl ModelPair for DemoPair {
    fn full_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(g.iter().map(|&v| Self::f(v)).collect())
    }

    fn simplified_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(g.iter().map(|v| Self::SURROGATE_SLOPE * v).collect())
    }

    fn simplified_inverse(&self, w: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(w.iter().map(|v| v / Self::SURROGATE_SLOPE).collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DemoConfig {
    /// Step factor for the fixed-point iteration. Any positive value is
    /// accepted here, including values beyond the stable range, so the demo
    /// can exhibit divergence.
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub gd_start: f64,
    pub gd_step: f64,
    pub gd_grad_tol: f64,
    pub gd_max_iter: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            tol: 1e-9,
            max_iter: 200,
            gd_start: 0.0,
            gd_step: 1e-3,
            gd_grad_tol: 1e-8,
            gd_max_iter: 10_000,
        }
    }
}

/// One gradient-descent iterate on the squared objective `f^2/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdRecord {
    pub iter: usize,
    pub x: f64,
    pub f_value: f64,
    /// Gradient of the squared objective, `f(x) f'(x)`.
    pub grad: f64,
}

#[derive(Debug)]
pub struct DemoOutcome {
    pub trace: IterationTrace,
    pub final_x: f64,
    /// `|f(final_x)|`, re-evaluated after the run.
    pub final_residual: f64,
    pub gd: Vec<GdRecord>,
}

impl DemoOutcome {
    pub fn gd_final(&self) -> GdRecord {
        *self.gd.last().expect("descent records at least the start point")
    }
}

/// Runs the fixed-point iteration and the reference gradient descent on the
/// 1-D pair.
///
/// The iteration is driven through [`mbsa_step`] directly rather than the
/// validated solver entry point, so step factors at or beyond the stability
/// edge run to their natural divergence instead of being rejected.
pub fn run_demo(config: &DemoConfig) -> Result<DemoOutcome, SolverError> {
    if !(config.beta.is_finite() && config.beta > 0.0) {
        return Err(SolverError::BadBeta(config.beta));
    }
    if !(config.tol.is_finite() && config.tol > 0.0) {
        return Err(SolverError::BadParameter { name: "tol", value: config.tol });
    }
    if config.max_iter == 0 {
        return Err(SolverError::ZeroIterations);
    }
    let data = MeasurementSet::new(vec![0.0], vec![0.0])?;
    let mut omega_hat = vec![0.0];
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut status = SolverStatus::MaxIterations;
    let mut initial_norm = f64::NAN;
    for iter in 1..=config.max_iter {
        let step = mbsa_step(&omega_hat, &DemoPair, &data, config.beta)?;
        let norm = step.error[0].abs();
        records.push(IterationRecord {
            iter,
            g: step.g,
            omega_hat_sq: omega_hat.clone(),
            error: step.error,
            error_norm: norm,
        });
        if iter == 1 {
            initial_norm = norm;
        }
        if !norm.is_finite() || norm > 1e6 * initial_norm.max(f64::MIN_POSITIVE) {
            status = SolverStatus::Diverged;
            break;
        }
        if norm <= config.tol {
            status = SolverStatus::Converged;
            break;
        }
        omega_hat = step.next_omega_hat_sq;
    }
    let trace = IterationTrace::new(records, status);
    let final_x = trace.final_g()[0];
    let final_residual = DemoPair::f(final_x).abs();
    let gd = gradient_descent(
        config.gd_start,
        config.gd_step,
        config.gd_grad_tol,
        config.gd_max_iter,
    );
    Ok(DemoOutcome { trace, final_x, final_residual, gd })
}

/// Fixed-step gradient descent on `f^2/2`, recording every iterate. Stops
/// when the gradient magnitude drops below `grad_tol` or the cap is hit.
pub fn gradient_descent(start: f64, step: f64, grad_tol: f64, max_iter: usize) -> Vec<GdRecord> {
    let mut x = start;
    let mut out = Vec::new();
    for iter in 0..=max_iter {
        let f_value = DemoPair::f(x);
        let grad = f_value * DemoPair::f_prime(x);
        out.push(GdRecord { iter, x, f_value, grad });
        if grad.abs() < grad_tol {
            break;
        }
        x -= step * grad;
    }
    out
}
