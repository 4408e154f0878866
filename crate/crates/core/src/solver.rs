//! Fixed-point engine that reconstructs model parameters from measurements.
//!
//! The engine pairs an accurate forward model `f` with a cheap, invertible
//! surrogate `f_s`. Starting from the working target `w_1 = d` (the measured
//! vector), each iteration inverts the surrogate, evaluates the accurate
//! model at that guess, and nudges the working target by a fraction of the
//! mismatch:
//!
//! ```text
//! g_k = f_s_inverse(w_k, x)
//! e_k = d - f(g_k, x)
//! w_{k+1} = w_k + beta * e_k
//! ```
//!
//! For linear models the error contracts with ratio `|1 - beta a/b|`, so
//! steps with `0 < beta < 2` converge when the two models' sensitivities
//! agree in sign and scale; [`check_convergence_condition`] probes the
//! corresponding local criterion for nonlinear pairs.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

/// Failure raised by a model evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("measurement {index}: {reason}")]
    Domain { index: usize, reason: String },
    #[error("model produced a non-finite value at measurement {index}")]
    NonFinite { index: usize },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("beta must lie in (0, 2), got {0}")]
    BadBeta(f64),
    #[error("{name} must be positive and finite, got {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("max_iter must be at least 1")]
    ZeroIterations,
    #[error("measurement set is empty")]
    NoMeasurements,
    #[error("positions and readings lengths differ: {positions} vs {readings}")]
    MeasurementShape { positions: usize, readings: usize },
    #[error("measurements contain a non-finite value")]
    NonFiniteMeasurement,
    #[error("working target length {got} does not match measurement count {expected}")]
    StateShape { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An accurate forward model and its invertible surrogate.
///
/// Both forwards map a parameter vector `g` and scan positions `x` to a
/// squared-frequency vector, one entry per position. Implementations must be
/// pure: identical inputs give bit-identical outputs, and calls may happen
/// from multiple threads. The surrogate must satisfy the round-trip
/// `simplified_inverse(simplified_forward(g, x), x) = g` to 1e-10 relative
/// over its declared domain.
pub trait ModelPair: Send + Sync {
    fn full_forward(&self, g: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError>;
    fn simplified_forward(&self, g: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError>;
    fn simplified_inverse(&self, omega_sq: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError>;
}

impl<T: ModelPair + ?Sized> ModelPair for &T {
    fn full_forward(&self, g: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        (**self).full_forward(g, x)
    }
    fn simplified_forward(&self, g: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        (**self).simplified_forward(g, x)
    }
    fn simplified_inverse(&self, omega_sq: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        (**self).simplified_inverse(omega_sq, x)
    }
}

/// Scan positions with their squared-frequency readings.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    positions: Vec<f64>,
    readings: Vec<f64>,
}

impl MeasurementSet {
    pub fn new(positions: Vec<f64>, readings: Vec<f64>) -> Result<Self, SolverError> {
        if positions.len() != readings.len() {
            return Err(SolverError::MeasurementShape {
                positions: positions.len(),
                readings: readings.len(),
            });
        }
        if positions.is_empty() {
            return Err(SolverError::NoMeasurements);
        }
        if positions.iter().chain(&readings).any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteMeasurement);
        }
        Ok(Self { positions, readings })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty sets
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn readings(&self) -> &[f64] {
        &self.readings
    }
}

/// Iteration parameters. `tol` is an absolute threshold on the l2 norm of
/// the error vector, in the units of the readings.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step for Jacobian diagnostics; the actual
    /// perturbation of coordinate `i` is `fd_step * max(1, |g_i|)`.
    pub fd_step: f64,
    /// Evaluate [`check_convergence_condition`] at the first iterate and
    /// attach the report to the trace.
    pub check_condition: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { beta: 0.5, tol: 1e-8, max_iter: 200, fd_step: 1e-6, check_condition: false }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(SolverError::BadBeta(self.beta));
        }
        for (name, value) in [("tol", self.tol), ("fd_step", self.fd_step)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SolverError::BadParameter { name, value });
            }
        }
        if self.max_iter == 0 {
            return Err(SolverError::ZeroIterations);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolverStatus {
    Converged,
    MaxIterations,
    Diverged,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverStatus::Converged => "Converged",
            SolverStatus::MaxIterations => "MaxIterations",
            SolverStatus::Diverged => "Diverged",
        };
        f.write_str(s)
    }
}

/// State captured at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration counter.
    pub iter: usize,
    /// Parameter guess from inverting the surrogate at this iteration.
    pub g: Vec<f64>,
    /// Working target vector the guess was derived from.
    pub omega_hat_sq: Vec<f64>,
    /// Residual `readings - full_forward(g)`.
    pub error: Vec<f64>,
    /// l2 norm of `error`.
    pub error_norm: f64,
}

/// Full iteration history with the final status.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    records: Vec<IterationRecord>,
    status: SolverStatus,
    condition: Option<ConditionReport>,
}

impl IterationTrace {
    /// Builds a trace from externally driven [`mbsa_step`] records.
    pub fn new(records: Vec<IterationRecord>, status: SolverStatus) -> Self {
        Self { records, status, condition: None }
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn status(&self) -> SolverStatus {
        self.status
    }

    /// Convergence-condition report, when the run requested one.
    pub fn condition(&self) -> Option<&ConditionReport> {
        self.condition.as_ref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("trace always holds at least one record")
    }

    pub fn final_g(&self) -> &[f64] {
        &self.final_record().g
    }

    pub fn error_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error_norm).collect()
    }
}

/// One update of the fixed-point recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct MbsaStep {
    pub g: Vec<f64>,
    pub error: Vec<f64>,
    pub next_omega_hat_sq: Vec<f64>,
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|e| e * e).sum::<f64>().sqrt()
}

/// Performs a single iteration from the working target `omega_hat_sq`.
///
/// Exposed separately from [`run_mbsa`] so callers can drive the recurrence
/// with step factors outside the validated range, e.g. to demonstrate
/// divergence.
pub fn mbsa_step(
    omega_hat_sq: &[f64],
    model: &dyn ModelPair,
    measurements: &MeasurementSet,
    beta: f64,
) -> Result<MbsaStep, SolverError> {
    let m = measurements.len();
    if omega_hat_sq.len() != m {
        return Err(SolverError::StateShape { expected: m, got: omega_hat_sq.len() });
    }
    let g = model.simplified_inverse(omega_hat_sq, measurements.positions())?;
    let predicted = model.full_forward(&g, measurements.positions())?;
    if predicted.len() != m {
        return Err(ModelError::Dimension { expected: m, got: predicted.len() }.into());
    }
    if let Some(index) = predicted.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite { index }.into());
    }
    let error: Vec<f64> =
        measurements.readings().iter().zip(&predicted).map(|(d, p)| d - p).collect();
    let next_omega_hat_sq: Vec<f64> =
        omega_hat_sq.iter().zip(&error).map(|(w, e)| w + beta * e).collect();
    Ok(MbsaStep { g, error, next_omega_hat_sq })
}

/// Runs the fixed-point iteration to convergence, the iteration cap, or
/// divergence (error norm beyond 1e6 times the initial norm, or non-finite).
///
/// The working target starts at the readings themselves, so the first guess
/// is the surrogate's direct inversion of the data.
pub fn run_mbsa(
    model: &dyn ModelPair,
    measurements: &MeasurementSet,
    config: &SolverConfig,
) -> Result<IterationTrace, SolverError> {
    config.validate()?;
    let mut omega_hat: Vec<f64> = measurements.readings().to_vec();
    let mut records = Vec::new();
    let mut status = SolverStatus::MaxIterations;
    let mut initial_norm = f64::NAN;
    let mut condition = None;
    for iter in 1..=config.max_iter {
        let step = mbsa_step(&omega_hat, model, measurements, config.beta)?;
        if iter == 1 && config.check_condition {
            condition = Some(check_convergence_condition(
                model,
                &step.g,
                measurements.positions(),
                config.fd_step,
            )?);
        }
        let MbsaStep { g, error, next_omega_hat_sq } = step;
        let norm = l2_norm(&error);
        records.push(IterationRecord {
            iter,
            g,
            omega_hat_sq: omega_hat,
            error,
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
        omega_hat = next_omega_hat_sq;
    }
    Ok(IterationTrace { records, status, condition })
}

/// Local convergence diagnostic at a probe point.
///
/// `matrix` is the product of the surrogate Jacobian transposed with the
/// accurate-model Jacobian, both from central differences. The quadratic
/// form of a matrix depends only on its symmetric part, so positive
/// definiteness is decided from the eigenvalues of `(M + M^T)/2`.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub positive_definite: bool,
}

fn fd_jacobian<F>(eval: F, g: &[f64], fd_step: f64) -> Result<DMatrix<f64>, ModelError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, ModelError>,
{
    let p = g.len();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut rows = 0;
    for i in 0..p {
        let h = fd_step * g[i].abs().max(1.0);
        let mut hi = g.to_vec();
        let mut lo = g.to_vec();
        hi[i] += h;
        lo[i] -= h;
        let up = eval(&hi)?;
        let down = eval(&lo)?;
        if up.len() != down.len() {
            return Err(ModelError::Dimension { expected: up.len(), got: down.len() });
        }
        rows = up.len();
        columns.push(up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    let data: Vec<f64> = columns.into_iter().flatten().collect();
    Ok(DMatrix::from_vec(rows, p, data))
}

/// Probes whether the two models' sensitivities locally agree, the condition
/// under which the fixed-point update contracts. Diagnostic only: the
/// iteration is still run where the condition fails, since global runs can
/// converge through locally adverse regions.
pub fn check_convergence_condition(
    model: &dyn ModelPair,
    g_probe: &[f64],
    positions: &[f64],
    fd_step: f64,
) -> Result<ConditionReport, SolverError> {
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(SolverError::BadParameter { name: "fd_step", value: fd_step });
    }
    if g_probe.is_empty() {
        return Err(SolverError::NoMeasurements);
    }
    let full_j = fd_jacobian(|g| model.full_forward(g, positions), g_probe, fd_step)?;
    let simp_j = fd_jacobian(|g| model.simplified_forward(g, positions), g_probe, fd_step)?;
    let matrix = simp_j.transpose() * full_j;
    let sym = (&matrix + matrix.transpose()) * 0.5;
    let eigenvalues = sym.symmetric_eigenvalues();
    let min_eigenvalue = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_eigenvalue = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ConditionReport {
        matrix,
        min_eigenvalue,
        max_eigenvalue,
        positive_definite: min_eigenvalue > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_relative_eq, relative_eq};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Elementwise scalar pair: f(g) = a g, f_s(g) = b g.
    struct LinearPair {
        a: f64,
        b: f64,
    }

    impl ModelPair for LinearPair {
        fn full_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(g.iter().map(|v| self.a * v).collect())
        }
        fn simplified_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(g.iter().map(|v| self.b * v).collect())
        }
        fn simplified_inverse(&self, w: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(w.iter().map(|v| v / self.b).collect())
        }
    }

    /// Full matrix pair: f(g) = A g, f_s(g) = B g.
    struct MatrixPair {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
    }

    impl ModelPair for MatrixPair {
        fn full_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok((&self.a * DVector::from_column_slice(g)).iter().cloned().collect())
        }
        fn simplified_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok((&self.b * DVector::from_column_slice(g)).iter().cloned().collect())
        }
        fn simplified_inverse(&self, w: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            let solved = self
                .b
                .clone()
                .lu()
                .solve(&DVector::from_column_slice(w))
                .expect("test surrogate is invertible");
            Ok(solved.iter().cloned().collect())
        }
    }

    fn measurements(readings: &[f64]) -> MeasurementSet {
        let positions: Vec<f64> = (0..readings.len()).map(|i| i as f64).collect();
        MeasurementSet::new(positions, readings.to_vec()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for beta in [0.0, -0.5, 2.0, 2.5, f64::NAN] {
            let cfg = SolverConfig { beta, ..SolverConfig::default() };
            assert!(matches!(cfg.validate(), Err(SolverError::BadBeta(_))), "beta {beta}");
        }
        assert!(SolverConfig { tol: 0.0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig { fd_step: -1.0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig { max_iter: 0, ..SolverConfig::default() }.validate().is_err());
    }

    #[test]
    fn measurement_set_validation() {
        assert!(MeasurementSet::new(vec![], vec![]).is_err());
        assert!(MeasurementSet::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(MeasurementSet::new(vec![0.0], vec![f64::NAN]).is_err());
        assert!(MeasurementSet::new(vec![0.0], vec![1.0]).is_ok());
    }

    #[test]
    fn identical_models_converge_in_one_iteration_exactly() {
        // With a power-of-two slope the inverse-then-forward round trip is
        // exact in floating point, so the first residual is literally zero.
        let pair = LinearPair { a: 0.5, b: 0.5 };
        let data = measurements(&[2.0, -1.0, 5.0]);
        let config = SolverConfig { beta: 1.0, ..SolverConfig::default() };
        let trace = run_mbsa(&pair, &data, &config).unwrap();
        assert_eq!(trace.status(), SolverStatus::Converged);
        assert_eq!(trace.len(), 1);
        assert!(trace.final_record().error.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn mismatched_linear_pair_diverges_with_ratio_two() {
        let pair = LinearPair { a: 2.0, b: 1.0 };
        let data = measurements(&[4.0]);
        let config = SolverConfig { beta: 1.5, ..SolverConfig::default() };
        let trace = run_mbsa(&pair, &data, &config).unwrap();
        assert_eq!(trace.status(), SolverStatus::Diverged);
        let norms = trace.error_norms();
        for pair in norms.windows(2) {
            assert_relative_eq!(pair[1] / pair[0], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_step_matches_hand_computation() {
        let pair = LinearPair { a: 1.0, b: 1.0 };
        let data = measurements(&[4.0]);
        let step = mbsa_step(&[0.0], &pair, &data, 0.5).unwrap();
        assert_eq!(step.g, vec![0.0]);
        assert_eq!(step.error, vec![4.0]);
        assert_eq!(step.next_omega_hat_sq, vec![2.0]);
    }

    #[test]
    fn step_at_the_fixed_point_is_stationary() {
        let pair = LinearPair { a: 0.5, b: 0.5 };
        let data = measurements(&[4.0, -2.0]);
        let step = mbsa_step(&[4.0, -2.0], &pair, &data, 1.0).unwrap();
        assert_eq!(step.error, vec![0.0, 0.0]);
        assert_eq!(step.next_omega_hat_sq, vec![4.0, -2.0]);
    }

    #[test]
    fn step_rejects_mismatched_state_length() {
        let pair = LinearPair { a: 1.0, b: 1.0 };
        let data = measurements(&[4.0, 5.0]);
        assert!(matches!(
            mbsa_step(&[0.0], &pair, &data, 0.5),
            Err(SolverError::StateShape { expected: 2, got: 1 })
        ));
    }

    struct CubicPair;

    impl ModelPair for CubicPair {
        fn full_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(g.iter().map(|v| v.powi(3) + 2.0 * v).collect())
        }
        fn simplified_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(g.iter().map(|v| 3.0 * v).collect())
        }
        fn simplified_inverse(&self, w: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(w.iter().map(|v| v / 3.0).collect())
        }
    }

    #[test]
    fn converged_solution_satisfies_the_full_model() {
        let data = measurements(&[0.5, -0.3, 0.8]);
        let config = SolverConfig { tol: 1e-12, max_iter: 500, ..SolverConfig::default() };
        let trace = run_mbsa(&CubicPair, &data, &config).unwrap();
        assert_eq!(trace.status(), SolverStatus::Converged);
        // Re-evaluate the model independently of the trace bookkeeping.
        let predicted = CubicPair.full_forward(trace.final_g(), data.positions()).unwrap();
        let residual: f64 = data
            .readings()
            .iter()
            .zip(&predicted)
            .map(|(d, p)| (d - p) * (d - p))
            .sum::<f64>()
            .sqrt();
        assert!(residual <= config.tol, "residual {residual}");
    }

    #[test]
    fn step_size_boundary_for_identical_scalar_models() {
        let pair = LinearPair { a: 1.0, b: 1.0 };
        let data = measurements(&[4.0]);
        let drive = |beta: f64| {
            let mut state = vec![0.0];
            let mut last_norm = f64::INFINITY;
            for _ in 0..200 {
                let step = mbsa_step(&state, &pair, &data, beta).unwrap();
                last_norm = l2_norm(&step.error);
                if !last_norm.is_finite() || last_norm > 1e9 {
                    break;
                }
                state = step.next_omega_hat_sq;
            }
            last_norm
        };
        for beta in [0.1, 0.5, 1.0, 1.9] {
            assert!(drive(beta) < 1e-6, "beta {beta} should converge");
        }
        for beta in [2.1, 3.0] {
            assert!(drive(beta) > 1e6, "beta {beta} should diverge");
        }
    }

    #[test]
    fn error_norm_decreases_monotonically_for_contractive_linear_pairs() {
        // Build pairs where the iteration matrix I - beta A B^-1 is
        // symmetric with spectral radius < 1; then each step must strictly
        // shrink the residual until it hits the tolerance floor.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dim = 5;
        for _ in 0..20 {
            let random = DMatrix::from_fn(dim, dim, |_, _| {
                rand::Rng::random_range(&mut rng, -1.0..1.0)
            });
            let q = random.qr().q();
            let spd = |eigs: &[f64]| {
                &q * DMatrix::from_diagonal(&DVector::from_row_slice(eigs)) * q.transpose()
            };
            let ratio_eigs: Vec<f64> =
                (0..dim).map(|_| rand::Rng::random_range(&mut rng, 0.2..1.8)).collect();
            let b_eigs: Vec<f64> =
                (0..dim).map(|_| rand::Rng::random_range(&mut rng, 0.5..2.0)).collect();
            let b = spd(&b_eigs);
            let a = spd(&ratio_eigs) * &b;
            let pair = MatrixPair { a, b };
            let readings: Vec<f64> =
                (0..dim).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
            let data = measurements(&readings);
            let config = SolverConfig { beta: 1.0, tol: 1e-9, ..SolverConfig::default() };
            let trace = run_mbsa(&pair, &data, &config).unwrap();
            assert_eq!(trace.status(), SolverStatus::Converged);
            let norms = trace.error_norms();
            for pair in norms.windows(2) {
                assert!(pair[1] < pair[0], "norms not strictly decreasing: {norms:?}");
            }
        }
    }

    #[test]
    fn traces_are_bit_identical_across_runs() {
        let data = measurements(&[0.5, -0.3, 0.8]);
        let config = SolverConfig::default();
        let run = || {
            run_mbsa(&CubicPair, &data, &config)
                .unwrap()
                .records()
                .iter()
                .flat_map(|r| {
                    r.g.iter()
                        .chain(&r.omega_hat_sq)
                        .chain(&r.error)
                        .chain(std::iter::once(&r.error_norm))
                        .map(|v| v.to_bits())
                        .collect::<Vec<u64>>()
                })
                .collect::<Vec<u64>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn condition_check_on_scalar_slope_products() {
        let aligned = LinearPair { a: 2.0, b: 3.0 };
        let report = check_convergence_condition(&aligned, &[1.0], &[0.0], 1e-6).unwrap();
        assert_relative_eq!(report.matrix[(0, 0)], 6.0, max_relative = 1e-9);
        assert!(report.positive_definite);

        let opposed = LinearPair { a: 2.0, b: -1.0 };
        let report = check_convergence_condition(&opposed, &[1.0], &[0.0], 1e-6).unwrap();
        assert_relative_eq!(report.matrix[(0, 0)], -2.0, max_relative = 1e-9);
        assert!(!report.positive_definite);
        assert!(report.min_eigenvalue < 0.0);
    }

    struct WavyPair;

    impl ModelPair for WavyPair {
        fn full_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(g.iter().map(|v| (2.0 * v).sin() + v * v).collect())
        }
        fn simplified_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(g.iter().map(|v| 3.0 * v).collect())
        }
        fn simplified_inverse(&self, w: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(w.iter().map(|v| v / 3.0).collect())
        }
    }

    #[test]
    fn finite_difference_jacobian_matches_analytic_derivative() {
        let g = 0.7;
        let report = check_convergence_condition(&WavyPair, &[g], &[0.0], 1e-6).unwrap();
        let analytic = 3.0 * (2.0 * (2.0 * g).cos() + 2.0 * g);
        assert!(
            relative_eq!(report.matrix[(0, 0)], analytic, max_relative = 1e-6),
            "fd {} vs analytic {analytic}",
            report.matrix[(0, 0)]
        );
    }

    #[test]
    fn condition_report_is_attached_when_requested() {
        let data = measurements(&[0.5]);
        let config = SolverConfig { check_condition: true, ..SolverConfig::default() };
        let trace = run_mbsa(&CubicPair, &data, &config).unwrap();
        let report = trace.condition().expect("report requested");
        assert!(report.positive_definite);
        assert!(run_mbsa(&CubicPair, &data, &SolverConfig::default())
            .unwrap()
            .condition()
            .is_none());
    }

    struct FailingInverse;

    impl ModelPair for FailingInverse {
        fn full_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(g.to_vec())
        }
        fn simplified_forward(&self, g: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            Ok(g.to_vec())
        }
        fn simplified_inverse(&self, w: &[f64], _x: &[f64]) -> Result<Vec<f64>, ModelError> {
            if let Some(index) = w.iter().position(|&v| v >= 0.0) {
                return Err(ModelError::Domain {
                    index,
                    reason: "reading must be negative".into(),
                });
            }
            Ok(w.to_vec())
        }
    }

    #[test]
    fn model_domain_errors_carry_the_measurement_index() {
        let data = measurements(&[-1.0, 3.0]);
        let err = run_mbsa(&FailingInverse, &data, &SolverConfig::default()).unwrap_err();
        match err {
            SolverError::Model(ModelError::Domain { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn trace_never_exceeds_the_iteration_cap() {
        let pair = LinearPair { a: 1.02, b: 1.0 };
        let data = measurements(&[4.0]);
        let config =
            SolverConfig { beta: 0.01, tol: 1e-14, max_iter: 17, ..SolverConfig::default() };
        let trace = run_mbsa(&pair, &data, &config).unwrap();
        assert_eq!(trace.status(), SolverStatus::MaxIterations);
        assert_eq!(trace.len(), 17);
    }
}
