//! Clamped-free Euler-Bernoulli beam modes and the Rayleigh-quotient
//! frequency shift produced by a distributed stiffness profile.
//!
//! Mode shapes use the standard normalization
//! `phi(x) = cosh(kx) - cos(kx) - sigma (sinh(kx) - sin(kx))`, `k = lambda/L`,
//! whose tip magnitude is 2 and whose mean-square integral equals the beam
//! length. A stiffness distribution `k(x)` added along the span perturbs the
//! squared natural frequency by the modal average
//! `d(omega^2) = int phi^2 k dx / (rho_A int phi^2 dx)`, which is linear in
//! `k` by construction.

use crate::quad::{bisect, integrate_samples, simpson};
use thiserror::Error;

/// Default interval count for fixed-grid quadrature along the beam span.
pub const DEFAULT_BEAM_INTERVALS: usize = 2048;

#[derive(Debug, Error)]
pub enum BeamError {
    #[error("beam parameter `{name}` must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("mode index must be at least 1")]
    ZeroModeIndex,
    #[error("position {x} lies outside the beam span [0, {length}]")]
    OutOfSpan { x: f64, length: f64 },
    #[error("stiffness profile {0}")]
    BadProfile(String),
}

/// Uniform clamped-free cantilever restricted to a single bending mode.
#[derive(Debug, Clone)]
pub struct BeamModel {
    length: f64,
    rho_a: f64,
    ei: f64,
    mode_index: u32,
    lambda: f64,
    sigma: f64,
}

impl BeamModel {
    pub fn new(length: f64, rho_a: f64, ei: f64, mode_index: u32) -> Result<Self, BeamError> {
        for (name, value) in [("length", length), ("rho_a", rho_a), ("ei", ei)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(BeamError::NonPositive { name, value });
            }
        }
        if mode_index == 0 {
            return Err(BeamError::ZeroModeIndex);
        }
        let lambda = clamped_free_eigenvalue(mode_index);
        let sigma = (lambda.cosh() + lambda.cos()) / (lambda.sinh() + lambda.sin());
        Ok(Self { length, rho_a, ei, mode_index, lambda, sigma })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Mass per unit length [kg/m].
    pub fn rho_a(&self) -> f64 {
        self.rho_a
    }

    /// Bending rigidity [N m^2].
    pub fn ei(&self) -> f64 {
        self.ei
    }

    pub fn mode_index(&self) -> u32 {
        self.mode_index
    }

    /// Dimensionless eigenvalue of the characteristic equation
    /// `1 + cos(lambda) cosh(lambda) = 0` for the selected mode.
    pub fn eigenvalue(&self) -> f64 {
        self.lambda
    }

    /// Static transverse deflection of the scan axis. The models assume the
    /// beam oscillates about an undeflected axis, so this is identically zero.
    pub fn static_deflection(&self) -> f64 {
        0.0
    }

    /// Mode shape at `x` from the clamp, in the tip-magnitude-2 normalization.
    pub fn mode_shape(&self, x: f64) -> Result<f64, BeamError> {
        if !(0.0..=self.length).contains(&x) || !x.is_finite() {
            return Err(BeamError::OutOfSpan { x, length: self.length });
        }
        Ok(self.shape_unchecked(x))
    }

    fn shape_unchecked(&self, x: f64) -> f64 {
        let xi = self.lambda * x / self.length;
        xi.cosh() - xi.cos() - self.sigma * (xi.sinh() - xi.sin())
    }

    /// Mode shape at the free end.
    pub fn tip_value(&self) -> f64 {
        self.shape_unchecked(self.length)
    }

    /// Undamped natural frequency `lambda^2 sqrt(EI / (rho_A L^4))` [rad/s].
    pub fn base_natural_frequency(&self) -> f64 {
        self.lambda * self.lambda * (self.ei / (self.rho_a * self.length.powi(4))).sqrt()
    }

    /// Span-averaged squared mode shape relative to the tip value,
    /// `(1/L) int (phi/phi(L))^2 dx`, at the default quadrature resolution.
    pub fn phi_bar(&self) -> f64 {
        self.phi_bar_with(DEFAULT_BEAM_INTERVALS)
    }

    /// Same as [`phi_bar`](Self::phi_bar) with an explicit interval count.
    pub fn phi_bar_with(&self, intervals: usize) -> f64 {
        normalized_mean_square(|x| self.shape_unchecked(x), self.tip_value(), self.length, intervals)
    }
}

/// `(1/L) int (shape/tip)^2 dx` by composite Simpson. A constant shape equal
/// to its tip value averages to exactly 1.
pub(crate) fn normalized_mean_square<F: Fn(f64) -> f64>(
    shape: F,
    tip: f64,
    length: f64,
    intervals: usize,
) -> f64 {
    simpson(|x| (shape(x) / tip).powi(2), 0.0, length, intervals) / length
}

/// Root of `1 + cos(lambda) cosh(lambda) = 0` for the given mode. Roots sit
/// within 1 of `(2n - 1) pi/2`, which brackets each one with a sign change.
fn clamped_free_eigenvalue(mode_index: u32) -> f64 {
    let center = (2.0 * mode_index as f64 - 1.0) * std::f64::consts::FRAC_PI_2;
    let characteristic = |l: f64| 1.0 + l.cos() * l.cosh();
    bisect(characteristic, center - 1.0, center + 1.0, 1e-14)
        .expect("characteristic equation changes sign on the mode bracket")
}

/// Added-stiffness samples along the beam span.
///
/// The grid must be strictly increasing and is expected to cover the full
/// span `[0, L]` when fed to [`delta_omega_sq`]. Values may be of either
/// sign: negative entries soften, positive entries stiffen.
#[derive(Debug, Clone)]
pub struct StiffnessProfile {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl StiffnessProfile {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, BeamError> {
        if grid.len() != values.len() {
            return Err(BeamError::BadProfile(format!(
                "has {} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 2 {
            return Err(BeamError::BadProfile("needs at least two samples".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(BeamError::BadProfile("grid must be strictly increasing".into()));
        }
        if grid.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(BeamError::BadProfile("contains a non-finite entry".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Squared-frequency shift `int phi^2 k dx / (rho_A int phi^2 dx)` of the
/// sampled stiffness profile.
///
/// Numerator and denominator share the profile's grid and quadrature rule, so
/// a constant profile `k == k0` yields exactly `k0 / rho_A` up to rounding.
pub fn delta_omega_sq(beam: &BeamModel, profile: &StiffnessProfile) -> Result<f64, BeamError> {
    let grid = profile.grid();
    let tol = 1e-9 * beam.length();
    if grid[0].abs() > tol || (grid[grid.len() - 1] - beam.length()).abs() > tol {
        return Err(BeamError::BadProfile(format!(
            "grid spans [{}, {}] instead of the beam span [0, {}]",
            grid[0],
            grid[grid.len() - 1],
            beam.length()
        )));
    }
    let phi_sq: Vec<f64> = grid
        .iter()
        .map(|&x| beam.shape_unchecked(x.clamp(0.0, beam.length())).powi(2))
        .collect();
    let weighted: Vec<f64> =
        phi_sq.iter().zip(profile.values()).map(|(p, k)| p * k).collect();
    let numerator = integrate_samples(grid, &weighted);
    let denominator = beam.rho_a() * integrate_samples(grid, &phi_sq);
    Ok(numerator / denominator)
}

/// Precomputed modal weights on a uniform span grid.
///
/// Scan models evaluate stiffness samples thousands of times per solve; this
/// caches `phi^2` at the nodes and the modal normalization so each evaluation
/// reduces to one weighted quadrature.
#[derive(Debug, Clone)]
pub struct ModalGrid {
    nodes: Vec<f64>,
    phi_sq: Vec<f64>,
    rho_a_phi_sq_integral: f64,
}

impl ModalGrid {
    pub fn new(beam: &BeamModel, intervals: usize) -> Self {
        let n = intervals.max(2).next_multiple_of(2);
        let h = beam.length() / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let phi_sq: Vec<f64> =
            nodes.iter().map(|&x| beam.shape_unchecked(x).powi(2)).collect();
        let rho_a_phi_sq_integral = beam.rho_a() * integrate_samples(&nodes, &phi_sq);
        Self { nodes, phi_sq, rho_a_phi_sq_integral }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn phi_sq(&self) -> &[f64] {
        &self.phi_sq
    }

    /// Frequency shift for stiffness samples given on [`nodes`](Self::nodes).
    pub fn delta_omega_sq_from(&self, stiffness: &[f64]) -> f64 {
        assert_eq!(stiffness.len(), self.nodes.len(), "stiffness sampled off-grid");
        let weighted: Vec<f64> =
            self.phi_sq.iter().zip(stiffness).map(|(p, k)| p * k).collect();
        integrate_samples(&self.nodes, &weighted) / self.rho_a_phi_sq_integral
    }
}
