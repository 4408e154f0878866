//! Discrete magnet-pair interaction model and its calibration.
//!
//! A row of magnets rides on the beam and interacts pairwise with magnets
//! embedded in the scanned surface through an attractive power-law potential
//! `-C/r^n` (an ideal dipole pair has `n = 3`). Each pair contributes point
//! stiffness at its beam magnet through the same kernel as the distributed
//! surface model; the modal reduction is a weighted sum over magnet sites
//! instead of a quadrature.
//!
//! Lengths here live in whatever unit the calibrated `C` implies; only
//! consistency between the magnet coordinates and `C` matters. Frequencies
//! are rad/s throughout.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::beam::{BeamModel, DEFAULT_BEAM_INTERVALS};
use crate::quad::simpson;
use crate::vdw::point_stiffness_kernel;

#[derive(Debug, Error)]
pub enum MagneticError {
    #[error("magnet array needs at least one magnet")]
    EmptyArray,
    #[error("magnet positions must be finite and strictly increasing")]
    BadPositions,
    #[error("magnet spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("polarity must be +1 or -1, got {0}")]
    BadPolarity(f64),
    #[error("separation must be positive, got {0}")]
    BadSeparation(f64),
    #[error("model parameter {name} is out of range: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("beam magnet {0} sits outside the beam span")]
    MagnetOffBeam(usize),
    #[error(
        "beam magnet {beam_index} and surface magnet {topo_index} are {distance:.3e} apart, below the {floor:.3e} floor"
    )]
    PairTooClose { beam_index: usize, topo_index: usize, distance: f64, floor: f64 },
    #[error("calibration needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("calibration gaps and frequencies differ in length")]
    LengthMismatch,
    #[error("calibration gap must be positive and finite, got {0}")]
    BadGap(f64),
    #[error("calibration gaps must be distinct; {0} repeats")]
    DuplicateGap(f64),
    #[error("calibration frequency must be positive and finite, got {0}")]
    BadFrequency(f64),
    #[error("calibration model evaluation failed at the initial guess")]
    BadInitialGuess,
    #[error("calibration stalled after {iterations} iterations at residual {residual:.3e}")]
    NoProgress { iterations: usize, residual: f64 },
}

/// Straight row of equally signed magnets at strictly increasing positions.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetArray {
    positions: Vec<f64>,
    polarity: f64,
}

impl MagnetArray {
    pub fn new(positions: Vec<f64>, polarity: f64) -> Result<Self, MagneticError> {
        if positions.is_empty() {
            return Err(MagneticError::EmptyArray);
        }
        if positions.iter().any(|p| !p.is_finite())
            || positions.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(MagneticError::BadPositions);
        }
        if polarity != 1.0 && polarity != -1.0 {
            return Err(MagneticError::BadPolarity(polarity));
        }
        Ok(Self { positions, polarity })
    }

    /// `count` magnets starting at `start`, `spacing` apart.
    pub fn uniform(
        count: usize,
        start: f64,
        spacing: f64,
        polarity: f64,
    ) -> Result<Self, MagneticError> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(MagneticError::BadSpacing(spacing));
        }
        let positions = (0..count).map(|i| start + i as f64 * spacing).collect();
        Self::new(positions, polarity)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn polarity(&self) -> f64 {
        self.polarity
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Ideal dipole pair potential `-C/r^3` at separation `r`.
pub fn dipole_potential(c: f64, r: f64) -> Result<f64, MagneticError> {
    if !(r.is_finite() && r > 0.0) {
        return Err(MagneticError::BadSeparation(r));
    }
    Ok(-c / (r * r * r))
}

/// Point stiffness induced at each beam magnet by every surface magnet.
///
/// Surface magnets are given in beam coordinates as `(axial, transverse)`
/// pairs; `u_ss` is a static transverse offset of the beam axis (zero for an
/// undeflected beam). `coupling` is the polarity product of the two arrays:
/// `+1` keeps the attractive sign convention, `-1` flips it.
pub fn discrete_stiffness(
    c: f64,
    n: f64,
    coupling: f64,
    beam_magnets: &[f64],
    surface_magnets: &[(f64, f64)],
    u_ss: f64,
    gap_floor: f64,
) -> Result<Vec<f64>, MagneticError> {
    let mut out = Vec::with_capacity(beam_magnets.len());
    for (j, &x) in beam_magnets.iter().enumerate() {
        let mut k = 0.0;
        for (i, &(axial, transverse)) in surface_magnets.iter().enumerate() {
            let da = axial - x;
            let dt = transverse - u_ss;
            let distance = (da * da + dt * dt).sqrt();
            if distance < gap_floor {
                return Err(MagneticError::PairTooClose {
                    beam_index: j,
                    topo_index: i,
                    distance,
                    floor: gap_floor,
                });
            }
            k += coupling * point_stiffness_kernel(c, n, da, dt);
        }
        out.push(k);
    }
    Ok(out)
}

/// Beam with its magnet row and interaction constants; evaluates squared
/// frequencies against arbitrary surface magnet layouts.
#[derive(Debug, Clone)]
pub struct MagneticModel {
    beam: BeamModel,
    beam_magnets: MagnetArray,
    c: f64,
    n: f64,
    omega0_sq: f64,
    gap_floor: f64,
    u_ss: f64,
    phi_sq_at_magnets: Vec<f64>,
    modal_mass: f64,
}

impl MagneticModel {
    pub fn new(
        beam: BeamModel,
        beam_magnets: MagnetArray,
        c: f64,
        n: f64,
        omega0_sq: f64,
        gap_floor: f64,
    ) -> Result<Self, MagneticError> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(MagneticError::BadParameter { name: "C", value: c });
        }
        if !(n.is_finite() && n > 0.0) {
            return Err(MagneticError::BadParameter { name: "n", value: n });
        }
        if !(omega0_sq.is_finite() && omega0_sq > 0.0) {
            return Err(MagneticError::BadParameter { name: "omega0_sq", value: omega0_sq });
        }
        if !(gap_floor.is_finite() && gap_floor >= 0.0) {
            return Err(MagneticError::BadParameter { name: "gap_floor", value: gap_floor });
        }
        let mut phi_sq_at_magnets = Vec::with_capacity(beam_magnets.len());
        for (j, &x) in beam_magnets.positions().iter().enumerate() {
            let phi = beam.mode_shape(x).map_err(|_| MagneticError::MagnetOffBeam(j))?;
            phi_sq_at_magnets.push(phi * phi);
        }
        let modal_mass = beam.rho_a()
            * simpson(
                |x| beam.mode_shape(x).unwrap().powi(2),
                0.0,
                beam.length(),
                DEFAULT_BEAM_INTERVALS,
            );
        Ok(Self {
            beam,
            beam_magnets,
            c,
            n,
            omega0_sq,
            gap_floor,
            u_ss: 0.0,
            phi_sq_at_magnets,
            modal_mass,
        })
    }

    pub fn with_constants(&self, c: f64, n: f64, omega0_sq: f64) -> Result<Self, MagneticError> {
        let mut model = self.clone();
        if !(c.is_finite() && c >= 0.0) {
            return Err(MagneticError::BadParameter { name: "C", value: c });
        }
        if !(n.is_finite() && n > 0.0) {
            return Err(MagneticError::BadParameter { name: "n", value: n });
        }
        if !(omega0_sq.is_finite() && omega0_sq > 0.0) {
            return Err(MagneticError::BadParameter { name: "omega0_sq", value: omega0_sq });
        }
        model.c = c;
        model.n = n;
        model.omega0_sq = omega0_sq;
        Ok(model)
    }

    pub fn beam(&self) -> &BeamModel {
        &self.beam
    }

    pub fn beam_magnets(&self) -> &MagnetArray {
        &self.beam_magnets
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn omega0_sq(&self) -> f64 {
        self.omega0_sq
    }

    pub fn gap_floor(&self) -> f64 {
        self.gap_floor
    }

    /// Modal frequency-shift from surface magnets given in beam coordinates:
    /// the discrete analogue of the distributed reduction, a weighted sum of
    /// point stiffness over magnet sites.
    pub fn delta_omega_sq(
        &self,
        surface_magnets: &[(f64, f64)],
        surface_polarity: f64,
    ) -> Result<f64, MagneticError> {
        let k = discrete_stiffness(
            self.c,
            self.n,
            self.beam_magnets.polarity() * surface_polarity,
            self.beam_magnets.positions(),
            surface_magnets,
            self.u_ss,
            self.gap_floor,
        )?;
        Ok(k.iter().zip(&self.phi_sq_at_magnets).map(|(k, p)| k * p).sum::<f64>()
            / self.modal_mass)
    }

    /// Squared frequency `omega0^2 + delta` for one surface layout.
    pub fn omega_sq(
        &self,
        surface_magnets: &[(f64, f64)],
        surface_polarity: f64,
    ) -> Result<f64, MagneticError> {
        Ok(self.omega0_sq + self.delta_omega_sq(surface_magnets, surface_polarity)?)
    }

    /// Scans the beam along a surface magnet row: at scan offset `o` the
    /// surface magnet at lateral position `zeta` sits at axial coordinate
    /// `zeta - o` in the beam frame, keeping its transverse gap.
    pub fn scan_omega_sq(
        &self,
        surface_magnets: &[(f64, f64)],
        surface_polarity: f64,
        scan_offsets: &[f64],
    ) -> Result<Vec<f64>, MagneticError> {
        scan_offsets
            .iter()
            .map(|&o| {
                let in_frame: Vec<(f64, f64)> =
                    surface_magnets.iter().map(|&(zeta, gap)| (zeta - o, gap)).collect();
                self.omega_sq(&in_frame, surface_polarity)
            })
            .collect()
    }
}

/// Measured natural frequencies at known uniform gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationData {
    gaps: Vec<f64>,
    omegas: Vec<f64>,
}

impl CalibrationData {
    pub fn new(gaps: Vec<f64>, omegas: Vec<f64>) -> Result<Self, MagneticError> {
        if gaps.len() != omegas.len() {
            return Err(MagneticError::LengthMismatch);
        }
        if gaps.len() < 4 {
            return Err(MagneticError::TooFewPoints(gaps.len()));
        }
        for &g in &gaps {
            if !(g.is_finite() && g > 0.0) {
                return Err(MagneticError::BadGap(g));
            }
        }
        let mut sorted = gaps.clone();
        sorted.sort_by(f64::total_cmp);
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(MagneticError::DuplicateGap(w[0]));
        }
        for &w in &omegas {
            if !(w.is_finite() && w > 0.0) {
                return Err(MagneticError::BadFrequency(w));
            }
        }
        Ok(Self { gaps, omegas })
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CalibrationConfig {
    /// Relative step-norm threshold on the log-parameter vector.
    pub tol: f64,
    pub max_iter: usize,
    /// Optional starting point `(C, n, omega0)`; otherwise derived from the
    /// data.
    pub initial: Option<(f64, f64, f64)>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, initial: None }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CalibrationResult {
    pub c: f64,
    pub n: f64,
    pub omega0: f64,
    pub residual_norm: f64,
    pub initial_residual_norm: f64,
    pub iterations: usize,
    /// Residual norm after every accepted step, starting at the initial
    /// guess; non-increasing by construction.
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

/// Calibration forward model: every beam magnet faces a surface magnet
/// directly across the given uniform gap.
fn calibration_omegas(rig: &MagneticModel, gaps: &[f64]) -> Option<DVector<f64>> {
    let mut out = DVector::zeros(gaps.len());
    for (k, &gap) in gaps.iter().enumerate() {
        let facing: Vec<(f64, f64)> =
            rig.beam_magnets().positions().iter().map(|&x| (x, gap)).collect();
        let w2 = rig.omega_sq(&facing, 1.0).ok()?;
        if w2 <= 0.0 {
            return None;
        }
        out[k] = w2.sqrt();
    }
    Some(out)
}

fn calibration_residuals(
    rig: &MagneticModel,
    data: &CalibrationData,
    theta: &[f64; 3],
) -> Option<DVector<f64>> {
    let trial = rig.with_constants(theta[0].exp(), theta[1].exp(), theta[2].exp().powi(2)).ok()?;
    let model = calibration_omegas(&trial, data.gaps())?;
    let measured = DVector::from_column_slice(data.omegas());
    Some(model - measured)
}

/// Fits `(C, n, omega0)` to frequency-vs-gap data by damped Gauss-Newton on
/// the log parameters (which keeps all three positive), with a central
/// finite-difference Jacobian. Steps are accepted only if the residual norm
/// does not increase; the damping factor grows until a step is acceptable
/// and shrinks after success.
pub fn calibrate(
    rig: &MagneticModel,
    data: &CalibrationData,
    config: &CalibrationConfig,
) -> Result<CalibrationResult, MagneticError> {
    let (c0, n0, w0) = match config.initial {
        Some(initial) => initial,
        None => derive_initial_guess(rig, data),
    };
    if !(c0 > 0.0 && n0 > 0.0 && w0 > 0.0) {
        return Err(MagneticError::BadInitialGuess);
    }
    let mut theta = [c0.ln(), n0.ln(), w0.ln()];
    let mut residual = calibration_residuals(rig, data, &theta)
        .ok_or(MagneticError::BadInitialGuess)?;
    let mut norm = residual.norm();
    let initial_residual_norm = norm;
    let mut history = vec![norm];
    let mut mu = 1e-3;

    for iter in 1..=config.max_iter {
        let jacobian = calibration_jacobian(rig, data, &theta)
            .ok_or(MagneticError::NoProgress { iterations: iter, residual: norm })?;
        let jtj = jacobian.transpose() * &jacobian;
        let jtr = jacobian.transpose() * &residual;
        let mut step_norm = f64::INFINITY;
        let mut accepted = false;
        while mu < 1e15 {
            let mut damped = jtj.clone();
            for i in 0..3 {
                damped[(i, i)] += mu * jtj[(i, i)].max(1e-30);
            }
            let Some(chol) = damped.cholesky() else {
                mu *= 8.0;
                continue;
            };
            let delta = chol.solve(&(-jtr.clone()));
            let trial = [theta[0] + delta[0], theta[1] + delta[1], theta[2] + delta[2]];
            match calibration_residuals(rig, data, &trial) {
                Some(r) if r.norm() <= norm => {
                    theta = trial;
                    norm = r.norm();
                    residual = r;
                    history.push(norm);
                    step_norm = delta.norm();
                    mu = (mu * 0.25).max(1e-14);
                    accepted = true;
                }
                _ => mu *= 8.0,
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(MagneticError::NoProgress { iterations: iter, residual: norm });
        }
        let theta_norm = (theta[0].powi(2) + theta[1].powi(2) + theta[2].powi(2)).sqrt();
        if step_norm <= config.tol * (theta_norm + config.tol) {
            return Ok(CalibrationResult {
                c: theta[0].exp(),
                n: theta[1].exp(),
                omega0: theta[2].exp(),
                residual_norm: norm,
                initial_residual_norm,
                iterations: iter,
                objective_history: history,
            });
        }
    }
    Err(MagneticError::NoProgress { iterations: config.max_iter, residual: norm })
}

/// Data-driven starting point: the base frequency slightly above the largest
/// measurement, a mid-range power, and the strength that reproduces the
/// strongest measured shift at that power (the model is linear in `C`).
fn derive_initial_guess(rig: &MagneticModel, data: &CalibrationData) -> (f64, f64, f64) {
    let omega_max = data.omegas().iter().cloned().fold(0.0, f64::max);
    let omega0 = 1.02 * omega_max;
    let n0 = 4.0;
    let (closest_idx, _) = data
        .gaps()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("calibration data is nonempty");
    let measured_shift = data.omegas()[closest_idx].powi(2) - omega0 * omega0;
    let unit = rig
        .with_constants(1.0, n0, omega0 * omega0)
        .ok()
        .and_then(|m| {
            let facing: Vec<(f64, f64)> = m
                .beam_magnets()
                .positions()
                .iter()
                .map(|&x| (x, data.gaps()[closest_idx]))
                .collect();
            m.delta_omega_sq(&facing, 1.0).ok()
        })
        .unwrap_or(-1.0);
    let c0 = if unit < 0.0 && measured_shift < 0.0 { measured_shift / unit } else { 1.0 };
    (c0.max(1e-12), n0, omega0)
}

fn calibration_jacobian(
    rig: &MagneticModel,
    data: &CalibrationData,
    theta: &[f64; 3],
) -> Option<DMatrix<f64>> {
    let h = 1e-6;
    let mut jacobian = DMatrix::zeros(data.len(), 3);
    for i in 0..3 {
        let mut plus = *theta;
        let mut minus = *theta;
        plus[i] += h;
        minus[i] -= h;
        let rp = calibration_residuals(rig, data, &plus)?;
        let rm = calibration_residuals(rig, data, &minus)?;
        for k in 0..data.len() {
            jacobian[(k, i)] = (rp[k] - rm[k]) / (2.0 * h);
        }
    }
    Some(jacobian)
}
