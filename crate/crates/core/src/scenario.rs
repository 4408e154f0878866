//! Scenario configurations and end-to-end reconstruction drivers.
//!
//! A scenario bundles everything one run needs: beam geometry, interaction
//! constants, the surface under test, per-phase scan tuning, solver settings,
//! and optional measurement noise. Two kinds exist: a grooved surface probed
//! with the distributed attraction model, and a magnet board read through the
//! discrete dipole model. Both simulate their own synthetic readings, so
//! reconstruction quality can be scored against the known truth.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{BeamError, BeamModel, ModalGrid};
use crate::harness::{
    apply_noise, ensure_converged, error_report, reconstruct_phase, simulate_scan, ErrorReport,
    HarnessError, NoiseSpec, PhaseName, PhaseReport, ReconstructionReport, ScanPhase,
};
use crate::magnetic::{MagnetArray, MagneticError, MagneticModel};
use crate::solver::{
    run_mbsa, IterationTrace, MeasurementSet, ModelError, ModelPair, SolverConfig, SolverError,
    SolverStatus,
};
use crate::topography::{
    assemble, Contour, GrooveSpec, Orientation, PlacedSection, Section, TopographyError,
};
use crate::vdw::{
    builtin_materials, delta_omega_sq_scene, mix_constants, simplified_forward, simplified_invert,
    InteractionConstants, Placement, SimplifiedContext,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("interaction needs either a material pair or explicit constants")]
    MissingInteraction,
    #[error("material pair and explicit constants are mutually exclusive")]
    AmbiguousInteraction,
    #[error("unknown material {0:?}")]
    UnknownMaterial(String),
    #[error("{phase} phase: {reason}")]
    BadPhase { phase: PhaseName, reason: String },
    #[error("magnet board needs at least two magnets, got {0}")]
    BoardTooSmall(usize),
    #[error("magnet board parameter {name} out of range: {value}")]
    BadBoard { name: &'static str, value: f64 },
    #[error("{part} part: surrogate slope has the wrong sign at the nominal gap")]
    DegenerateSurrogate { part: MagneticPart },
    #[error("{part} part did not converge: {status} after {iterations} iterations")]
    MagneticNotConverged { part: MagneticPart, status: SolverStatus, iterations: usize },
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Shape(#[from] TopographyError),
    #[error(transparent)]
    Magnetic(#[from] MagneticError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    /// A phase failed mid-run; reports for the phases that did finish ride
    /// along so partial results can still be written out.
    #[error("{source}")]
    PhaseFailed {
        #[source]
        source: Box<ScenarioError>,
        completed: Vec<PhaseReport>,
    },
    #[error("{part} part: {source}")]
    MagneticPartFailed {
        part: MagneticPart,
        #[source]
        source: Box<ScenarioError>,
    },
}

/// Top-level scenario file: the `kind` tag picks the physics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioConfig {
    VdwGroove(GrooveConfig),
    Magnetic(MagneticConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub length: f64,
    pub rho_a: f64,
    pub ei: f64,
    #[serde(default = "default_mode_index")]
    pub mode_index: u32,
}

fn default_mode_index() -> u32 {
    1
}

impl BeamConfig {
    pub fn build(&self) -> Result<BeamModel, BeamError> {
        BeamModel::new(self.length, self.rho_a, self.ei, self.mode_index)
    }
}

/// Source of the attraction constants: a built-in material pair (mixed with
/// the geometric rule) or explicit `C` and `n`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionConfig {
    pub materials: Option<[String; 2]>,
    pub c: Option<f64>,
    pub n: Option<f64>,
    pub gap_floor: Option<f64>,
}

impl InteractionConfig {
    pub fn resolve(&self) -> Result<InteractionConstants, ScenarioError> {
        match (&self.materials, self.c, self.n) {
            (Some([a, b]), None, None) => {
                let table = builtin_materials();
                let ma = *table.get(a.as_str()).ok_or_else(|| {
                    ScenarioError::UnknownMaterial(a.clone())
                })?;
                let mb = *table.get(b.as_str()).ok_or_else(|| {
                    ScenarioError::UnknownMaterial(b.clone())
                })?;
                let mut constants = InteractionConstants::from_lj(mix_constants(ma, mb));
                if let Some(floor) = self.gap_floor {
                    constants = InteractionConstants::new(constants.c, constants.n, floor)?;
                }
                Ok(constants)
            }
            (None, Some(c), Some(n)) => {
                Ok(InteractionConstants::new(c, n, self.gap_floor.unwrap_or(1e-4))?)
            }
            (None, None, None) => Err(ScenarioError::MissingInteraction),
            _ => Err(ScenarioError::AmbiguousInteraction),
        }
    }
}

/// Per-phase scan tuning: how many segments the phase resolves, how far the
/// probe stands off the nominal surface, and an optional relaxation override.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseTuning {
    pub segments: usize,
    pub standoff: f64,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSettings {
    pub outer_surface: PhaseTuning,
    pub lower_sidewall: PhaseTuning,
    pub upper_sidewall: PhaseTuning,
    pub base: PhaseTuning,
}

impl PhaseSettings {
    fn get(&self, name: PhaseName) -> PhaseTuning {
        match name {
            PhaseName::OuterSurface => self.outer_surface,
            PhaseName::LowerSidewall => self.lower_sidewall,
            PhaseName::UpperSidewall => self.upper_sidewall,
            PhaseName::Base => self.base,
        }
    }
}

/// Serializable mirror of [`SolverConfig`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub check_condition: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let config = SolverConfig::default();
        Self {
            beta: config.beta,
            tol: config.tol,
            max_iter: config.max_iter,
            fd_step: config.fd_step,
            check_condition: config.check_condition,
        }
    }
}

impl SolverSettings {
    pub fn to_config(self) -> SolverConfig {
        SolverConfig {
            beta: self.beta,
            tol: self.tol,
            max_iter: self.max_iter,
            fd_step: self.fd_step,
            check_condition: self.check_condition,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSettings {
    /// Integration samples per contour edge.
    pub resolution: usize,
    /// Intervals of the modal projection grid along the beam.
    pub beam_intervals: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { resolution: 32, beam_intervals: 128 }
    }
}

fn default_bin_width() -> f64 {
    0.5
}

/// Grooved-surface scenario: four scan phases walk the outer surface, both
/// sidewalls, and the base, reusing each finished phase as background
/// geometry for the next.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrooveConfig {
    pub beam: BeamConfig,
    pub interaction: InteractionConfig,
    pub groove: GrooveSpec,
    pub phases: PhaseSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
}

/// Magnet-board scenario, in millimetre units throughout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticConfig {
    pub beam: BeamConfig,
    pub constants: MagneticConstantsConfig,
    pub beam_magnets: MagnetRowConfig,
    pub board: BoardConfig,
    #[serde(default = "magnetic_solver_default")]
    pub solver: SolverSettings,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
}

/// The triangular surrogate tracks the measured magnets one by one, so the
/// relaxation can run at full strength; the residual tolerance is sized for
/// squared-frequency readings in the thousands.
fn magnetic_solver_default() -> SolverSettings {
    SolverSettings { beta: 1.0, tol: 1e-3, max_iter: 300, ..SolverSettings::default() }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticConstantsConfig {
    pub c: f64,
    pub n: f64,
    /// Free natural frequency in rad/s.
    pub omega0: f64,
    #[serde(default = "default_magnet_gap_floor")]
    pub gap_floor: f64,
}

fn default_magnet_gap_floor() -> f64 {
    1.0
}

/// Row of magnets glued to the beam, the last one at the tip.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetRowConfig {
    pub count: usize,
    pub spacing: f64,
    #[serde(default = "default_polarity")]
    pub polarity: f64,
}

fn default_polarity() -> f64 {
    1.0
}

/// Magnet board under test: `count` magnets at `spacing`, their profile a
/// sinusoid of the given amplitude around the nominal distance. The
/// wavelength defaults to the board span.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardConfig {
    pub count: usize,
    pub spacing: f64,
    pub nominal: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub wavelength: Option<f64>,
}

/// Contour layout of one scan run: where its first segment starts along the
/// free coordinate and how many segments it holds.
#[derive(Debug, Clone, Copy)]
struct Run {
    free_start: f64,
    count: usize,
}

/// Everything one phase needs: the scan design, a beam placement per
/// measurement, the contour layout of its runs, the closed-form context, and
/// the synthetic truth.
#[derive(Debug, Clone)]
struct PhasePlan {
    phase: ScanPhase,
    placements: Vec<Placement>,
    runs: Vec<Run>,
    ctx: SimplifiedContext,
    beta: Option<f64>,
    /// Sidewall readings couple strongly to the shallower bands the beam has
    /// already passed, so their surrogate tracks those couplings in a
    /// lower-triangular slope matrix instead of a single scalar gain.
    triangular: bool,
    /// Section values of the true surface, one per segment in scan order.
    truth_values: Vec<f64>,
    /// Solver coordinates of the true surface.
    truth_g: Vec<f64>,
    /// Solver coordinates of the nominal (standoff-distance) surface used to
    /// scale the surrogate.
    nominal_g: Vec<f64>,
}

/// A built groove scenario, ready to simulate and reconstruct.
#[derive(Debug)]
pub struct GrooveScenario {
    beam: BeamModel,
    constants: InteractionConstants,
    groove: GrooveSpec,
    grid: ModalGrid,
    resolution: usize,
    solver: SolverConfig,
    noise: Option<NoiseSpec>,
    bin_width: f64,
    plans: Vec<PhasePlan>,
}

impl GrooveScenario {
    pub fn build(config: &GrooveConfig) -> Result<Self, ScenarioError> {
        let beam = config.beam.build()?;
        let constants = config.interaction.resolve()?;
        let groove = GrooveSpec::new(
            config.groove.outer_level,
            config.groove.mouth_position,
            config.groove.width,
            config.groove.depth,
        )?;
        let solver = config.solver.to_config();
        solver.validate()?;
        if !(config.bin_width.is_finite() && config.bin_width > 0.0) {
            return Err(HarnessError::BadBinWidth(config.bin_width).into());
        }
        let grid = ModalGrid::new(&beam, config.quadrature.beam_intervals.max(16));
        let resolution = config.quadrature.resolution.max(8);

        let mut plans = Vec::with_capacity(PhaseName::EXECUTION_ORDER.len());
        for name in PhaseName::EXECUTION_ORDER {
            let tuning = config.phases.get(name);
            check_tuning(name, tuning, &constants)?;
            let plan = match name {
                PhaseName::OuterSurface => outer_plan(&beam, &groove, tuning, &constants)?,
                PhaseName::LowerSidewall => {
                    sidewall_plan(&beam, &groove, tuning, &constants, name)?
                }
                PhaseName::UpperSidewall => {
                    sidewall_plan(&beam, &groove, tuning, &constants, name)?
                }
                PhaseName::Base => base_plan(&beam, &groove, tuning, &constants)?,
            };
            plans.push(plan);
        }
        Ok(Self {
            beam,
            constants,
            groove,
            grid,
            resolution,
            solver,
            noise: config.noise,
            bin_width: config.bin_width,
            plans,
        })
    }

    pub fn groove(&self) -> &GrooveSpec {
        &self.groove
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    /// True section values for one phase, in scan order.
    pub fn truth_values(&self, name: PhaseName) -> &[f64] {
        &self.plans[phase_index(name)].truth_values
    }

    /// Staircase contours for one phase from solver coordinates, one contour
    /// per scan run.
    fn contours_for(&self, idx: usize, x: &[f64], g: &[f64]) -> Result<Vec<Contour>, ModelError> {
        let plan = &self.plans[idx];
        let mut pairs: Vec<(f64, f64)> =
            x.iter().zip(g).map(|(&xi, &gi)| (xi, plan.phase.value_of(gi))).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let values: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let orientation = plan.phase.orientation();
        let depth = plan.phase.section_depth();
        let width = plan.phase.segment_width();
        let mut contours = Vec::with_capacity(plan.runs.len());
        let mut offset = 0;
        for run in &plan.runs {
            let section =
                Section::new(orientation, values[offset..offset + run.count].to_vec(), width, depth)
                    .map_err(|e| ModelError::Domain { index: 0, reason: e.to_string() })?;
            let placed = PlacedSection {
                section,
                zeta_start: 0.0,
                free_start: run.free_start,
                free_dir: 1.0,
            };
            let contour = assemble(std::slice::from_ref(&placed))
                .map_err(|e| ModelError::Domain { index: 0, reason: e.to_string() })?;
            contours.push(contour);
            offset += run.count;
        }
        Ok(contours)
    }

    /// Full forward responses of one phase's own staircase in scan order,
    /// without backgrounds.
    fn own_readings(&self, idx: usize, g: &[f64]) -> Result<Vec<f64>, ModelError> {
        let plan = &self.plans[idx];
        let contours = self.contours_for(idx, plan.phase.positions(), g)?;
        plan.placements
            .iter()
            .enumerate()
            .map(|(i, placement)| {
                delta_omega_sq_scene(
                    &contours,
                    &self.constants,
                    placement,
                    &self.grid,
                    self.beam.length(),
                    self.resolution,
                )
                .map_err(|e| relabel(e, i))
            })
            .collect()
    }

    /// Scalar surrogate calibration: the median ratio of the full model to
    /// the closed-form law over the nominal staircase.
    fn scalar_gain(&self, idx: usize) -> Result<f64, ScenarioError> {
        let plan = &self.plans[idx];
        let name = plan.phase.name();
        let full = self.own_readings(idx, &plan.nominal_g).map_err(ScenarioError::Model)?;
        let mut ratios = Vec::with_capacity(full.len());
        for (i, &fi) in full.iter().enumerate() {
            let ctx = ctx_for(plan, i);
            let simplified =
                simplified_forward(plan.nominal_g[i], plan.phase.orientation(), &ctx)
                    .map_err(ScenarioError::Model)?;
            if !(fi < 0.0 && simplified < 0.0) {
                return Err(ScenarioError::BadPhase {
                    phase: name,
                    reason: format!(
                        "nominal response must be attractive, got full {fi}, \
                         simplified {simplified} at measurement {i}"
                    ),
                });
            }
            ratios.push(fi / simplified);
        }
        Ok(median(&mut ratios))
    }

    /// Triangular surrogate calibration: the full model's slopes at the
    /// nominal staircase, expressed against the closed-form law's slope per
    /// band and restricted to the bands already scanned.
    fn triangular_gamma(&self, idx: usize) -> Result<Vec<Vec<f64>>, ScenarioError> {
        let plan = &self.plans[idx];
        let name = plan.phase.name();
        let n = plan.nominal_g.len();
        let orientation = plan.phase.orientation();
        let mut jac = vec![vec![0.0; n]; n];
        let mut slopes = vec![0.0; n];
        for j in 0..n {
            let step = self.solver.fd_step * plan.nominal_g[j].max(1.0);
            let mut plus = plan.nominal_g.clone();
            let mut minus = plan.nominal_g.clone();
            plus[j] += step;
            minus[j] -= step;
            let fp = self.own_readings(idx, &plus).map_err(ScenarioError::Model)?;
            let fm = self.own_readings(idx, &minus).map_err(ScenarioError::Model)?;
            for i in 0..n {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * step);
            }
            let ctx = ctx_for(plan, j);
            let up = simplified_forward(plan.nominal_g[j] + step, orientation, &ctx)
                .map_err(ScenarioError::Model)?;
            let down = simplified_forward(plan.nominal_g[j] - step, orientation, &ctx)
                .map_err(ScenarioError::Model)?;
            slopes[j] = (up - down) / (2.0 * step);
        }
        let mut gamma = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                gamma[i][j] = jac[i][j] / slopes[j];
            }
            if !(gamma[i][i].is_finite() && gamma[i][i] > 0.0) {
                return Err(ScenarioError::BadPhase {
                    phase: name,
                    reason: format!(
                        "surrogate slope degenerates at measurement {i}: {}",
                        gamma[i][i]
                    ),
                });
            }
        }
        Ok(gamma)
    }

    /// Builds the solver model pair for one phase against fixed background
    /// contours. Simulation pairs only exercise the full model; for
    /// reconstruction the surrogate side is calibrated at the nominal
    /// standoff as well.
    fn phase_pair<'a>(
        &'a self,
        idx: usize,
        backgrounds: &[Contour],
        for_reconstruction: bool,
    ) -> Result<GroovePair<'a>, ScenarioError> {
        let plan = &self.plans[idx];
        let name = plan.phase.name();
        let mut bg_shift = Vec::with_capacity(plan.placements.len());
        for placement in &plan.placements {
            let shift = delta_omega_sq_scene(
                backgrounds,
                &self.constants,
                placement,
                &self.grid,
                self.beam.length(),
                self.resolution,
            )
            .map_err(|source| ScenarioError::BadPhase {
                phase: name,
                reason: format!("background integration failed: {source}"),
            })?;
            bg_shift.push(shift);
        }

        let surrogate = if !for_reconstruction {
            GrooveSurrogate::FullOnly
        } else if plan.triangular {
            GrooveSurrogate::Triangular(self.triangular_gamma(idx)?)
        } else {
            GrooveSurrogate::Scalar(self.scalar_gain(idx)?)
        };
        Ok(GroovePair { scenario: self, idx, bg_shift, surrogate })
    }

    /// Runs every phase in execution order: simulate readings on the true
    /// geometry, reconstruct against the already-reconstructed backgrounds,
    /// and require convergence before moving on.
    fn run_phases(&self) -> Result<Vec<PhaseReport>, ScenarioError> {
        let mut reports: Vec<PhaseReport> = Vec::new();
        let mut truth_backgrounds: Vec<Contour> = Vec::new();
        let mut recon_backgrounds: Vec<Contour> = Vec::new();
        for (idx, plan) in self.plans.iter().enumerate() {
            let started = Instant::now();
            let outcome = self.run_one_phase(idx, &truth_backgrounds, &recon_backgrounds);
            match outcome {
                Ok((section, trace, final_g)) => {
                    reports.push(PhaseReport {
                        name: plan.phase.name(),
                        section,
                        trace,
                        duration: started.elapsed(),
                    });
                    let mut truth = self
                        .contours_for(idx, plan.phase.positions(), &plan.truth_g)
                        .map_err(ScenarioError::Model)?;
                    truth_backgrounds.append(&mut truth);
                    let mut recon = self
                        .contours_for(idx, plan.phase.positions(), &final_g)
                        .map_err(ScenarioError::Model)?;
                    recon_backgrounds.append(&mut recon);
                }
                Err(e) => {
                    return Err(ScenarioError::PhaseFailed {
                        source: Box::new(e),
                        completed: reports,
                    })
                }
            }
        }
        Ok(reports)
    }

    fn run_one_phase(
        &self,
        idx: usize,
        truth_backgrounds: &[Contour],
        recon_backgrounds: &[Contour],
    ) -> Result<(Section, IterationTrace, Vec<f64>), ScenarioError> {
        let plan = &self.plans[idx];
        let sim_pair = self.phase_pair(idx, truth_backgrounds, false)?;
        let noise = self.noise.map(|spec| NoiseSpec {
            seed: spec.seed.wrapping_add(idx as u64),
            ..spec
        });
        let measurements =
            simulate_scan(&plan.phase, |x| sim_pair.full_forward(&plan.truth_g, x), noise)?;

        let pair = self.phase_pair(idx, recon_backgrounds, true)?;
        let config = SolverConfig {
            beta: plan.beta.unwrap_or(self.solver.beta),
            ..self.solver
        };
        let (section, trace) = reconstruct_phase(&measurements, &pair, &config)?;
        ensure_converged(plan.phase.name(), &trace)?;
        let final_g = trace.final_g().to_vec();
        Ok((section, trace, final_g))
    }

    /// Full scan campaign: all four phases, the assembled groove contour, and
    /// segment errors against the known truth.
    pub fn reconstruct_full(&self) -> Result<ReconstructionReport, ScenarioError> {
        let started = Instant::now();
        let phases = self.run_phases()?;
        let contour = self.assemble_reconstruction(&phases)?;
        let mut estimates = Vec::new();
        let mut truth = Vec::new();
        for (plan, report) in self.plans.iter().zip(&phases) {
            estimates.extend_from_slice(report.section.values());
            truth.extend_from_slice(&plan.truth_values);
        }
        let errors = error_report(&estimates, &truth, self.bin_width)?;
        Ok(ReconstructionReport {
            phases,
            contour,
            errors: Some(errors),
            total_duration: started.elapsed(),
        })
    }

    /// Joins the four reconstructed sections into one groove contour, walking
    /// the surface from the left outer run to the right one.
    fn assemble_reconstruction(
        &self,
        phases: &[PhaseReport],
    ) -> Result<Contour, ScenarioError> {
        let top = self.groove.outer_level;
        let a = self.groove.mouth_position;
        let b = a + self.groove.width;
        let bot = top + self.groove.depth;
        let depth = self.groove.depth;

        let outer = &phases[phase_index(PhaseName::OuterSurface)].section;
        let lower = &phases[phase_index(PhaseName::LowerSidewall)].section;
        let upper = &phases[phase_index(PhaseName::UpperSidewall)].section;
        let base = &phases[phase_index(PhaseName::Base)].section;

        let half = outer.values().len() / 2;
        let upper_reversed: Vec<f64> = upper.values().iter().rev().copied().collect();
        let upper_down = Section::new(
            Orientation::Parallel,
            upper_reversed,
            upper.segment_width(),
            upper.depth(),
        )?;

        let placed = [
            PlacedSection {
                section: outer.slice(0..half)?,
                zeta_start: 0.0,
                free_start: 0.0,
                free_dir: 1.0,
            },
            PlacedSection {
                section: lower.clone(),
                zeta_start: a,
                free_start: top,
                free_dir: 1.0,
            },
            PlacedSection {
                section: base.clone(),
                zeta_start: a + depth,
                free_start: a,
                free_dir: 1.0,
            },
            PlacedSection {
                section: upper_down,
                zeta_start: a + depth + self.groove.width,
                free_start: bot,
                free_dir: -1.0,
            },
            PlacedSection {
                section: outer.slice(half..outer.values().len())?,
                zeta_start: a + 2.0 * depth + self.groove.width,
                free_start: b,
                free_dir: 1.0,
            },
        ];
        Ok(assemble(&placed)?)
    }
}

fn phase_index(name: PhaseName) -> usize {
    PhaseName::EXECUTION_ORDER
        .iter()
        .position(|&n| n == name)
        .expect("phase in execution order")
}

fn ctx_for(plan: &PhasePlan, i: usize) -> SimplifiedContext {
    let mut ctx = plan.ctx;
    if let Some(depths) = plan.phase.depths() {
        ctx.depth = depths[i];
    }
    ctx
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn check_tuning(
    name: PhaseName,
    tuning: PhaseTuning,
    constants: &InteractionConstants,
) -> Result<(), ScenarioError> {
    if tuning.segments < 2 {
        return Err(ScenarioError::BadPhase {
            phase: name,
            reason: format!("needs at least two segments, got {}", tuning.segments),
        });
    }
    if !(tuning.standoff.is_finite() && tuning.standoff > constants.gap_floor) {
        return Err(ScenarioError::BadPhase {
            phase: name,
            reason: format!(
                "standoff {} must exceed the interaction gap floor {}",
                tuning.standoff, constants.gap_floor
            ),
        });
    }
    if let Some(beta) = tuning.beta {
        if !(beta.is_finite() && beta > 0.0 && beta < 2.0) {
            return Err(ScenarioError::BadPhase {
                phase: name,
                reason: format!("relaxation factor {beta} outside (0, 2)"),
            });
        }
    }
    Ok(())
}

/// Outer-surface phase: the probe hangs over the flat top, tip leading and
/// body trailing away from the groove mouth, half the segments on each side.
fn outer_plan(
    beam: &BeamModel,
    groove: &GrooveSpec,
    tuning: PhaseTuning,
    constants: &InteractionConstants,
) -> Result<PhasePlan, ScenarioError> {
    let name = PhaseName::OuterSurface;
    let n = tuning.segments;
    if n % 2 != 0 {
        return Err(ScenarioError::BadPhase {
            phase: name,
            reason: format!("segment count {n} must be even to split over both outer runs"),
        });
    }
    let top = groove.outer_level;
    let a = groove.mouth_position;
    let b = a + groove.width;
    let l = beam.length();
    let half = n / 2;
    let width = a / half as f64;
    let level = top - tuning.standoff;

    let mut positions = Vec::with_capacity(n);
    let mut placements = Vec::with_capacity(n);
    for k in 0..half {
        let pos = (k as f64 + 0.5) * width;
        positions.push(pos);
        placements.push(place(name, (level, pos - l), (0.0, 1.0))?);
    }
    for k in 0..half {
        let pos = b + (k as f64 + 0.5) * width;
        positions.push(pos);
        placements.push(place(name, (level, pos + l), (0.0, -1.0))?);
    }

    let phase = ScanPhase::new(
        name,
        Orientation::Perpendicular,
        positions,
        None,
        width,
        level - l,
        1.0,
    )?;
    Ok(PhasePlan {
        phase,
        placements,
        runs: vec![Run { free_start: 0.0, count: half }, Run { free_start: b, count: half }],
        ctx: context(beam, constants, 2.0 * a, n),
        beta: tuning.beta,
        triangular: false,
        truth_values: vec![top; n],
        truth_g: vec![l + tuning.standoff; n],
        nominal_g: vec![l + tuning.standoff; n],
    })
}

/// Sidewall phase: the probe dips tip-first into the mouth alongside one
/// wall, reading the wall's lateral position band by band.
fn sidewall_plan(
    beam: &BeamModel,
    groove: &GrooveSpec,
    tuning: PhaseTuning,
    constants: &InteractionConstants,
    name: PhaseName,
) -> Result<PhasePlan, ScenarioError> {
    if tuning.standoff >= groove.width {
        return Err(ScenarioError::BadPhase {
            phase: name,
            reason: format!(
                "standoff {} must stay inside the groove width {}",
                tuning.standoff, groove.width
            ),
        });
    }
    let top = groove.outer_level;
    let a = groove.mouth_position;
    let b = a + groove.width;
    let l = beam.length();
    let n = tuning.segments;
    let width = groove.depth / n as f64;
    let (wall, lateral, scale) = match name {
        PhaseName::LowerSidewall => (a, a + tuning.standoff, -1.0),
        PhaseName::UpperSidewall => (b, b - tuning.standoff, 1.0),
        _ => unreachable!("sidewall plan called for {name}"),
    };

    let mut positions = Vec::with_capacity(n);
    let mut depths = Vec::with_capacity(n);
    let mut placements = Vec::with_capacity(n);
    for k in 0..n {
        let pos = top + (k as f64 + 0.5) * width;
        positions.push(pos);
        depths.push(pos - top);
        placements.push(place(name, (pos - l, lateral), (1.0, 0.0))?);
    }

    let phase = ScanPhase::new(
        name,
        Orientation::Parallel,
        positions,
        Some(depths),
        width,
        lateral,
        scale,
    )?;
    Ok(PhasePlan {
        phase,
        placements,
        runs: vec![Run { free_start: top, count: n }],
        ctx: context(beam, constants, groove.depth, n),
        beta: tuning.beta,
        triangular: true,
        truth_values: vec![wall; n],
        truth_g: vec![tuning.standoff; n],
        nominal_g: vec![tuning.standoff; n],
    })
}

/// Base phase: the probe runs along the groove floor, body trailing toward
/// the centre so it never crowds the near wall.
fn base_plan(
    beam: &BeamModel,
    groove: &GrooveSpec,
    tuning: PhaseTuning,
    constants: &InteractionConstants,
) -> Result<PhasePlan, ScenarioError> {
    let name = PhaseName::Base;
    let n = tuning.segments;
    if n % 2 != 0 {
        return Err(ScenarioError::BadPhase {
            phase: name,
            reason: format!("segment count {n} must be even to split the trail direction"),
        });
    }
    let l = beam.length();
    if l > groove.width / 2.0 {
        return Err(ScenarioError::BadPhase {
            phase: name,
            reason: format!(
                "beam length {l} exceeds half the groove width {}; the body cannot trail \
                 clear of the far wall",
                groove.width
            ),
        });
    }
    let a = groove.mouth_position;
    let bot = groove.outer_level + groove.depth;
    let width = groove.width / n as f64;
    let level = bot - tuning.standoff;

    let mut positions = Vec::with_capacity(n);
    let mut placements = Vec::with_capacity(n);
    for k in 0..n {
        let pos = a + (k as f64 + 0.5) * width;
        positions.push(pos);
        let placement = if k < n / 2 {
            place(name, (level, pos + l), (0.0, -1.0))?
        } else {
            place(name, (level, pos - l), (0.0, 1.0))?
        };
        placements.push(placement);
    }

    let phase = ScanPhase::new(
        name,
        Orientation::Perpendicular,
        positions,
        None,
        width,
        level - l,
        1.0,
    )?;
    Ok(PhasePlan {
        phase,
        placements,
        runs: vec![Run { free_start: a, count: n }],
        ctx: context(beam, constants, groove.width, n),
        beta: tuning.beta,
        triangular: false,
        truth_values: vec![bot; n],
        truth_g: vec![l + tuning.standoff; n],
        nominal_g: vec![l + tuning.standoff; n],
    })
}

fn place(
    name: PhaseName,
    origin: (f64, f64),
    axis: (f64, f64),
) -> Result<Placement, ScenarioError> {
    Placement::new(origin, axis).map_err(|source| ScenarioError::BadPhase {
        phase: name,
        reason: format!("invalid probe placement: {source}"),
    })
}

fn context(
    beam: &BeamModel,
    constants: &InteractionConstants,
    arc: f64,
    segments: usize,
) -> SimplifiedContext {
    SimplifiedContext {
        c: constants.c,
        n: constants.n,
        l_top: arc,
        segments,
        phi_bar: beam.phi_bar(),
        rho_a: beam.rho_a(),
        l_beam: beam.length(),
        depth: 0.0,
    }
}

/// Surrogate side of a groove phase pair. The scalar form scales the
/// closed-form law once; the triangular form additionally tracks how each
/// reading leans on the bands scanned before it, so its inverse peels the
/// staircase off band by band.
enum GrooveSurrogate {
    /// Simulation-only pair; the surrogate side is never calibrated.
    FullOnly,
    Scalar(f64),
    Triangular(Vec<Vec<f64>>),
}

/// Solver model pair for one groove phase: the full side integrates the
/// phase's staircase plus frozen background contours; the simplified side is
/// the closed-form law calibrated at the nominal standoff and shifted by the
/// same background, so its inverse acts on the phase's own share of a
/// reading.
struct GroovePair<'a> {
    scenario: &'a GrooveScenario,
    idx: usize,
    bg_shift: Vec<f64>,
    surrogate: GrooveSurrogate,
}

impl GroovePair<'_> {
    fn plan(&self) -> &PhasePlan {
        &self.scenario.plans[self.idx]
    }

    fn check_shape(&self, g: &[f64], x: &[f64]) -> Result<(), ModelError> {
        let expected = self.plan().phase.len();
        if g.len() != expected || x.len() != expected {
            return Err(ModelError::Dimension { expected, got: g.len().min(x.len()) });
        }
        Ok(())
    }

    /// Closed-form values for every band, one per measurement context.
    fn closed_values(&self, g: &[f64]) -> Result<Vec<f64>, ModelError> {
        let plan = self.plan();
        g.iter()
            .enumerate()
            .map(|(j, &gj)| {
                let ctx = ctx_for(plan, j);
                simplified_forward(gj, plan.phase.orientation(), &ctx)
                    .map_err(|e| relabel(e, j))
            })
            .collect()
    }
}

impl ModelPair for GroovePair<'_> {
    fn full_forward(&self, g: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_shape(g, x)?;
        let contours = self.scenario.contours_for(self.idx, x, g)?;
        let plan = self.plan();
        let mut out = Vec::with_capacity(g.len());
        for (i, placement) in plan.placements.iter().enumerate() {
            let shift = delta_omega_sq_scene(
                &contours,
                &self.scenario.constants,
                placement,
                &self.scenario.grid,
                self.scenario.beam.length(),
                self.scenario.resolution,
            )
            .map_err(|e| relabel(e, i))?;
            out.push(shift + self.bg_shift[i]);
        }
        Ok(out)
    }

    fn simplified_forward(&self, g: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_shape(g, x)?;
        match &self.surrogate {
            GrooveSurrogate::FullOnly => Err(ModelError::Domain {
                index: 0,
                reason: "surrogate side of a simulation pair is not calibrated".into(),
            }),
            GrooveSurrogate::Scalar(gain) => {
                let closed = self.closed_values(g)?;
                Ok(closed
                    .iter()
                    .zip(&self.bg_shift)
                    .map(|(c, bg)| c * gain + bg)
                    .collect())
            }
            GrooveSurrogate::Triangular(gamma) => {
                let closed = self.closed_values(g)?;
                let mut out = Vec::with_capacity(g.len());
                for i in 0..g.len() {
                    let mut acc = self.bg_shift[i];
                    for (j, &cj) in closed.iter().enumerate().take(i + 1) {
                        acc += gamma[i][j] * cj;
                    }
                    out.push(acc);
                }
                Ok(out)
            }
        }
    }

    fn simplified_inverse(&self, omega_sq: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_shape(omega_sq, x)?;
        let plan = self.plan();
        match &self.surrogate {
            GrooveSurrogate::FullOnly => Err(ModelError::Domain {
                index: 0,
                reason: "surrogate side of a simulation pair is not calibrated".into(),
            }),
            GrooveSurrogate::Scalar(gain) => omega_sq
                .iter()
                .enumerate()
                .map(|(i, &wi)| {
                    let ctx = ctx_for(plan, i);
                    let own = (wi - self.bg_shift[i]) / gain;
                    simplified_invert(own, plan.phase.orientation(), &ctx)
                        .map_err(|e| relabel(e, i))
                })
                .collect(),
            GrooveSurrogate::Triangular(gamma) => {
                let mut closed = Vec::with_capacity(omega_sq.len());
                let mut g = Vec::with_capacity(omega_sq.len());
                for (i, &wi) in omega_sq.iter().enumerate() {
                    let mut own = wi - self.bg_shift[i];
                    for (j, &cj) in closed.iter().enumerate() {
                        own -= gamma[i][j] * cj;
                    }
                    let ci = own / gamma[i][i];
                    if !(ci.is_finite() && ci < 0.0) {
                        return Err(ModelError::Domain {
                            index: i,
                            reason: "reading leaves no attractive share for this band after \
                                     removing the bands scanned before it"
                                .into(),
                        });
                    }
                    let ctx = ctx_for(plan, i);
                    let gi = simplified_invert(ci, plan.phase.orientation(), &ctx)
                        .map_err(|e| relabel(e, i))?;
                    g.push(gi);
                    closed.push(ci);
                }
                Ok(g)
            }
        }
    }
}

/// Rewrites a model error's measurement index so solver diagnostics point at
/// the right reading.
fn relabel(e: ModelError, i: usize) -> ModelError {
    match e {
        ModelError::Domain { reason, .. } => ModelError::Domain { index: i, reason },
        ModelError::NonFinite { .. } => ModelError::NonFinite { index: i },
        other => other,
    }
}

/// Which half of the magnetic campaign a report covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagneticPart {
    Perpendicular,
    Parallel,
}

impl std::fmt::Display for MagneticPart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MagneticPart::Perpendicular => write!(f, "perpendicular"),
            MagneticPart::Parallel => write!(f, "parallel"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MagneticPartReport {
    pub part: MagneticPart,
    /// Board stations along the scan coordinate.
    pub stations: Vec<f64>,
    pub estimates: Vec<f64>,
    pub truth: Vec<f64>,
    pub trace: IterationTrace,
    pub duration: Duration,
}

#[derive(Debug, Clone)]
pub struct MagneticOutcome {
    pub perpendicular: MagneticPartReport,
    pub parallel: MagneticPartReport,
    pub errors: ErrorReport,
    pub total_duration: Duration,
}

/// A built magnet-board scenario.
///
/// The board is read twice. In the perpendicular part it lies along the beam
/// and feeds past the tip like a tape, each magnet taking a turn at the tip
/// station while its transverse distance is reconstructed. In the parallel
/// part the board stands across the beam axis ahead of the tip and slides
/// sideways, each magnet taking a turn on-axis while its axial clearance is
/// reconstructed.
#[derive(Debug)]
pub struct MagneticScenario {
    model: MagneticModel,
    stations: Vec<f64>,
    truth: Vec<f64>,
    nominal: f64,
    solver: SolverConfig,
    noise: Option<NoiseSpec>,
    bin_width: f64,
}

impl MagneticScenario {
    /// The built instrument: beam, magnet row, and interaction constants.
    pub fn model(&self) -> &MagneticModel {
        &self.model
    }

    pub fn build(config: &MagneticConfig) -> Result<Self, ScenarioError> {
        let beam = config.beam.build()?;
        let row = config.beam_magnets;
        if row.count < 1 {
            return Err(ScenarioError::BoardTooSmall(row.count));
        }
        if !(row.spacing.is_finite() && row.spacing > 0.0) {
            return Err(ScenarioError::BadBoard { name: "spacing", value: row.spacing });
        }
        let start = beam.length() - (row.count - 1) as f64 * row.spacing;
        if start < 0.0 {
            return Err(ScenarioError::BadBoard {
                name: "spacing",
                value: row.spacing,
            });
        }
        let magnets = MagnetArray::uniform(row.count, start, row.spacing, row.polarity)?;
        let constants = config.constants;
        if !(constants.omega0.is_finite() && constants.omega0 > 0.0) {
            return Err(ScenarioError::BadBoard { name: "omega0", value: constants.omega0 });
        }
        let model = MagneticModel::new(
            beam,
            magnets,
            constants.c,
            constants.n,
            constants.omega0 * constants.omega0,
            constants.gap_floor,
        )?;

        let board = config.board;
        if board.count < 2 {
            return Err(ScenarioError::BoardTooSmall(board.count));
        }
        if !(board.spacing.is_finite() && board.spacing > 0.0) {
            return Err(ScenarioError::BadBoard { name: "spacing", value: board.spacing });
        }
        if !(board.nominal.is_finite() && board.nominal > 0.0) {
            return Err(ScenarioError::BadBoard { name: "nominal", value: board.nominal });
        }
        if !(board.amplitude.is_finite() && board.amplitude >= 0.0) {
            return Err(ScenarioError::BadBoard { name: "amplitude", value: board.amplitude });
        }
        if board.nominal - board.amplitude <= model.gap_floor() {
            return Err(ScenarioError::BadBoard { name: "amplitude", value: board.amplitude });
        }
        let span = board.spacing * (board.count - 1) as f64;
        let wavelength = board.wavelength.unwrap_or(span);
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(ScenarioError::BadBoard { name: "wavelength", value: wavelength });
        }
        let stations: Vec<f64> =
            (0..board.count).map(|j| j as f64 * board.spacing).collect();
        let truth: Vec<f64> = stations
            .iter()
            .map(|&s| board.nominal + board.amplitude * (TAU * s / wavelength).sin())
            .collect();
        let solver = config.solver.to_config();
        solver.validate()?;
        if !(config.bin_width.is_finite() && config.bin_width > 0.0) {
            return Err(HarnessError::BadBinWidth(config.bin_width).into());
        }
        Ok(Self {
            model,
            stations,
            truth,
            nominal: board.nominal,
            solver,
            noise: config.noise,
            bin_width: config.bin_width,
        })
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    fn part_pair(&self, part: MagneticPart) -> Result<MagneticPair<'_>, ScenarioError> {
        let mut pair = MagneticPair {
            model: &self.model,
            stations: &self.stations,
            part,
            gamma: Vec::new(),
            power: self.model.n() + 2.0,
        };
        let n = self.stations.len();
        let nominal = vec![self.nominal; n];
        let h = self.solver.fd_step * self.nominal.max(1.0);
        let mut jacobian = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut plus = nominal.clone();
            let mut minus = nominal.clone();
            plus[j] += h;
            minus[j] -= h;
            let fp = pair.readings(&plus).map_err(ScenarioError::Model)?;
            let fm = pair.readings(&minus).map_err(ScenarioError::Model)?;
            for i in 0..n {
                jacobian[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        // Map the slope from gap space to u = g^-p space, keeping only the
        // own and already-measured couplings so the inverse stays a forward
        // substitution.
        let du_dg = -pair.power * self.nominal.powf(-(pair.power + 1.0));
        let expected_sign = match part {
            MagneticPart::Perpendicular => -1.0,
            MagneticPart::Parallel => 1.0,
        };
        let mut gamma = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                gamma[i][j] = jacobian[i][j] / du_dg;
            }
            if gamma[i][i] * expected_sign <= 0.0 {
                return Err(ScenarioError::DegenerateSurrogate { part });
            }
        }
        pair.gamma = gamma;
        Ok(pair)
    }

    fn run_part(&self, part: MagneticPart, seed_shift: u64) -> Result<MagneticPartReport, ScenarioError> {
        let started = Instant::now();
        let pair = self.part_pair(part)?;
        let clean = pair.readings(&self.truth).map_err(ScenarioError::Model)?;
        let readings = match self.noise {
            Some(spec) => apply_noise(
                &clean,
                NoiseSpec { seed: spec.seed.wrapping_add(seed_shift), ..spec },
            )?,
            None => clean,
        };
        let measurements = MeasurementSet::new(self.stations.clone(), readings)?;
        let trace = run_mbsa(&pair, &measurements, &self.solver)?;
        if trace.status() != SolverStatus::Converged {
            return Err(ScenarioError::MagneticNotConverged {
                part,
                status: trace.status(),
                iterations: trace.len(),
            });
        }
        let estimates = trace.final_g().to_vec();
        Ok(MagneticPartReport {
            part,
            stations: self.stations.clone(),
            estimates,
            truth: self.truth.clone(),
            trace,
            duration: started.elapsed(),
        })
    }

    /// Runs both parts of the campaign and scores all magnets together.
    pub fn run(&self) -> Result<MagneticOutcome, ScenarioError> {
        // Solver and model errors do not know which part they came from, so
        // tag them here; part-aware variants pass through untouched.
        let tag = |part: MagneticPart| {
            move |e: ScenarioError| match e {
                tagged @ (ScenarioError::MagneticNotConverged { .. }
                | ScenarioError::DegenerateSurrogate { .. }) => tagged,
                other => ScenarioError::MagneticPartFailed { part, source: Box::new(other) },
            }
        };
        let started = Instant::now();
        let perpendicular = self
            .run_part(MagneticPart::Perpendicular, 0)
            .map_err(tag(MagneticPart::Perpendicular))?;
        let parallel =
            self.run_part(MagneticPart::Parallel, 1).map_err(tag(MagneticPart::Parallel))?;
        let mut estimates = perpendicular.estimates.clone();
        estimates.extend_from_slice(&parallel.estimates);
        let mut truth = perpendicular.truth.clone();
        truth.extend_from_slice(&parallel.truth);
        let errors = error_report(&estimates, &truth, self.bin_width)?;
        Ok(MagneticOutcome {
            perpendicular,
            parallel,
            errors,
            total_duration: started.elapsed(),
        })
    }
}

/// Solver model pair for one magnetic part.
///
/// The full side sums every board magnet against every beam magnet in the
/// scan frame. The simplified side is a power law per board magnet plus the
/// pair-law contributions of the magnets measured before it, so its inverse
/// peels the board off one magnet at a time.
struct MagneticPair<'a> {
    model: &'a MagneticModel,
    stations: &'a [f64],
    part: MagneticPart,
    /// Lower-triangular slope matrix in u = g^-p space, taken from the full
    /// model at the uniform nominal board.
    gamma: Vec<Vec<f64>>,
    power: f64,
}

impl MagneticPair<'_> {
    /// Full readings for a board profile: one squared frequency per scan
    /// station.
    fn readings(&self, g: &[f64]) -> Result<Vec<f64>, ModelError> {
        let tip = self.model.beam().length();
        let n = self.stations.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let layout: Vec<(f64, f64)> = match self.part {
                MagneticPart::Perpendicular => self
                    .stations
                    .iter()
                    .zip(g)
                    .map(|(&s, &gj)| (tip + s - self.stations[i], gj))
                    .collect(),
                MagneticPart::Parallel => self
                    .stations
                    .iter()
                    .zip(g)
                    .map(|(&s, &gj)| (tip + gj, s - self.stations[i]))
                    .collect(),
            };
            let omega_sq = self
                .model
                .omega_sq(&layout, 1.0)
                .map_err(|e| ModelError::Domain { index: i, reason: e.to_string() })?;
            out.push(omega_sq);
        }
        Ok(out)
    }
}

impl ModelPair for MagneticPair<'_> {
    fn full_forward(&self, g: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let expected = self.stations.len();
        if g.len() != expected || x.len() != expected {
            return Err(ModelError::Dimension { expected, got: g.len().min(x.len()) });
        }
        self.readings(g)
    }

    fn simplified_forward(&self, g: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let expected = self.stations.len();
        if g.len() != expected || x.len() != expected {
            return Err(ModelError::Dimension { expected, got: g.len().min(x.len()) });
        }
        let omega0_sq = self.model.omega0_sq();
        let mut out = Vec::with_capacity(expected);
        for i in 0..expected {
            let mut acc = omega0_sq;
            for j in 0..=i {
                if !(g[j] > 0.0) {
                    return Err(ModelError::Domain {
                        index: i,
                        reason: format!("distance must be positive, got {}", g[j]),
                    });
                }
                acc += self.gamma[i][j] * g[j].powf(-self.power);
            }
            out.push(acc);
        }
        Ok(out)
    }

    fn simplified_inverse(&self, omega_sq: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let expected = self.stations.len();
        if omega_sq.len() != expected || x.len() != expected {
            return Err(ModelError::Dimension { expected, got: omega_sq.len().min(x.len()) });
        }
        let omega0_sq = self.model.omega0_sq();
        let mut u = Vec::with_capacity(expected);
        for i in 0..expected {
            let mut deficit = omega_sq[i] - omega0_sq;
            for (j, uj) in u.iter().enumerate() {
                deficit -= self.gamma[i][j] * uj;
            }
            let ui = deficit / self.gamma[i][i];
            if !(ui.is_finite() && ui > 0.0) {
                return Err(ModelError::Domain {
                    index: i,
                    reason: format!(
                        "reading leaves no {} response to invert after removing \
                         already-measured magnets",
                        self.part
                    ),
                });
            }
            u.push(ui);
        }
        Ok(u.iter().map(|ui| ui.powf(-1.0 / self.power)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topography::{discretize, make_groove, make_sinusoid, polyline_hausdorff};
    use approx::assert_relative_eq;

    fn desk_beam() -> BeamConfig {
        BeamConfig { length: 0.682, rho_a: 0.0567, ei: 0.1225, mode_index: 1 }
    }

    fn desk_interaction() -> InteractionConfig {
        InteractionConfig {
            materials: None,
            c: Some(1e-11),
            n: Some(6.0),
            gap_floor: Some(1e-4),
        }
    }

    fn desk_groove_config() -> GrooveConfig {
        GrooveConfig {
            beam: desk_beam(),
            interaction: desk_interaction(),
            groove: GrooveSpec {
                outer_level: 2.0,
                mouth_position: 1.5625,
                width: 1.875,
                depth: 1.2,
            },
            phases: PhaseSettings {
                outer_surface: PhaseTuning { segments: 16, standoff: 0.045, beta: None },
                lower_sidewall: PhaseTuning { segments: 16, standoff: 0.045, beta: None },
                upper_sidewall: PhaseTuning { segments: 16, standoff: 0.045, beta: None },
                base: PhaseTuning { segments: 16, standoff: 0.045, beta: None },
            },
            solver: SolverSettings { max_iter: 500, ..SolverSettings::default() },
            quadrature: QuadratureSettings { resolution: 24, beam_intervals: 96 },
            noise: None,
            bin_width: 0.5,
        }
    }

    /// Single flat perpendicular span, built through the groove plumbing so
    /// the scenario machinery can be exercised without a groove.
    fn flat_scenario(
        level: f64,
        span: f64,
        segments: usize,
        standoff: f64,
        truth_gaps: Option<Vec<f64>>,
    ) -> GrooveScenario {
        let beam = desk_beam().build().unwrap();
        let constants = desk_interaction().resolve().unwrap();
        let l = beam.length();
        let width = span / segments as f64;
        let line = level - standoff;
        let mut positions = Vec::new();
        let mut placements = Vec::new();
        for k in 0..segments {
            let pos = (k as f64 + 0.5) * width;
            positions.push(pos);
            let placement = if pos < span / 2.0 {
                Placement::new((line, pos + l), (0.0, -1.0)).unwrap()
            } else {
                Placement::new((line, pos - l), (0.0, 1.0)).unwrap()
            };
            placements.push(placement);
        }
        let phase = ScanPhase::new(
            PhaseName::OuterSurface,
            Orientation::Perpendicular,
            positions,
            None,
            width,
            line - l,
            1.0,
        )
        .unwrap();
        let truth_g = match truth_gaps {
            Some(gaps) => gaps.iter().map(|gap| l + gap).collect(),
            None => vec![l + standoff; segments],
        };
        let plan = PhasePlan {
            phase,
            placements,
            runs: vec![Run { free_start: 0.0, count: segments }],
            ctx: context(&beam, &constants, span, segments),
            beta: Some(0.5),
            triangular: false,
            truth_values: truth_g.iter().map(|g| line - l + g).collect(),
            truth_g,
            nominal_g: vec![l + standoff; segments],
        };
        let grid = ModalGrid::new(&beam, 96);
        GrooveScenario {
            beam,
            constants,
            groove: GrooveSpec::new(level, 1.0, 2.0, 1.0).unwrap(),
            grid,
            resolution: 24,
            solver: SolverConfig::default(),
            noise: None,
            bin_width: 0.5,
            plans: vec![plan],
        }
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = ScenarioConfig::VdwGroove(desk_groove_config());
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        match back {
            ScenarioConfig::VdwGroove(c) => {
                assert_eq!(c.phases.outer_surface.segments, 16);
                assert_relative_eq!(c.groove.width, 1.875);
                GrooveScenario::build(&c).unwrap();
            }
            _ => panic!("kind tag did not round trip"),
        }
        assert!(text.contains("\"kind\": \"vdw_groove\""));
    }

    #[test]
    fn interaction_source_must_be_unambiguous() {
        let empty = InteractionConfig::default();
        assert!(matches!(empty.resolve(), Err(ScenarioError::MissingInteraction)));

        let both = InteractionConfig {
            materials: Some(["gold".into(), "silicon".into()]),
            c: Some(1e-11),
            n: Some(6.0),
            gap_floor: None,
        };
        assert!(matches!(both.resolve(), Err(ScenarioError::AmbiguousInteraction)));

        let unknown = InteractionConfig {
            materials: Some(["gold".into(), "unobtainium".into()]),
            ..InteractionConfig::default()
        };
        assert!(matches!(unknown.resolve(), Err(ScenarioError::UnknownMaterial(_))));

        let pair = InteractionConfig {
            materials: Some(["gold".into(), "silicon".into()]),
            ..InteractionConfig::default()
        };
        let constants = pair.resolve().unwrap();
        assert_relative_eq!(constants.n, 6.0);
        assert!(constants.c > 0.0);
    }

    #[test]
    fn bad_phase_layouts_are_rejected() {
        let mut odd = desk_groove_config();
        odd.phases.outer_surface.segments = 15;
        assert!(matches!(
            GrooveScenario::build(&odd),
            Err(ScenarioError::BadPhase { phase: PhaseName::OuterSurface, .. })
        ));

        let mut narrow = desk_groove_config();
        narrow.groove.width = 1.2;
        assert!(matches!(
            GrooveScenario::build(&narrow),
            Err(ScenarioError::BadPhase { phase: PhaseName::Base, .. })
        ));

        let mut shallow = desk_groove_config();
        shallow.phases.lower_sidewall.standoff = 5e-5;
        assert!(matches!(
            GrooveScenario::build(&shallow),
            Err(ScenarioError::BadPhase { phase: PhaseName::LowerSidewall, .. })
        ));
    }

    #[test]
    fn flat_span_reconstructs_to_solver_precision() {
        let scenario = flat_scenario(2.0, 5.0, 8, 0.045, None);
        let reports = scenario.run_phases().unwrap();
        assert_eq!(reports.len(), 1);
        let section = &reports[0].section;
        for &v in section.values() {
            assert_relative_eq!(v, 2.0, epsilon = 1e-6);
        }
        let report = error_report(section.values(), &scenario.plans[0].truth_values, 0.5).unwrap();
        assert!(report.max_pct() < 1e-4, "flat span error {}%", report.max_pct());
    }

    #[test]
    fn groove_reconstruction_stays_within_tolerance() {
        let config = desk_groove_config();
        let scenario = GrooveScenario::build(&config).unwrap();
        let report = scenario.reconstruct_full().unwrap();

        assert_eq!(report.phases.len(), 4);
        for phase in &report.phases {
            assert_eq!(phase.trace.status(), SolverStatus::Converged, "{}", phase.name);
            let norms = phase.trace.error_norms();
            for pair in norms.windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-12,
                    "{} error norm increased: {} -> {}",
                    phase.name,
                    pair[0],
                    pair[1]
                );
            }
        }

        let errors = report.errors.as_ref().unwrap();
        assert!(errors.max_pct() <= 2.0, "max segment error {}%", errors.max_pct());

        let truth = make_groove(scenario.groove(), 8).unwrap();
        let distance = polyline_hausdorff(&report.contour, &truth, 8);
        let widest = report
            .phases
            .iter()
            .map(|p| p.section.segment_width())
            .fold(0.0, f64::max);
        assert!(
            distance <= widest,
            "assembled contour is {distance} away from the truth (limit {widest})"
        );
    }

    #[test]
    fn noise_does_not_swamp_the_discretization_floor() {
        // The truth is a smooth sinusoid, so a staircase reconstruction has a
        // genuine noiseless error floor; one-percent reading noise should
        // stay well inside a factor of five of it.
        let level = 2.0;
        let amplitude = 0.005;
        let wavelength = 2.5;
        let span = 5.0;
        let segments = 8;
        let standoff = 0.05;
        let sinusoid = make_sinusoid(level, amplitude, wavelength, span, 256).unwrap();
        let ideal = discretize(&sinusoid, Orientation::Perpendicular, segments).unwrap();

        let run_with = |noise: Option<NoiseSpec>| -> f64 {
            let mut scenario = flat_scenario(level, span, segments, standoff, None);
            scenario.noise = noise;
            let plan = &scenario.plans[0];
            let scene = [sinusoid.clone()];
            let clean: Vec<f64> = plan
                .placements
                .iter()
                .map(|placement| {
                    delta_omega_sq_scene(
                        &scene,
                        &scenario.constants,
                        placement,
                        &scenario.grid,
                        scenario.beam.length(),
                        scenario.resolution,
                    )
                    .unwrap()
                })
                .collect();
            let readings = match scenario.noise {
                Some(spec) => apply_noise(&clean, spec).unwrap(),
                None => clean,
            };
            let measurements = simulate_scan(&plan.phase, |_| Ok(readings.clone()), None).unwrap();
            let pair = scenario.phase_pair(0, &[], true).unwrap();
            let config = SolverConfig { beta: 0.5, ..scenario.solver };
            let (section, trace) = reconstruct_phase(&measurements, &pair, &config).unwrap();
            ensure_converged(plan.phase.name(), &trace).unwrap();
            error_report(section.values(), ideal.values(), 0.5).unwrap().median_pct()
        };

        let floor = run_with(None);
        assert!(floor > 0.0, "discretization floor should be nonzero");

        let mut noisy = Vec::new();
        for seed in 0..10 {
            noisy.push(run_with(Some(NoiseSpec { sigma: 0.01, seed, relative: true })));
        }
        let median_noisy = median(&mut noisy);
        assert!(
            median_noisy < 5.0 * floor,
            "noisy median {median_noisy}% vs noiseless floor {floor}%"
        );
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let run = || {
            let mut scenario = flat_scenario(2.0, 5.0, 8, 0.045, None);
            scenario.noise = Some(NoiseSpec { sigma: 0.01, seed: 9, relative: true });
            let reports = scenario.run_phases().unwrap();
            reports[0].section.values().to_vec()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);

        let mut other = flat_scenario(2.0, 5.0, 8, 0.045, None);
        other.noise = Some(NoiseSpec { sigma: 0.01, seed: 10, relative: true });
        let c = other.run_phases().unwrap()[0].section.values().to_vec();
        assert_ne!(a, c);
    }

    fn rig_magnetic_config() -> MagneticConfig {
        MagneticConfig {
            beam: BeamConfig { length: 682.0, rho_a: 5.67e-5, ei: 1.225e8, mode_index: 1 },
            constants: MagneticConstantsConfig {
                c: 67981.0,
                n: 3.356380,
                omega0: 70.0,
                gap_floor: 1.0,
            },
            beam_magnets: MagnetRowConfig { count: 11, spacing: 5.0, polarity: 1.0 },
            board: BoardConfig {
                count: 11,
                spacing: 5.0,
                nominal: 20.0,
                amplitude: 2.5,
                wavelength: None,
            },
            solver: magnetic_solver_default(),
            noise: None,
            bin_width: 0.5,
        }
    }

    #[test]
    fn magnetic_board_recovers_both_parts() {
        let scenario = MagneticScenario::build(&rig_magnetic_config()).unwrap();
        let outcome = scenario.run().unwrap();

        assert_eq!(outcome.perpendicular.estimates.len(), 11);
        assert_eq!(outcome.parallel.estimates.len(), 11);
        assert_eq!(outcome.perpendicular.trace.status(), SolverStatus::Converged);
        assert_eq!(outcome.parallel.trace.status(), SolverStatus::Converged);

        assert!(
            outcome.errors.median_pct() <= 5.0,
            "median magnet error {}%",
            outcome.errors.median_pct()
        );
        // Sized to the observed numerics with headroom; the criterion above
        // is the contract.
        assert!(outcome.errors.max_pct() < 2.0, "max magnet error {}%", outcome.errors.max_pct());

        let again = scenario.run().unwrap();
        assert_eq!(outcome.perpendicular.estimates, again.perpendicular.estimates);
        assert_eq!(outcome.parallel.estimates, again.parallel.estimates);
    }

    #[test]
    fn magnetic_board_validation_rejects_bad_layouts() {
        let mut tiny = rig_magnetic_config();
        tiny.board.count = 1;
        assert!(matches!(
            MagneticScenario::build(&tiny),
            Err(ScenarioError::BoardTooSmall(1))
        ));

        let mut colliding = rig_magnetic_config();
        colliding.board.amplitude = 20.0;
        assert!(matches!(
            MagneticScenario::build(&colliding),
            Err(ScenarioError::BadBoard { name: "amplitude", .. })
        ));

        let mut off_beam = rig_magnetic_config();
        off_beam.beam_magnets.spacing = 100.0;
        assert!(matches!(
            MagneticScenario::build(&off_beam),
            Err(ScenarioError::BadBoard { name: "spacing", .. })
        ));
    }

    #[test]
    fn magnetic_config_round_trips_through_json() {
        let config = ScenarioConfig::Magnetic(rig_magnetic_config());
        let text = serde_json::to_string_pretty(&config).unwrap();
        assert!(text.contains("\"kind\": \"magnetic\""));
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        match back {
            ScenarioConfig::Magnetic(c) => {
                assert_eq!(c.board.count, 11);
                MagneticScenario::build(&c).unwrap();
            }
            _ => panic!("kind tag did not round trip"),
        }
    }
}
