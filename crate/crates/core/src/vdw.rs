//! Distance-dependent surface interaction model.
//!
//! Each element of the sample surface attracts the probe with a potential
//! `-C/r^n` per unit arc length. Linearizing the resulting force about the
//! beam's rest position gives a distributed stiffness along the beam; its
//! modal projection shifts the squared natural frequency. The full model
//! integrates that stiffness over an arbitrary contour by quadrature; the
//! simplified model collapses the geometry to a closed-form power law per
//! segment, invertible in one step.
//!
//! Sign structure of the point kernel `C n (a^2 - (n+1) t^2) / r^{n+4}`
//! (`a` axial offset along the beam, `t` transverse offset): sources beside
//! the beam soften it (negative stiffness), sources ahead of it along the
//! axis stiffen it. A straight surface crossing the axis head-on therefore
//! nets almost nothing: the softening of near-axis sources cancels against
//! the stiffening of oblique ones. Scan geometries put the measured face
//! beside the beam, where the response is strong and single-signed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::beam::{BeamModel, ModalGrid, StiffnessProfile, DEFAULT_BEAM_INTERVALS};
use crate::solver::ModelError;
use crate::topography::{assemble, Contour, Orientation, PlacedSection, Section};

pub const AVOGADRO: f64 = 6.02214076e23;

/// Lennard-Jones-style material constants as tabulated: `sigma` in
/// nanometres, `epsilon` in kJ/mol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LJMaterial {
    pub sigma_nm: f64,
    #[serde(rename = "epsilon_kJ_per_mol")]
    pub epsilon_kj_per_mol: f64,
}

impl LJMaterial {
    pub fn new(sigma_nm: f64, epsilon_kj_per_mol: f64) -> Result<Self, ModelError> {
        for (name, v) in [("sigma", sigma_nm), ("epsilon", epsilon_kj_per_mol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::Domain {
                    index: 0,
                    reason: format!("material {name} must be positive, got {v}"),
                });
            }
        }
        Ok(Self { sigma_nm, epsilon_kj_per_mol })
    }
}

/// Lorentz-Berthelot combination: arithmetic mean of sigma, geometric mean
/// of epsilon.
pub fn mix_constants(a: LJMaterial, b: LJMaterial) -> LJMaterial {
    LJMaterial {
        sigma_nm: 0.5 * (a.sigma_nm + b.sigma_nm),
        epsilon_kj_per_mol: (a.epsilon_kj_per_mol * b.epsilon_kj_per_mol).sqrt(),
    }
}

/// The two tabulated materials used by the bundled scenarios.
pub fn builtin_materials() -> BTreeMap<String, LJMaterial> {
    BTreeMap::from([
        ("gold".to_string(), LJMaterial { sigma_nm: 0.293373, epsilon_kj_per_mol: 0.163176 }),
        ("silicon".to_string(), LJMaterial { sigma_nm: 0.392, epsilon_kj_per_mol: 2.51040 }),
    ])
}

/// Interaction strength `C` (energy times length^n, per unit source arc
/// length), the power `n`, and the closest approach the attractive-only
/// potential is trusted at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionConstants {
    pub c: f64,
    pub n: f64,
    /// Evaluating a source closer than this to the beam axis is an error:
    /// the attractive branch alone diverges there and the repulsive branch
    /// is out of scope.
    pub gap_floor: f64,
}

impl InteractionConstants {
    pub fn new(c: f64, n: f64, gap_floor: f64) -> Result<Self, ModelError> {
        for (name, v) in [("C", c), ("n", n)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::Domain {
                    index: 0,
                    reason: format!("interaction constant {name} must be positive, got {v}"),
                });
            }
        }
        if !(gap_floor.is_finite() && gap_floor >= 0.0) {
            return Err(ModelError::Domain {
                index: 0,
                reason: format!("gap floor must be non-negative, got {gap_floor}"),
            });
        }
        Ok(Self { c, n, gap_floor })
    }

    /// SI constants from a mixed material pair: `C = 4 eps sigma^6` with
    /// sigma in metres and epsilon in joules per source element, `n = 6`
    /// (the attractive branch), and half of sigma as the validity floor.
    pub fn from_lj(material: LJMaterial) -> Self {
        let sigma_m = material.sigma_nm * 1e-9;
        let epsilon_j = material.epsilon_kj_per_mol * 1e3 / AVOGADRO;
        Self { c: 4.0 * epsilon_j * sigma_m.powi(6), n: 6.0, gap_floor: 0.5 * sigma_m }
    }
}

/// Second derivative of the pair potential with respect to transverse beam
/// motion, for a source at axial offset `axial` and transverse offset
/// `transverse` from the evaluation point.
pub fn point_stiffness_kernel(c: f64, n: f64, axial: f64, transverse: f64) -> f64 {
    let r2 = axial * axial + transverse * transverse;
    let p = 0.5 * (n + 4.0);
    let denom = if p.fract() == 0.0 && p.abs() < 120.0 { r2.powi(p as i32) } else { r2.powf(p) };
    c * n * (axial * axial - (n + 1.0) * transverse * transverse) / denom
}

/// Rigid placement of the beam in the contour plane: the clamped end sits at
/// `origin` and the axis runs along the unit vector `axis` (tip at
/// `origin + L * axis`). Transverse offsets are measured along the left-hand
/// normal; the kernel is even in them, so the normal's sign is irrelevant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    origin: (f64, f64),
    axis: (f64, f64),
}

impl Placement {
    pub fn new(origin: (f64, f64), axis: (f64, f64)) -> Result<Self, ModelError> {
        let norm = (axis.0 * axis.0 + axis.1 * axis.1).sqrt();
        if ![origin.0, origin.1, axis.0, axis.1].iter().all(|v| v.is_finite()) || norm == 0.0 {
            return Err(ModelError::Domain {
                index: 0,
                reason: "placement needs finite origin and a nonzero axis".into(),
            });
        }
        Ok(Self { origin, axis: (axis.0 / norm, axis.1 / norm) })
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn axis(&self) -> (f64, f64) {
        self.axis
    }

    /// Contour-plane point to (axial, transverse) beam coordinates.
    pub fn to_beam_frame(&self, p: (f64, f64)) -> (f64, f64) {
        let rel = (p.0 - self.origin.0, p.1 - self.origin.1);
        let axial = rel.0 * self.axis.0 + rel.1 * self.axis.1;
        let transverse = -rel.0 * self.axis.1 + rel.1 * self.axis.0;
        (axial, transverse)
    }
}

/// A scan: one beam placement per measurement, plus quadrature settings.
#[derive(Debug, Clone)]
pub struct ScanGeometry {
    placements: Vec<Placement>,
    beam: BeamModel,
    /// Quadrature sub-intervals per contour edge.
    resolution: usize,
    /// Beam-side modal grid intervals.
    beam_intervals: usize,
}

impl ScanGeometry {
    pub fn new(
        placements: Vec<Placement>,
        beam: BeamModel,
        resolution: usize,
        beam_intervals: usize,
    ) -> Result<Self, ModelError> {
        if placements.is_empty() {
            return Err(ModelError::Domain { index: 0, reason: "no scan placements".into() });
        }
        if resolution < 16 {
            return Err(ModelError::Domain {
                index: 0,
                reason: format!("surface quadrature resolution must be at least 16, got {resolution}"),
            });
        }
        if beam_intervals < 16 {
            return Err(ModelError::Domain {
                index: 0,
                reason: format!("beam grid needs at least 16 intervals, got {beam_intervals}"),
            });
        }
        Ok(Self { placements, beam, resolution, beam_intervals })
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn beam(&self) -> &BeamModel {
        &self.beam
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn beam_intervals(&self) -> usize {
        self.beam_intervals
    }

    pub fn modal_grid(&self) -> ModalGrid {
        ModalGrid::new(&self.beam, self.beam_intervals)
    }
}

/// Quadrature sample of the scene in beam coordinates: position plus the
/// composite-Simpson weight times the arc measure.
struct SceneSample {
    axial: f64,
    transverse: f64,
    weight: f64,
}

/// Samples every edge of the contour with composite Simpson weights in the
/// beam frame of `placement`, verifying the gap floor along the way.
fn sample_contour(
    contour: &Contour,
    placement: &Placement,
    beam_length: f64,
    gap_floor: f64,
    resolution: usize,
) -> Result<Vec<SceneSample>, ModelError> {
    let steps = resolution.max(2).next_multiple_of(2);
    let mut samples = Vec::with_capacity((contour.len() - 1) * (steps + 1));
    for edge in 0..contour.len() - 1 {
        let a = contour.vertex(edge);
        let b = contour.vertex(edge + 1);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let h = len / steps as f64;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let p = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            let (axial, transverse) = placement.to_beam_frame(p);
            // Distance from the source point to the beam segment [0, L].
            let gap = if axial < 0.0 {
                (axial * axial + transverse * transverse).sqrt()
            } else if axial > beam_length {
                ((axial - beam_length).powi(2) + transverse * transverse).sqrt()
            } else {
                transverse.abs()
            };
            if gap < gap_floor {
                return Err(ModelError::Domain {
                    index: edge,
                    reason: format!(
                        "contour edge {edge} comes within {gap:.3e} of the beam axis, below the {gap_floor:.3e} floor"
                    ),
                });
            }
            let simpson = if s == 0 || s == steps {
                1.0
            } else if s % 2 == 1 {
                4.0
            } else {
                2.0
            };
            samples.push(SceneSample { axial, transverse, weight: simpson * h / 3.0 });
        }
    }
    Ok(samples)
}

fn stiffness_at(samples: &[SceneSample], constants: &InteractionConstants, x: f64) -> f64 {
    samples
        .iter()
        .map(|s| {
            s.weight * point_stiffness_kernel(constants.c, constants.n, s.axial - x, s.transverse)
        })
        .sum()
}

/// Distributed stiffness induced by the contour, sampled on the default
/// beam quadrature grid for the given placement.
pub fn stiffness_profile(
    contour: &Contour,
    constants: &InteractionConstants,
    placement: &Placement,
    beam: &BeamModel,
    resolution: usize,
) -> Result<StiffnessProfile, ModelError> {
    let grid = ModalGrid::new(beam, DEFAULT_BEAM_INTERVALS);
    let samples =
        sample_contour(contour, placement, beam.length(), constants.gap_floor, resolution)?;
    let values: Vec<f64> =
        grid.nodes().iter().map(|&x| stiffness_at(&samples, constants, x)).collect();
    StiffnessProfile::new(grid.nodes().to_vec(), values)
        .map_err(|e| ModelError::Domain { index: 0, reason: e.to_string() })
}

/// Squared-frequency shift from one placement against a scene of contours:
/// the modal projection of the summed stiffness profiles.
pub fn delta_omega_sq_scene(
    scene: &[Contour],
    constants: &InteractionConstants,
    placement: &Placement,
    grid: &ModalGrid,
    beam_length: f64,
    resolution: usize,
) -> Result<f64, ModelError> {
    let mut k = vec![0.0; grid.nodes().len()];
    for contour in scene {
        let samples =
            sample_contour(contour, placement, beam_length, constants.gap_floor, resolution)?;
        for (ki, &x) in k.iter_mut().zip(grid.nodes()) {
            *ki += stiffness_at(&samples, constants, x);
        }
    }
    Ok(grid.delta_omega_sq_from(&k))
}

/// Full forward model over a fixed scene: one shift per scan placement.
/// An empty scene produces zeros.
pub fn forward_vdw_scene(
    scene: &[Contour],
    constants: &InteractionConstants,
    geometry: &ScanGeometry,
) -> Result<Vec<f64>, ModelError> {
    let grid = geometry.modal_grid();
    geometry
        .placements()
        .iter()
        .map(|placement| {
            delta_omega_sq_scene(
                scene,
                constants,
                placement,
                &grid,
                geometry.beam().length(),
                geometry.resolution(),
            )
        })
        .collect()
}

/// Full forward model for a piecewise-constant section estimate: the section
/// is lifted to its staircase contour and integrated per scan placement.
pub fn forward_vdw(
    section: &Section,
    free_start: f64,
    free_dir: f64,
    constants: &InteractionConstants,
    geometry: &ScanGeometry,
) -> Result<Vec<f64>, ModelError> {
    let placed = PlacedSection { section: section.clone(), zeta_start: 0.0, free_start, free_dir };
    let contour = assemble(std::slice::from_ref(&placed))
        .map_err(|e| ModelError::Domain { index: 0, reason: e.to_string() })?;
    forward_vdw_scene(&[contour], constants, geometry)
}

/// Parameters the closed-form simplified model needs besides the segment
/// value itself. `depth` is only read for parallel sections (how far the tip
/// sits past the opening); `l_beam`, `phi_bar`, `rho_a` describe the beam.
#[derive(Debug, Clone, Copy)]
pub struct SimplifiedContext {
    pub c: f64,
    pub n: f64,
    /// Total contour arc length of the scanned surface.
    pub l_top: f64,
    /// Segment count the arc is split into.
    pub segments: usize,
    pub phi_bar: f64,
    pub rho_a: f64,
    pub l_beam: f64,
    pub depth: f64,
}

/// Closed-form per-segment shift.
///
/// Perpendicular: the segment value is the surface coordinate along the
/// approach axis measured from the clamped end, so `g - l_beam` is the tip
/// gap; the tip-dominant power law gives
/// `-(L_top/N) (C/(n+1)) / (phi_bar rho_a (g - l_beam)^n)`.
///
/// Parallel: the segment value is the transverse gap itself and the response
/// scales with how deep the tip is inserted:
/// `-C L_top d / (N phi_bar g^n)`.
pub fn simplified_forward(
    g: f64,
    orientation: Orientation,
    ctx: &SimplifiedContext,
) -> Result<f64, ModelError> {
    match orientation {
        Orientation::Perpendicular => {
            let gap = g - ctx.l_beam;
            if gap <= 0.0 {
                return Err(ModelError::Domain {
                    index: 0,
                    reason: format!(
                        "segment value {g} must exceed the beam length {}",
                        ctx.l_beam
                    ),
                });
            }
            Ok(-(ctx.l_top / ctx.segments as f64) * (ctx.c / (ctx.n + 1.0))
                / (ctx.phi_bar * ctx.rho_a * gap.powf(ctx.n)))
        }
        Orientation::Parallel => {
            if g <= 0.0 {
                return Err(ModelError::Domain {
                    index: 0,
                    reason: format!("transverse gap must be positive, got {g}"),
                });
            }
            if ctx.depth <= 0.0 {
                return Err(ModelError::Domain {
                    index: 0,
                    reason: format!("insertion depth must be positive, got {}", ctx.depth),
                });
            }
            Ok(-ctx.c * ctx.l_top * ctx.depth / (ctx.segments as f64 * ctx.phi_bar * g.powf(ctx.n)))
        }
    }
}

/// Algebraic inverse of [`simplified_forward`]; only strictly negative
/// shifts are invertible (the model is purely attractive).
pub fn simplified_invert(
    delta_omega_sq: f64,
    orientation: Orientation,
    ctx: &SimplifiedContext,
) -> Result<f64, ModelError> {
    if !(delta_omega_sq < 0.0) {
        return Err(ModelError::Domain {
            index: 0,
            reason: format!(
                "simplified model inverts only negative frequency shifts, got {delta_omega_sq}"
            ),
        });
    }
    match orientation {
        Orientation::Perpendicular => {
            let num = (ctx.l_top / ctx.segments as f64) * (ctx.c / (ctx.n + 1.0));
            Ok(ctx.l_beam + (num / (ctx.phi_bar * ctx.rho_a * -delta_omega_sq)).powf(1.0 / ctx.n))
        }
        Orientation::Parallel => {
            if ctx.depth <= 0.0 {
                return Err(ModelError::Domain {
                    index: 0,
                    reason: format!("insertion depth must be positive, got {}", ctx.depth),
                });
            }
            let num = ctx.c * ctx.l_top * ctx.depth;
            Ok((num / (ctx.segments as f64 * ctx.phi_bar * -delta_omega_sq)).powf(1.0 / ctx.n))
        }
    }
}
