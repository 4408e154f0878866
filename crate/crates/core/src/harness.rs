//! Scan orchestration: simulate phase measurements from a forward model,
//! run the fixed-point reconstruction per phase, and summarize per-segment
//! errors.
//!
//! The harness is model-agnostic. A scan phase describes where the probe
//! measures and how the solver's gap parameter maps into section
//! coordinates; the concrete forward models are supplied by the caller as
//! [`ModelPair`] implementations or forward closures.

use crate::solver::{
    IterationTrace, MeasurementSet, ModelError, ModelPair, SolverConfig, SolverError,
    SolverStatus,
};
use crate::topography::{Contour, Orientation, Section, TopographyError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("phase has no scan positions")]
    EmptyPhase,
    #[error("scan positions contain a non-finite value")]
    NonFinitePosition,
    #[error("a parallel phase needs an insertion depth per position")]
    MissingDepths,
    #[error("a parallel phase needs {expected} insertion depths, got {got}")]
    DepthCount { expected: usize, got: usize },
    #[error("a perpendicular phase carries no insertion depths")]
    UnexpectedDepths,
    #[error("insertion depths must be non-negative and finite, got {0}")]
    BadDepth(f64),
    #[error("segment width must be positive and finite, got {0}")]
    BadSegmentWidth(f64),
    #[error("value map scale must be +1 or -1, got {0}")]
    BadValueScale(f64),
    #[error("value map offset must be finite, got {0}")]
    BadValueOffset(f64),
    #[error("noise sigma must be non-negative and finite, got {0}")]
    BadSigma(f64),
    #[error("{phase} phase: model returned {got} readings for {expected} scan positions")]
    MeasurementCount { phase: PhaseName, expected: usize, got: usize },
    #[error("{phase} phase: reading {index} is not finite")]
    NonFiniteReading { phase: PhaseName, index: usize },
    #[error("{phase} phase: {source}")]
    Model {
        phase: PhaseName,
        #[source]
        source: ModelError,
    },
    #[error("{phase} phase: {source}")]
    Solver {
        phase: PhaseName,
        #[source]
        source: SolverError,
    },
    #[error("{phase} phase ended {status} after {iterations} iterations with error norm {error_norm:e}")]
    NotConverged { phase: PhaseName, status: SolverStatus, iterations: usize, error_norm: f64 },
    #[error("{phase} phase: {source}")]
    Section {
        phase: PhaseName,
        #[source]
        source: TopographyError,
    },
    #[error("estimate has {estimate} segments but truth has {truth}")]
    SegmentCount { estimate: usize, truth: usize },
    #[error("error report needs at least one segment")]
    EmptyReport,
    #[error("histogram bin width must be positive and finite, got {0}")]
    BadBinWidth(f64),
}

/// The four scan passes of a groove reconstruction, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseName {
    OuterSurface,
    LowerSidewall,
    UpperSidewall,
    Base,
}

impl PhaseName {
    /// Execution order: the outer pass locates the opening, the sidewalls
    /// are traced from inside, and the base is measured last so every
    /// earlier surface is available as background geometry.
    pub const EXECUTION_ORDER: [PhaseName; 4] = [
        PhaseName::OuterSurface,
        PhaseName::LowerSidewall,
        PhaseName::UpperSidewall,
        PhaseName::Base,
    ];
}

impl std::fmt::Display for PhaseName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PhaseName::OuterSurface => "outer_surface",
            PhaseName::LowerSidewall => "lower_sidewall",
            PhaseName::UpperSidewall => "upper_sidewall",
            PhaseName::Base => "base",
        })
    }
}

/// One scan pass over a section of the topography.
///
/// `positions` are free-coordinate segment centers in scan order, one
/// measurement per segment. Parallel phases carry the probe insertion depth
/// at each position. `value_offset` and `value_scale` translate the
/// solver's gap parameter into the section coordinate:
/// `value = offset + scale * g`.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPhase {
    name: PhaseName,
    orientation: Orientation,
    positions: Vec<f64>,
    depths: Option<Vec<f64>>,
    segment_width: f64,
    value_offset: f64,
    value_scale: f64,
}

impl ScanPhase {
    pub fn new(
        name: PhaseName,
        orientation: Orientation,
        positions: Vec<f64>,
        depths: Option<Vec<f64>>,
        segment_width: f64,
        value_offset: f64,
        value_scale: f64,
    ) -> Result<Self, HarnessError> {
        if positions.is_empty() {
            return Err(HarnessError::EmptyPhase);
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(HarnessError::NonFinitePosition);
        }
        match (orientation, &depths) {
            (Orientation::Parallel, None) => return Err(HarnessError::MissingDepths),
            (Orientation::Parallel, Some(d)) if d.len() != positions.len() => {
                return Err(HarnessError::DepthCount { expected: positions.len(), got: d.len() })
            }
            (Orientation::Perpendicular, Some(_)) => return Err(HarnessError::UnexpectedDepths),
            _ => {}
        }
        if let Some(d) = &depths {
            if let Some(&bad) = d.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(HarnessError::BadDepth(bad));
            }
        }
        if !(segment_width.is_finite() && segment_width > 0.0) {
            return Err(HarnessError::BadSegmentWidth(segment_width));
        }
        if value_scale != 1.0 && value_scale != -1.0 {
            return Err(HarnessError::BadValueScale(value_scale));
        }
        if !value_offset.is_finite() {
            return Err(HarnessError::BadValueOffset(value_offset));
        }
        Ok(Self { name, orientation, positions, depths, segment_width, value_offset, value_scale })
    }

    pub fn name(&self) -> PhaseName {
        self.name
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn depths(&self) -> Option<&[f64]> {
        self.depths.as_deref()
    }

    pub fn segment_width(&self) -> f64 {
        self.segment_width
    }

    pub fn value_offset(&self) -> f64 {
        self.value_offset
    }

    pub fn value_scale(&self) -> f64 {
        self.value_scale
    }

    /// Segment count; one measurement per segment.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty phases
    }

    /// Section coordinate implied by a solver gap parameter.
    pub fn value_of(&self, g: f64) -> f64 {
        self.value_offset + self.value_scale * g
    }

    /// Insertion-depth metadata for the reconstructed section: how deep the
    /// probe went at the deepest scan position.
    pub fn section_depth(&self) -> f64 {
        self.depths
            .as_ref()
            .map(|d| d.iter().cloned().fold(0.0, f64::max))
            .unwrap_or(0.0)
    }
}

/// Zero-mean Gaussian measurement noise with a fixed generator seed.
///
/// With `relative` set, `sigma` scales each reading's magnitude instead of
/// acting as an absolute standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub relative: bool,
}

/// Readings for one phase, in measurement order.
///
/// Positions are stored alongside the phase because reconstruction accepts
/// them in any order; the phase keeps the nominal scan design.
#[derive(Debug, Clone)]
pub struct PhaseMeasurements {
    phase: ScanPhase,
    positions: Vec<f64>,
    readings: Vec<f64>,
    noise: Option<NoiseSpec>,
}

impl PhaseMeasurements {
    pub fn new(
        phase: ScanPhase,
        positions: Vec<f64>,
        readings: Vec<f64>,
        noise: Option<NoiseSpec>,
    ) -> Result<Self, HarnessError> {
        if positions.len() != phase.len() || readings.len() != phase.len() {
            return Err(HarnessError::MeasurementCount {
                phase: phase.name(),
                expected: phase.len(),
                got: positions.len().min(readings.len()),
            });
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(HarnessError::NonFinitePosition);
        }
        if let Some(index) = readings.iter().position(|r| !r.is_finite()) {
            return Err(HarnessError::NonFiniteReading { phase: phase.name(), index });
        }
        Ok(Self { phase, positions, readings, noise })
    }

    pub fn phase(&self) -> &ScanPhase {
        &self.phase
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn readings(&self) -> &[f64] {
        &self.readings
    }

    pub fn noise(&self) -> Option<NoiseSpec> {
        self.noise
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length equals the phase's, which is never zero
    }
}

/// Adds seeded Gaussian noise to a reading vector, one draw per reading in
/// order. A zero sigma returns the input unchanged.
pub fn apply_noise(clean: &[f64], spec: NoiseSpec) -> Result<Vec<f64>, HarnessError> {
    if spec.sigma == 0.0 {
        return Ok(clean.to_vec());
    }
    if !(spec.sigma.is_finite() && spec.sigma > 0.0) {
        return Err(HarnessError::BadSigma(spec.sigma));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    if spec.relative {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        Ok(clean.iter().map(|c| c + spec.sigma * c.abs() * normal.sample(&mut rng)).collect())
    } else {
        let normal =
            Normal::new(0.0, spec.sigma).map_err(|_| HarnessError::BadSigma(spec.sigma))?;
        Ok(clean.iter().map(|c| c + normal.sample(&mut rng)).collect())
    }
}

/// Evaluates a forward model at the phase's scan positions and applies the
/// requested noise.
///
/// Without noise (or with `sigma = 0`) the readings are exactly the model
/// output, bit for bit; with noise, a fixed seed makes the output
/// reproducible.
pub fn simulate_scan<F>(
    phase: &ScanPhase,
    forward: F,
    noise: Option<NoiseSpec>,
) -> Result<PhaseMeasurements, HarnessError>
where
    F: FnOnce(&[f64]) -> Result<Vec<f64>, ModelError>,
{
    let clean = forward(phase.positions())
        .map_err(|source| HarnessError::Model { phase: phase.name(), source })?;
    if clean.len() != phase.len() {
        return Err(HarnessError::MeasurementCount {
            phase: phase.name(),
            expected: phase.len(),
            got: clean.len(),
        });
    }
    let readings = match noise {
        Some(spec) if spec.sigma != 0.0 => apply_noise(&clean, spec)?,
        _ => clean,
    };
    PhaseMeasurements::new(phase.clone(), phase.positions().to_vec(), readings, noise)
}

/// Runs the fixed-point solver on one phase and shapes the final estimate
/// into a section, ordering segments by scan position.
///
/// The returned trace may end in any solver status; gate on
/// [`ensure_converged`] when only a converged result is acceptable.
pub fn reconstruct_phase(
    measurements: &PhaseMeasurements,
    models: &dyn ModelPair,
    config: &SolverConfig,
) -> Result<(Section, IterationTrace), HarnessError> {
    let phase = measurements.phase();
    let set =
        MeasurementSet::new(measurements.positions().to_vec(), measurements.readings().to_vec())
            .map_err(|source| HarnessError::Solver { phase: phase.name(), source })?;
    let trace = crate::solver::run_mbsa(models, &set, config)
        .map_err(|source| HarnessError::Solver { phase: phase.name(), source })?;
    let section = section_from_estimate(phase, measurements.positions(), trace.final_g())
        .map_err(|source| HarnessError::Section { phase: phase.name(), source })?;
    Ok((section, trace))
}

/// Orders the per-measurement estimates by scan position and applies the
/// phase's value map.
fn section_from_estimate(
    phase: &ScanPhase,
    positions: &[f64],
    g: &[f64],
) -> Result<Section, TopographyError> {
    let mut paired: Vec<(f64, f64)> =
        positions.iter().zip(g).map(|(&p, &gi)| (p, phase.value_of(gi))).collect();
    paired.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = paired.into_iter().map(|(_, v)| v).collect();
    Section::new(phase.orientation(), values, phase.segment_width(), phase.section_depth())
}

/// Fails with phase context unless the trace ended in convergence.
pub fn ensure_converged(phase: PhaseName, trace: &IterationTrace) -> Result<(), HarnessError> {
    match trace.status() {
        SolverStatus::Converged => Ok(()),
        status => Err(HarnessError::NotConverged {
            phase,
            status,
            iterations: trace.len(),
            error_norm: trace.final_record().error_norm,
        }),
    }
}

/// Truth magnitude below which a relative error is meaningless and the
/// absolute deviation is reported instead.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-12;

/// Deviation of one estimated segment from truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentError {
    pub index: usize,
    /// Percentage of the truth magnitude; raw absolute deviation when
    /// `absolute` is set.
    pub value: f64,
    /// Set when the truth magnitude is below [`RELATIVE_ERROR_FLOOR`].
    pub absolute: bool,
}

/// Per-segment error listing with summary statistics over the percentage
/// entries. Absolute-flagged segments are excluded from the statistics and
/// the histogram because they carry a different unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    segments: Vec<SegmentError>,
    median_pct: f64,
    max_pct: f64,
    bin_width: f64,
    histogram: Vec<usize>,
}

impl ErrorReport {
    pub fn segments(&self) -> &[SegmentError] {
        &self.segments
    }

    /// Median percentage error; the mean of the central pair for an even
    /// count, zero when every segment is absolute-flagged.
    pub fn median_pct(&self) -> f64 {
        self.median_pct
    }

    pub fn max_pct(&self) -> f64 {
        self.max_pct
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Counts per `[k * bin_width, (k + 1) * bin_width)` interval, from
    /// zero up to the bin holding the maximum error.
    pub fn histogram(&self) -> &[usize] {
        &self.histogram
    }
}

/// Compares estimated segment values against truth:
/// `error_i = 100 |estimate_i - truth_i| / |truth_i|`, with an absolute
/// fallback for near-zero truth values.
pub fn error_report(
    estimate: &[f64],
    truth: &[f64],
    bin_width: f64,
) -> Result<ErrorReport, HarnessError> {
    if estimate.len() != truth.len() {
        return Err(HarnessError::SegmentCount { estimate: estimate.len(), truth: truth.len() });
    }
    if estimate.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(HarnessError::BadBinWidth(bin_width));
    }
    let segments: Vec<SegmentError> = estimate
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(index, (&e, &t))| {
            let deviation = (e - t).abs();
            if t.abs() < RELATIVE_ERROR_FLOOR {
                SegmentError { index, value: deviation, absolute: true }
            } else {
                SegmentError { index, value: 100.0 * deviation / t.abs(), absolute: false }
            }
        })
        .collect();
    let mut pcts: Vec<f64> =
        segments.iter().filter(|s| !s.absolute).map(|s| s.value).collect();
    pcts.sort_by(f64::total_cmp);
    let (median_pct, max_pct, histogram) = if pcts.is_empty() {
        (0.0, 0.0, Vec::new())
    } else {
        let mid = pcts.len() / 2;
        let median = if pcts.len() % 2 == 1 {
            pcts[mid]
        } else {
            0.5 * (pcts[mid - 1] + pcts[mid])
        };
        let max = pcts[pcts.len() - 1];
        let mut histogram = vec![0usize; (max / bin_width).floor() as usize + 1];
        for &p in &pcts {
            let bin = ((p / bin_width).floor() as usize).min(histogram.len() - 1);
            histogram[bin] += 1;
        }
        (median, max, histogram)
    };
    Ok(ErrorReport { segments, median_pct, max_pct, bin_width, histogram })
}

/// Outcome of one phase run.
#[derive(Debug, Clone)]
pub struct PhaseReport {
    pub name: PhaseName,
    pub section: Section,
    pub trace: IterationTrace,
    pub duration: std::time::Duration,
}

/// End-to-end reconstruction outcome: every phase in execution order, the
/// assembled contour, and segment errors when the truth is known.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub phases: Vec<PhaseReport>,
    pub contour: Contour,
    pub errors: Option<ErrorReport>,
    pub total_duration: std::time::Duration,
}
