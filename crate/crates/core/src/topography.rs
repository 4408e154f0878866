//! Surface contours and their piecewise-constant section approximations.
//!
//! A contour is an ordered polyline `(g1(zeta), g2(zeta))` parameterized by
//! arc length. The first coordinate runs along the scan approach direction,
//! the second runs along the surface. Reconstruction works on sections:
//! graph-like pieces of the contour that are monotone in one coordinate (the
//! free coordinate) and approximated by per-segment constant values of the
//! other.
//!
//! * [`Orientation::Perpendicular`]: the section is a graph `g1(g2)`; values
//!   are approach-direction coordinates over a run along the surface.
//! * [`Orientation::Parallel`]: the section is a graph `g2(g1)`; values are
//!   transverse offsets over a run along the approach direction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopographyError {
    #[error("contour needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("contour coordinate arrays have mismatched lengths")]
    LengthMismatch,
    #[error("contour arc parameter must start at 0 and strictly increase")]
    BadArcParameter,
    #[error("contour contains a non-finite coordinate")]
    NonFinite,
    #[error("groove {name} must be positive and finite, got {value}")]
    BadGrooveDimension { name: &'static str, value: f64 },
    #[error("section needs at least one segment")]
    NoSegments,
    #[error("section segment width must be positive and finite, got {0}")]
    BadSegmentWidth(f64),
    #[error("section values contain a non-finite entry")]
    NonFiniteValue,
    #[error("section depth must be non-negative, got {0}")]
    NegativeDepth(f64),
    #[error("a perpendicular section carries no insertion depth")]
    DepthOnPerpendicular,
    #[error("contour is not strictly monotone in the free coordinate; cannot partition with this orientation")]
    NotMonotone,
    #[error("assembly needs at least one placed section")]
    NothingToAssemble,
    #[error("placed section {index} covers [{start}, {end}] but the previous section ends at {expected}")]
    NonContiguous { index: usize, start: f64, end: f64, expected: f64 },
    #[error("placed section direction must be +1 or -1, got {0}")]
    BadDirection(f64),
}

/// How a section's values relate to the contour coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Values are `g1` coordinates; the free coordinate is `g2`.
    Perpendicular,
    /// Values are `g2` coordinates; the free coordinate is `g1`.
    Parallel,
}

/// Ordered polyline contour parameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    zeta: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
}

impl Contour {
    pub fn new(zeta: Vec<f64>, g1: Vec<f64>, g2: Vec<f64>) -> Result<Self, TopographyError> {
        if zeta.len() != g1.len() || zeta.len() != g2.len() {
            return Err(TopographyError::LengthMismatch);
        }
        if zeta.len() < 2 {
            return Err(TopographyError::TooFewPoints(zeta.len()));
        }
        if zeta.iter().chain(&g1).chain(&g2).any(|v| !v.is_finite()) {
            return Err(TopographyError::NonFinite);
        }
        if zeta[0] != 0.0 || zeta.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(TopographyError::BadArcParameter);
        }
        Ok(Self { zeta, g1, g2 })
    }

    /// Builds a contour from vertices, accumulating arc length. Consecutive
    /// duplicate vertices are rejected because they stall the parameter.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self, TopographyError> {
        if points.len() < 2 {
            return Err(TopographyError::TooFewPoints(points.len()));
        }
        let mut zeta = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        zeta.push(0.0);
        for pair in points.windows(2) {
            acc += ((pair[1].0 - pair[0].0).powi(2) + (pair[1].1 - pair[0].1).powi(2)).sqrt();
            zeta.push(acc);
        }
        let g1 = points.iter().map(|p| p.0).collect();
        let g2 = points.iter().map(|p| p.1).collect();
        Self::new(zeta, g1, g2)
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least two points
    }

    /// Total arc length.
    pub fn l_top(&self) -> f64 {
        *self.zeta.last().unwrap()
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn g1(&self) -> &[f64] {
        &self.g1
    }

    pub fn g2(&self) -> &[f64] {
        &self.g2
    }

    pub fn vertex(&self, i: usize) -> (f64, f64) {
        (self.g1[i], self.g2[i])
    }

    pub fn vertices(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.g1.iter().zip(&self.g2).map(|(&a, &b)| (a, b))
    }
}

/// Rectangular groove cut into an otherwise flat surface.
///
/// `outer_level` is the `g1` coordinate of the flat outer surface,
/// `mouth_position` the length of the outer run on each side of the opening,
/// `width` the opening's extent along `g2`, and `depth` how far the base sits
/// beyond the outer level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrooveSpec {
    pub outer_level: f64,
    pub mouth_position: f64,
    pub width: f64,
    pub depth: f64,
}

impl GrooveSpec {
    pub fn new(
        outer_level: f64,
        mouth_position: f64,
        width: f64,
        depth: f64,
    ) -> Result<Self, TopographyError> {
        if !outer_level.is_finite() {
            return Err(TopographyError::BadGrooveDimension {
                name: "outer_level",
                value: outer_level,
            });
        }
        for (name, value) in
            [("mouth_position", mouth_position), ("width", width), ("depth", depth)]
        {
            if !(value.is_finite() && value > 0.0) {
                return Err(TopographyError::BadGrooveDimension { name, value });
            }
        }
        Ok(Self { outer_level, mouth_position, width, depth })
    }

    /// Arc length of the groove contour: two outer runs, two sidewalls, and
    /// the base.
    pub fn arc_length(&self) -> f64 {
        2.0 * self.mouth_position + 2.0 * self.depth + self.width
    }
}

/// Builds the groove contour, traversed as outer run, near sidewall, base,
/// far sidewall, outer run. Each straight edge carries `samples_per_section`
/// subdivisions so downstream quadrature sees a uniformly dense polyline.
pub fn make_groove(
    spec: &GrooveSpec,
    samples_per_section: usize,
) -> Result<Contour, TopographyError> {
    if samples_per_section == 0 {
        return Err(TopographyError::NoSegments);
    }
    let corners = [
        (spec.outer_level, 0.0),
        (spec.outer_level, spec.mouth_position),
        (spec.outer_level + spec.depth, spec.mouth_position),
        (spec.outer_level + spec.depth, spec.mouth_position + spec.width),
        (spec.outer_level, spec.mouth_position + spec.width),
        (spec.outer_level, 2.0 * spec.mouth_position + spec.width),
    ];
    let mut points = Vec::with_capacity(5 * samples_per_section + 1);
    points.push(corners[0]);
    for pair in corners.windows(2) {
        for i in 1..=samples_per_section {
            let t = i as f64 / samples_per_section as f64;
            points.push((
                pair[0].0 + t * (pair[1].0 - pair[0].0),
                pair[0].1 + t * (pair[1].1 - pair[0].1),
            ));
        }
    }
    Contour::from_points(&points)
}

/// Flat surface with a sinusoidal ripple, as a perpendicular-type graph:
/// `g1 = level + amplitude sin(2 pi g2 / wavelength)` over `g2` in
/// `[0, span]`.
pub fn make_sinusoid(
    level: f64,
    amplitude: f64,
    wavelength: f64,
    span: f64,
    samples: usize,
) -> Result<Contour, TopographyError> {
    for (name, value) in [("wavelength", wavelength), ("span", span)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(TopographyError::BadGrooveDimension { name, value });
        }
    }
    if samples < 2 {
        return Err(TopographyError::TooFewPoints(samples));
    }
    let points: Vec<(f64, f64)> = (0..=samples)
        .map(|i| {
            let s = span * i as f64 / samples as f64;
            (level + amplitude * (2.0 * std::f64::consts::PI * s / wavelength).sin(), s)
        })
        .collect();
    Contour::from_points(&points)
}

/// Piecewise-constant approximation of a contour section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    orientation: Orientation,
    values: Vec<f64>,
    segment_width: f64,
    depth: f64,
}

impl Section {
    /// `depth` is insertion-depth metadata carried by parallel sections (how
    /// far the probe advanced past the opening when the deepest segment was
    /// scanned); perpendicular sections must pass 0.
    pub fn new(
        orientation: Orientation,
        values: Vec<f64>,
        segment_width: f64,
        depth: f64,
    ) -> Result<Self, TopographyError> {
        if values.is_empty() {
            return Err(TopographyError::NoSegments);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TopographyError::NonFiniteValue);
        }
        if !(segment_width.is_finite() && segment_width > 0.0) {
            return Err(TopographyError::BadSegmentWidth(segment_width));
        }
        if !(depth.is_finite() && depth >= 0.0) {
            return Err(TopographyError::NegativeDepth(depth));
        }
        if orientation == Orientation::Perpendicular && depth != 0.0 {
            return Err(TopographyError::DepthOnPerpendicular);
        }
        Ok(Self { orientation, values, segment_width, depth })
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn segment_count(&self) -> usize {
        self.values.len()
    }

    pub fn segment_width(&self) -> f64 {
        self.segment_width
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Extent along the free coordinate.
    pub fn span(&self) -> f64 {
        self.segment_width * self.values.len() as f64
    }

    /// Sub-section over a contiguous segment range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self, TopographyError> {
        if range.is_empty() || range.end > self.values.len() {
            return Err(TopographyError::NoSegments);
        }
        Self::new(
            self.orientation,
            self.values[range].to_vec(),
            self.segment_width,
            self.depth,
        )
    }
}

/// Splits the section's free-coordinate span into `n` equal segments and
/// returns the mean contour value over each one.
///
/// The contour must be strictly monotone in the orientation's free
/// coordinate; either direction is accepted and normalized to increasing.
/// Means are exact integrals of the piecewise-linear contour against the
/// free-coordinate measure, so a linear ramp over `[0, 1]` with two segments
/// yields `[0.25, 0.75]`.
pub fn discretize(
    contour: &Contour,
    orientation: Orientation,
    n: usize,
) -> Result<Section, TopographyError> {
    if n == 0 {
        return Err(TopographyError::NoSegments);
    }
    let (free, values): (Vec<f64>, Vec<f64>) = match orientation {
        Orientation::Perpendicular => (contour.g2.clone(), contour.g1.clone()),
        Orientation::Parallel => (contour.g1.clone(), contour.g2.clone()),
    };
    let increasing = free.windows(2).all(|w| w[1] > w[0]);
    let decreasing = free.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(TopographyError::NotMonotone);
    }
    let (free, values) = if increasing {
        (free, values)
    } else {
        (
            free.iter().rev().copied().collect(),
            values.iter().rev().copied().collect(),
        )
    };
    let span = free[free.len() - 1] - free[0];
    let width = span / n as f64;
    let means = segment_means(&free, &values, n);
    Section::new(orientation, means, width, 0.0)
}

/// Mean of the piecewise-linear graph `(free, values)` over each of `n`
/// equal slices of the free span.
fn segment_means(free: &[f64], values: &[f64], n: usize) -> Vec<f64> {
    let start = free[0];
    let end = free[free.len() - 1];
    let width = (end - start) / n as f64;
    let mut means = Vec::with_capacity(n);
    for k in 0..n {
        let lo = start + k as f64 * width;
        let hi = if k + 1 == n { end } else { start + (k + 1) as f64 * width };
        let mut integral = 0.0;
        for i in 0..free.len() - 1 {
            let (a, b) = (free[i], free[i + 1]);
            if b <= lo || a >= hi {
                continue;
            }
            let (ca, cb) = (a.max(lo), b.min(hi));
            let va = values[i] + (values[i + 1] - values[i]) * (ca - a) / (b - a);
            let vb = values[i] + (values[i + 1] - values[i]) * (cb - a) / (b - a);
            integral += 0.5 * (va + vb) * (cb - ca);
        }
        means.push(integral / (hi - lo));
    }
    means
}

/// A section pinned onto the assembled contour.
///
/// `zeta_start` declares where the section's free span begins in assembled
/// arc bookkeeping; consecutive placements must tile without gaps or
/// overlaps. `free_start` and `free_dir` give the free-coordinate value at
/// the section start and the traversal direction along the free axis.
#[derive(Debug, Clone)]
pub struct PlacedSection {
    pub section: Section,
    pub zeta_start: f64,
    pub free_start: f64,
    pub free_dir: f64,
}

/// Joins placed sections into one staircase contour.
///
/// Each segment contributes a constant-value edge across its free interval;
/// value jumps between segments and between sections become connector edges,
/// so the output arc length exceeds the declared spans by the jump lengths.
pub fn assemble(placed: &[PlacedSection]) -> Result<Contour, TopographyError> {
    if placed.is_empty() {
        return Err(TopographyError::NothingToAssemble);
    }
    let tol_scale: f64 = placed.iter().map(|p| p.section.span()).sum();
    let tol = 1e-9 * tol_scale.max(1.0);
    let mut expected = placed[0].zeta_start;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (index, p) in placed.iter().enumerate() {
        if p.free_dir != 1.0 && p.free_dir != -1.0 {
            return Err(TopographyError::BadDirection(p.free_dir));
        }
        let end = p.zeta_start + p.section.span();
        if (p.zeta_start - expected).abs() > tol {
            return Err(TopographyError::NonContiguous {
                index,
                start: p.zeta_start,
                end,
                expected,
            });
        }
        expected = end;
        let w = p.section.segment_width() * p.free_dir;
        for (k, &v) in p.section.values().iter().enumerate() {
            let fa = p.free_start + k as f64 * w;
            let fb = p.free_start + (k + 1) as f64 * w;
            let (pa, pb) = match p.section.orientation() {
                Orientation::Perpendicular => ((v, fa), (v, fb)),
                Orientation::Parallel => ((fa, v), (fb, v)),
            };
            push_point(&mut points, pa);
            push_point(&mut points, pb);
        }
    }
    Contour::from_points(&points)
}

fn push_point(points: &mut Vec<(f64, f64)>, p: (f64, f64)) {
    if points.last() != Some(&p) {
        points.push(p);
    }
}

/// Symmetric Hausdorff distance between two polylines, estimated by sampling
/// `samples_per_edge` points along every edge of each and measuring exact
/// point-to-edge distances against the other.
pub fn polyline_hausdorff(a: &Contour, b: &Contour, samples_per_edge: usize) -> f64 {
    directed_hausdorff(a, b, samples_per_edge)
        .max(directed_hausdorff(b, a, samples_per_edge))
}

fn directed_hausdorff(a: &Contour, b: &Contour, samples_per_edge: usize) -> f64 {
    let m = samples_per_edge.max(1);
    let mut worst = 0.0f64;
    for i in 0..a.len() - 1 {
        let (p, q) = (a.vertex(i), a.vertex(i + 1));
        for s in 0..=m {
            let t = s as f64 / m as f64;
            let x = (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1));
            let mut best = f64::INFINITY;
            for j in 0..b.len() - 1 {
                best = best.min(point_segment_distance(x, b.vertex(j), b.vertex(j + 1)));
            }
            worst = worst.max(best);
        }
    }
    worst
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn contour_validation() {
        assert!(Contour::new(vec![0.0], vec![1.0], vec![1.0]).is_err());
        assert!(Contour::new(vec![0.0, 1.0], vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(Contour::new(vec![0.5, 1.0], vec![1.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(Contour::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(Contour::new(vec![0.0, 1.0], vec![1.0, f64::NAN], vec![0.0, 1.0]).is_err());
        assert!(Contour::from_points(&[(0.0, 0.0), (0.0, 0.0)]).is_err());
    }

    #[test]
    fn arc_length_accumulates_euclidean_distance() {
        let c = Contour::from_points(&[(0.0, 0.0), (3.0, 4.0), (3.0, 6.0)]).unwrap();
        assert_relative_eq!(c.l_top(), 7.0, epsilon = 1e-12);
        assert_eq!(c.zeta()[1], 5.0);
    }

    #[test]
    fn groove_arc_length_counts_walls_and_base() {
        let spec = GrooveSpec::new(0.0, 3.0, 4.0, 10.0).unwrap();
        let contour = make_groove(&spec, 8).unwrap();
        // Two outer runs of 3, two sidewalls of 10, base of 4.
        assert_relative_eq!(contour.l_top(), 2.0 * 3.0 + 2.0 * 10.0 + 4.0, epsilon = 1e-9);
        assert_eq!(contour.len(), 5 * 8 + 1);
    }

    #[test]
    fn degenerate_grooves_are_rejected() {
        assert!(GrooveSpec::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(GrooveSpec::new(0.0, 1.0, -1.0, 1.0).is_err());
        assert!(GrooveSpec::new(f64::NAN, 1.0, 1.0, 1.0).is_err());
        let spec = GrooveSpec::new(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(make_groove(&spec, 0).is_err());
    }

    #[test]
    fn groove_contour_hits_the_corner_points() {
        let spec = GrooveSpec::new(1.0, 2.0, 3.0, 4.0).unwrap();
        let contour = make_groove(&spec, 4).unwrap();
        for corner in [(1.0, 2.0), (5.0, 2.0), (5.0, 5.0), (1.0, 5.0)] {
            assert!(
                contour.vertices().any(|(a, b)| (a - corner.0).abs() < 1e-12
                    && (b - corner.1).abs() < 1e-12),
                "missing corner {corner:?}"
            );
        }
    }

    #[test]
    fn sinusoid_matches_sine_at_sample_points() {
        let (level, amp, wavelength, span) = (0.02, 0.0025, 0.05, 0.05);
        let c = make_sinusoid(level, amp, wavelength, span, 40).unwrap();
        for (i, (g1, g2)) in c.vertices().enumerate() {
            let s = span * i as f64 / 40.0;
            assert_relative_eq!(g2, s, epsilon = 1e-12);
            assert_relative_eq!(
                g1,
                level + amp * (2.0 * std::f64::consts::PI * s / wavelength).sin(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn discretize_constant_contour() {
        let c = Contour::from_points(&[(2.0, 0.0), (2.0, 1.0)]).unwrap();
        let s = discretize(&c, Orientation::Perpendicular, 4).unwrap();
        assert_eq!(s.values(), &[2.0, 2.0, 2.0, 2.0]);
        assert_relative_eq!(s.segment_width(), 0.25);
    }

    #[test]
    fn discretize_linear_ramp() {
        let c = Contour::from_points(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let s = discretize(&c, Orientation::Perpendicular, 2).unwrap();
        assert_relative_eq!(s.values()[0], 0.25, epsilon = 1e-12);
        assert_relative_eq!(s.values()[1], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn discretize_sine_matches_exact_segment_means() {
        // One full period split into four segments; means follow from
        // integrating the sine in closed form over each quarter.
        let (amp, period) = (0.8, 2.0);
        let c = make_sinusoid(0.0, amp, period, period, 4096).unwrap();
        let s = discretize(&c, Orientation::Perpendicular, 4).unwrap();
        let expected = 2.0 * amp / std::f64::consts::PI;
        let signs = [1.0, 1.0, -1.0, -1.0];
        for (v, sign) in s.values().iter().zip(signs) {
            assert_relative_eq!(*v, sign * expected, max_relative = 1e-4);
        }
    }

    #[test]
    fn discretize_respects_descending_free_coordinate() {
        let up = Contour::from_points(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        let down = Contour::from_points(&[(1.0, 1.0), (0.0, 0.0)]).unwrap();
        let a = discretize(&up, Orientation::Parallel, 3).unwrap();
        let b = discretize(&down, Orientation::Parallel, 3).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn discretize_rejects_non_monotone_sections() {
        let spec = GrooveSpec::new(0.0, 1.0, 1.0, 1.0).unwrap();
        let groove = make_groove(&spec, 4).unwrap();
        assert!(matches!(
            discretize(&groove, Orientation::Perpendicular, 4),
            Err(TopographyError::NotMonotone)
        ));
        let c = Contour::from_points(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert!(discretize(&c, Orientation::Parallel, 0).is_err());
    }

    #[test]
    fn discretized_means_stay_within_local_variation() {
        let c = make_sinusoid(1.0, 0.3, 0.5, 1.0, 2048).unwrap();
        let n = 8;
        let s = discretize(&c, Orientation::Perpendicular, n).unwrap();
        for (k, v) in s.values().iter().enumerate() {
            let lo = k as f64 / n as f64;
            let hi = (k + 1) as f64 / n as f64;
            let in_segment: Vec<f64> = c
                .vertices()
                .filter(|&(_, g2)| (lo..=hi).contains(&g2))
                .map(|(g1, _)| g1)
                .collect();
            let min = in_segment.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = in_segment.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mid = 0.5 * (min + max);
            assert!(
                (v - mid).abs() <= 0.5 * (max - min) + 1e-12,
                "segment {k}: mean {v} outside variation [{min}, {max}]"
            );
        }
    }

    #[test]
    fn section_validation() {
        assert!(Section::new(Orientation::Parallel, vec![], 0.1, 0.0).is_err());
        assert!(Section::new(Orientation::Parallel, vec![1.0], 0.0, 0.0).is_err());
        assert!(Section::new(Orientation::Parallel, vec![f64::NAN], 0.1, 0.0).is_err());
        assert!(Section::new(Orientation::Parallel, vec![1.0], 0.1, -1.0).is_err());
        assert!(Section::new(Orientation::Perpendicular, vec![1.0], 0.1, 0.5).is_err());
        assert!(Section::new(Orientation::Parallel, vec![1.0], 0.1, 0.5).is_ok());
    }

    fn placed(section: Section, zeta_start: f64, free_start: f64, free_dir: f64) -> PlacedSection {
        PlacedSection { section, zeta_start, free_start, free_dir }
    }

    #[test]
    fn assemble_perpendicular_and_parallel_into_a_corner() {
        let a = Section::new(Orientation::Perpendicular, vec![2.0], 1.0, 0.0).unwrap();
        let b = Section::new(Orientation::Parallel, vec![1.0], 1.0, 0.0).unwrap();
        let contour = assemble(&[
            placed(a, 0.0, 0.0, 1.0),
            placed(b, 1.0, 2.0, 1.0),
        ])
        .unwrap();
        let pts: Vec<_> = contour.vertices().collect();
        assert_eq!(pts, vec![(2.0, 0.0), (2.0, 1.0), (3.0, 1.0)]);
        assert_relative_eq!(contour.l_top(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn assemble_inserts_connectors_at_value_jumps() {
        let s = Section::new(Orientation::Perpendicular, vec![1.0, 3.0], 1.0, 0.0).unwrap();
        let contour = assemble(&[placed(s, 0.0, 0.0, 1.0)]).unwrap();
        let pts: Vec<_> = contour.vertices().collect();
        assert_eq!(pts, vec![(1.0, 0.0), (1.0, 1.0), (3.0, 1.0), (3.0, 2.0)]);
        // Declared span is 2; the jump adds 2 more.
        assert_relative_eq!(contour.l_top(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn assemble_rejects_gaps_overlaps_and_bad_directions() {
        let s = || Section::new(Orientation::Perpendicular, vec![1.0], 1.0, 0.0).unwrap();
        let gap = assemble(&[placed(s(), 0.0, 0.0, 1.0), placed(s(), 1.5, 1.0, 1.0)]);
        assert!(matches!(gap, Err(TopographyError::NonContiguous { index: 1, .. })));
        let overlap = assemble(&[placed(s(), 0.0, 0.0, 1.0), placed(s(), 0.5, 1.0, 1.0)]);
        assert!(matches!(overlap, Err(TopographyError::NonContiguous { .. })));
        assert!(matches!(
            assemble(&[placed(s(), 0.0, 0.0, 0.5)]),
            Err(TopographyError::BadDirection(_))
        ));
        assert!(matches!(assemble(&[]), Err(TopographyError::NothingToAssemble)));
    }

    #[test]
    fn assembling_a_split_list_matches_assembling_the_whole() {
        let outer = Section::new(Orientation::Perpendicular, vec![1.0, 1.2], 0.5, 0.0).unwrap();
        let wall = Section::new(Orientation::Parallel, vec![1.0, 0.9], 0.4, 0.8).unwrap();
        let all = [placed(outer, 0.0, 0.0, 1.0), placed(wall, 1.0, 1.2, 1.0)];
        let whole = assemble(&all).unwrap();
        let head = assemble(&all[..1]).unwrap();
        let tail = assemble(&all[1..]).unwrap();
        let mut joined: Vec<(f64, f64)> = head.vertices().collect();
        for p in tail.vertices() {
            if joined.last() != Some(&p) {
                joined.push(p);
            }
        }
        assert_eq!(whole.vertices().collect::<Vec<_>>(), joined);
    }

    #[test]
    fn groove_staircase_tracks_the_true_contour() {
        // Discretize the four graph-like faces of a groove, reassemble the
        // staircase, and compare against the generating polyline.
        let spec = GrooveSpec::new(1.0, 1.0, 1.0, 0.75).unwrap();
        let truth = make_groove(&spec, 64).unwrap();
        let n = 4;
        let outer_left =
            Contour::from_points(&[(1.0, 0.0), (1.0, 1.0)]).unwrap();
        let wall = Contour::from_points(&[(1.0, 1.0), (1.75, 1.0)]).unwrap();
        let base = Contour::from_points(&[(1.75, 1.0), (1.75, 2.0)]).unwrap();
        let far_wall = Contour::from_points(&[(1.75, 2.0), (1.0, 2.0)]).unwrap();
        let outer_right = Contour::from_points(&[(1.0, 2.0), (1.0, 3.0)]).unwrap();
        let sections = [
            placed(discretize(&outer_left, Orientation::Perpendicular, n).unwrap(), 0.0, 0.0, 1.0),
            placed(discretize(&wall, Orientation::Parallel, n).unwrap(), 1.0, 1.0, 1.0),
            placed(discretize(&base, Orientation::Perpendicular, n).unwrap(), 1.75, 1.0, 1.0),
            placed(discretize(&far_wall, Orientation::Parallel, n).unwrap(), 2.75, 1.75, -1.0),
            placed(discretize(&outer_right, Orientation::Perpendicular, n).unwrap(), 3.5, 2.0, 1.0),
        ];
        let staircase = assemble(&sections).unwrap();
        let distance = polyline_hausdorff(&staircase, &truth, 8);
        let max_width = sections
            .iter()
            .map(|p| p.section.segment_width())
            .fold(0.0, f64::max);
        assert!(distance <= 0.5 * max_width + 1e-9, "hausdorff {distance}");
    }

    #[test]
    fn hausdorff_of_identical_and_offset_lines() {
        let a = Contour::from_points(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let b = Contour::from_points(&[(0.0, 0.25), (1.0, 0.25)]).unwrap();
        assert_relative_eq!(polyline_hausdorff(&a, &a, 4), 0.0);
        assert_relative_eq!(polyline_hausdorff(&a, &b, 4), 0.25, epsilon = 1e-12);
    }
}
