//! Fixed-grid quadrature and bracketed root finding.
//!
//! Everything here is deterministic: no adaptivity, no randomness, so results
//! are bit-stable across runs for identical inputs.

/// Composite Simpson integration of `f` over `[a, b]` with `intervals`
/// uniform subdivisions. `intervals` is rounded up to the next even count.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Integrates samples `ys` on the strictly increasing grid `xs`.
///
/// A uniform grid with an even interval count gets composite Simpson;
/// anything else falls back to the trapezoid rule. Both rules are linear in
/// the nodal values, so scaling the samples scales the integral exactly.
pub fn integrate_samples(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "grid/value length mismatch");
    assert!(xs.len() >= 2, "need at least two samples");
    let n = xs.len() - 1;
    if n % 2 == 0 && is_uniform(xs) {
        let h = (xs[n] - xs[0]) / n as f64;
        let mut acc = ys[0] + ys[n];
        for (i, y) in ys.iter().enumerate().take(n).skip(1) {
            acc += if i % 2 == 1 { 4.0 * y } else { 2.0 * y };
        }
        acc * h / 3.0
    } else {
        let mut acc = 0.0;
        for i in 0..n {
            acc += 0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]);
        }
        acc
    }
}

fn is_uniform(xs: &[f64]) -> bool {
    let n = xs.len() - 1;
    let h = (xs[n] - xs[0]) / n as f64;
    let tol = 1e-9 * h.abs().max(f64::MIN_POSITIVE);
    xs.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= tol)
}

/// Bisection root of `f` on `[a, b]`. Requires a sign change on the bracket.
///
/// Runs until the bracket width drops below `tol` or 200 halvings, whichever
/// comes first; the midpoint of the final bracket is returned.
pub fn bisect<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Option<f64> {
    let (mut lo, mut hi) = (a, b);
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() < tol {
            return Some(mid);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Some(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
