//! Adaptive Simpson quadrature.
//!
//! The integrands in this crate are made smooth before they get here (the
//! arcsine-singular energy density is always integrated through a sin²
//! substitution, and known ramp/threshold kinks are used as segment
//! boundaries), so a classic recursive Simpson rule with Richardson
//! extrapolation reaches tight absolute tolerances in a handful of levels.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Bounded jumps and kinks that miss the dyadic subdivision nodes are
/// absorbed once the straddling interval narrows to floating-point width, at
/// a cost far below any practical tolerance. Fails with
/// [`Error::QuadratureFailure`] only when an interval refuses to converge all
/// the way down to the depth cap — in practice, when the integrand is
/// unbounded inside the range.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    debug_assert!(a <= b, "integration bounds out of order: [{a}, {b}]");
    if a >= b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    refine(f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Integrates `f` piecewise over consecutive segments of `points`.
///
/// `points` must be non-decreasing; the overall absolute tolerance `tol` is
/// divided evenly among the segments. Use this to hand the integrator any
/// known kink locations so each piece it sees is smooth.
pub fn integrate_segments<F: Fn(f64) -> f64>(f: &F, points: &[f64], tol: f64) -> Result<f64> {
    let segments = points.len().saturating_sub(1);
    if segments == 0 {
        return Ok(0.0);
    }
    let per_segment = tol / segments as f64;
    let mut total = 0.0;
    for w in points.windows(2) {
        total += adaptive_simpson(f, w[0], w[1], per_segment)?;
    }
    Ok(total)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        // Richardson extrapolation: the composite estimate plus the
        // fourth-order correction term.
        return Ok(left + right + delta / 15.0);
    }
    // A step that sits a rounding error away from a declared segment boundary
    // never satisfies the Richardson test: both estimates straddle the same
    // jump at every depth. Once the interval has collapsed to the floating
    // point scale of its endpoints the sliver contributes at most about
    // |f|·width, so accept the composite estimate and move on. Unbounded
    // integrands still fall through to the depth cap.
    if b - a <= 1e-12 * (1.0 + a.abs() + b.abs()) && (left + right).is_finite() {
        return Ok(left + right);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::QuadratureFailure(format!(
            "tolerance {tol:.3e} not reached on [{a:.6}, {b:.6}] after {MAX_DEPTH} subdivisions"
        )));
    }
    let half_tol = 0.5 * tol;
    let l = refine(f, a, m, fa, flm, fm, left, half_tol, depth + 1)?;
    let r = refine(f, m, b, fm, frm, fb, right, half_tol, depth + 1)?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn integrates_sine_over_half_period() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn cubic_is_exact_for_simpson() {
        let v = adaptive_simpson(&|x: f64| x * x * x, 0.0, 1.0, 1e-9).unwrap();
        assert!((v - 0.25).abs() < 1e-14, "got {v}");
    }

    #[test]
    fn empty_and_degenerate_ranges() {
        assert_eq!(adaptive_simpson(&|_| 1.0, 2.0, 2.0, 1e-9).unwrap(), 0.0);
        assert_eq!(integrate_segments(&|_| 1.0, &[], 1e-9).unwrap(), 0.0);
        assert_eq!(integrate_segments(&|_| 1.0, &[0.5], 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn segments_sum_to_the_whole() {
        let f = |x: f64| (3.0 * x).cos() + 0.5 * x;
        let whole = adaptive_simpson(&f, 0.0, 2.0, 1e-12).unwrap();
        let pieced = integrate_segments(&f, &[0.0, 0.3, 1.1, 2.0], 1e-12).unwrap();
        assert!((whole - pieced).abs() < 1e-10);
    }

    #[test]
    fn step_at_irrational_point_converges() {
        // A step at an irrational point never lands on a dyadic subdivision
        // node; the straddling sliver collapses to the width floor and its
        // leftover error stays far below the requested tolerance.
        let step = |x: f64| if x < FRAC_1_SQRT_2 { 0.0 } else { 1.0 };
        let v = adaptive_simpson(&step, 0.0, 1.0, 1e-13).unwrap();
        assert!((v - (1.0 - FRAC_1_SQRT_2)).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn unbounded_integrand_reports_failure() {
        // 1/√x blows up at zero, so no amount of subdivision helps and the
        // depth cap has to trip.
        let err = adaptive_simpson(&|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-9).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure(_)), "got {err:?}");
    }

    #[test]
    fn piecewise_smooth_with_declared_kink() {
        // |cos x| has a kink at π/2; splitting there makes it easy.
        let f = |x: f64| x.cos().abs();
        let v = integrate_segments(&f, &[0.0, PI / 2.0, PI], 1e-11).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "got {v}");
    }
}
