//! Closed-form and quadrature predictions for the biased-sample attack.
//!
//! A classical pulse of energy `E0` whose hidden polarization λ is uniform on
//! `[−π/2, π/2)` deposits `E = Emax·cos²(φ−λ)` in a detector arm, where
//! `Emax = E0·cos²(rel)` is set by the arm's offset `rel` from the analyzer.
//! Over uniform λ that energy follows the arcsine density implemented by
//! [`energy_density`]; pushing it through a detector response gives the
//! closed-form click probability for ideal thresholds and a one-dimensional
//! quadrature for linear ones. These values are the oracles the Monte-Carlo
//! engine is validated against — they never look at the simulation code.
//!
//! All quadrature here happens after the substitution `E = Emax·sin²u`,
//! which removes both endpoint singularities exactly: the density times the
//! Jacobian collapses to the constant `2/π`.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{malus_fractions, Angle, DetectorModel};
use crate::quadrature::integrate_segments;

/// Which beamsplitter output a prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// The `cos²(rel)` output.
    Transmitted,
    /// The `sin²(rel)` output.
    Reflected,
}

/// Maximum energy reaching an arm at relative angle `rel` from the analyzer.
fn arm_emax(e0: f64, rel: Angle, arm: Arm) -> f64 {
    let (c2, s2) = malus_fractions(rel);
    match arm {
        Arm::Transmitted => e0 * c2,
        Arm::Reflected => e0 * s2,
    }
}

/// Probability density of the detector-incident energy under uniform λ.
///
/// For `E = Emax·cos²(φ−λ)` with λ uniform, the density is
/// `1/(π·√((Emax−E)·E))` on `(0, Emax)` — an arcsine law with integrable
/// singularities at both ends.
pub fn energy_density(e: f64, emax: f64) -> Result<f64> {
    if !(emax > 0.0) || !emax.is_finite() {
        return Err(Error::Domain(format!(
            "energy density needs a positive finite maximum energy, got {emax}"
        )));
    }
    if !(e > 0.0) || e >= emax {
        return Err(Error::Domain(format!(
            "energy density is defined on the open interval (0, {emax}), got {e}"
        )));
    }
    Ok(1.0 / (std::f64::consts::PI * ((emax - e) * e).sqrt()))
}

/// Closed-form singles probability for an ideal threshold detector.
///
/// The detector clicks when `Emax·cos²(φ−λ) > Φ`, i.e. for λ inside a window
/// of half-width `arccos√(Φ/Emax)`; over uniform λ that has probability
/// `(2/π)·arccos√(Φ/Emax)`. When the whole support sits at or below the
/// threshold the probability is exactly zero.
pub fn ideal_click_probability(e0: f64, threshold: f64, rel: Angle, arm: Arm) -> f64 {
    let emax = arm_emax(e0, rel, arm);
    if threshold >= emax {
        return 0.0;
    }
    let ratio = (threshold / emax).sqrt();
    (2.0 / std::f64::consts::PI) * ratio.acos()
}

/// Quadrature singles probability for a linear threshold detector.
///
/// Integrates the energy density against the ramp response
/// `clamp((E−Φ)/(E_sat−Φ), 0, 1)` over the arm's energy support. The ramp kinks
/// at `Φ` and `E_sat` are used as segment boundaries, so each piece the
/// integrator sees is smooth; the absolute error is kept below 1e−8.
pub fn linear_click_probability(
    e0: f64,
    threshold: f64,
    saturation: f64,
    rel: Angle,
    arm: Arm,
) -> Result<f64> {
    let model = DetectorModel::LinearThreshold { threshold, saturation };
    model.validate()?;
    if !(e0 > 0.0) || !e0.is_finite() {
        return Err(Error::Config(format!("pulse energy must be positive and finite, got {e0}")));
    }
    let emax = arm_emax(e0, rel, arm);
    if emax <= threshold {
        return Ok(0.0);
    }
    let u_threshold = (threshold / emax).sqrt().asin();
    let mut points = vec![u_threshold];
    if saturation < emax {
        points.push((saturation / emax).sqrt().asin());
    }
    points.push(FRAC_PI_2);
    let integrand = |u: f64| {
        let s = u.sin();
        model.click_probability(emax * s * s)
    };
    let raw = integrate_segments(&integrand, &points, 1e-9)?;
    Ok(raw * 2.0 / std::f64::consts::PI)
}

/// Detected-coincidence correlation of the two-station attack, by quadrature.
///
/// Both stations watch classical pulse pairs sharing one hidden polarization
/// λ, with no polarimeter stage: analyzer channels receive `E0·cos²(x−λ)` and
/// `E0·sin²(x−λ)` for analyzer angle `x ∈ {0, Δ}`. A round contributes `+1`
/// (`−1`) when a station clicks in exactly channel 1 (channel 0); the
/// correlation is the λ-average of the signed product over the λ-average of
/// the coincidence probability. Threshold crossings of every energy curve are
/// pre-computed and used as integration segment boundaries.
pub fn predict_attack_correlation(
    alice: &DetectorModel,
    bob: &DetectorModel,
    e0: f64,
    delta: Angle,
) -> Result<f64> {
    for (model, who) in [(alice, "alice"), (bob, "bob")] {
        if model.is_quantum_efficiency() {
            return Err(Error::Config(format!(
                "attack correlation is defined for threshold detectors, {who} uses an efficiency model"
            )));
        }
        model.validate()?;
    }
    if !(e0 > 0.0) || !e0.is_finite() {
        return Err(Error::Config(format!("pulse energy must be positive and finite, got {e0}")));
    }

    let d = delta.radians();
    let station = move |model: &DetectorModel, x: f64, lam: f64| -> (f64, f64) {
        let (c2, s2) = malus_fractions(Angle::new(x - lam));
        let p1 = model.click_probability(e0 * c2);
        let p0 = model.click_probability(e0 * s2);
        let plus = p1 * (1.0 - p0);
        let minus = p0 * (1.0 - p1);
        (plus - minus, plus + minus)
    };

    let points = correlation_kinks(alice, bob, e0, d);
    let numerator = integrate_segments(
        &|lam| {
            let (aw, _) = station(alice, 0.0, lam);
            let (bw, _) = station(bob, d, lam);
            aw * bw
        },
        &points,
        1e-7,
    )?;
    let denominator = integrate_segments(
        &|lam| {
            let (_, at) = station(alice, 0.0, lam);
            let (_, bt) = station(bob, d, lam);
            at * bt
        },
        &points,
        1e-7,
    )?;

    if denominator.abs() < 1e-6 {
        return Err(Error::DegenerateScenario(format!(
            "coincidence probability vanishes for E0 = {e0} at Δ = {d}"
        )));
    }
    Ok(numerator / denominator)
}

/// λ values where some detector's response changes analytic form.
fn correlation_kinks(alice: &DetectorModel, bob: &DetectorModel, e0: f64, d: f64) -> Vec<f64> {
    let mut points = vec![-FRAC_PI_2, FRAC_PI_2];
    let mut add_for = |model: &DetectorModel, x: f64| {
        let breaks: &[f64] = match *model {
            DetectorModel::IdealThreshold { threshold } => &[threshold],
            DetectorModel::LinearThreshold { threshold, saturation } => &[threshold, saturation],
            DetectorModel::QuantumEfficiency { .. } => &[],
        };
        for &level in breaks {
            if level >= e0 {
                continue;
            }
            let ratio = (level / e0).sqrt();
            // cos²(x−λ) = level/e0 and sin²(x−λ) = level/e0 respectively.
            for w in [ratio.acos(), ratio.asin()] {
                for k in [-1.0, 0.0, 1.0] {
                    for sign in [-1.0, 1.0] {
                        let lam = x + sign * w + k * std::f64::consts::PI;
                        if (-FRAC_PI_2..=FRAC_PI_2).contains(&lam) {
                            points.push(lam);
                        }
                    }
                }
            }
        }
    };
    add_for(alice, 0.0);
    add_for(bob, d);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    points
}

/// CHSH detection-efficiency threshold `2(√2−1) ≈ 0.8284`.
///
/// Below this per-station efficiency, post-selected coincidences can show
/// CHSH violation without any quantum source — the detection loophole.
pub fn critical_efficiency() -> f64 {
    2.0 * (SQRT_2 - 1.0)
}

/// How the values of an [`AnalyticPrediction`] were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMethod {
    ClosedForm,
    Quadrature,
}

/// A prediction curve over a grid of relative angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPrediction {
    /// Relative angles in radians, strictly increasing.
    pub grid: Vec<f64>,
    /// One probability or correlation per grid point.
    pub values: Vec<f64>,
    pub method: PredictionMethod,
}

impl AnalyticPrediction {
    fn validated(grid: Vec<f64>, values: Vec<f64>, method: PredictionMethod) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Config(format!(
                "prediction grid and values differ in length ({} vs {})",
                grid.len(),
                values.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("prediction grid must be strictly increasing".into()));
        }
        if grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::Config("prediction grid contains non-finite angles".into()));
        }
        if values.iter().any(|v| !v.is_finite() || !(-1.0..=1.0).contains(v)) {
            return Err(Error::Config(
                "prediction values must be finite and lie in [−1, 1]".into(),
            ));
        }
        Ok(AnalyticPrediction { grid, values, method })
    }
}

/// Singles-probability curve for one detector arm across relative angles.
///
/// Dispatches to the closed form for ideal detectors and to quadrature for
/// linear ones; efficiency models have no λ-driven singles curve and are
/// rejected.
pub fn singles_curve(
    detector: &DetectorModel,
    e0: f64,
    grid: &[f64],
    arm: Arm,
) -> Result<AnalyticPrediction> {
    detector.validate()?;
    if !(e0 > 0.0) || !e0.is_finite() {
        return Err(Error::Config(format!("pulse energy must be positive and finite, got {e0}")));
    }
    let mut values = Vec::with_capacity(grid.len());
    let method = match *detector {
        DetectorModel::IdealThreshold { threshold } => {
            for &rel in grid {
                values.push(ideal_click_probability(e0, threshold, Angle::new(rel), arm));
            }
            PredictionMethod::ClosedForm
        }
        DetectorModel::LinearThreshold { threshold, saturation } => {
            for &rel in grid {
                values.push(linear_click_probability(
                    e0,
                    threshold,
                    saturation,
                    Angle::new(rel),
                    arm,
                )?);
            }
            PredictionMethod::Quadrature
        }
        DetectorModel::QuantumEfficiency { .. } => {
            return Err(Error::Config(
                "singles curves are defined for threshold detectors only".into(),
            ));
        }
    };
    AnalyticPrediction::validated(grid.to_vec(), values, method)
}

/// Attack-correlation curve across relative angles Δ.
pub fn attack_correlation_curve(
    alice: &DetectorModel,
    bob: &DetectorModel,
    e0: f64,
    grid: &[f64],
) -> Result<AnalyticPrediction> {
    let mut values = Vec::with_capacity(grid.len());
    for &delta in grid {
        values.push(predict_attack_correlation(alice, bob, e0, Angle::new(delta))?);
    }
    AnalyticPrediction::validated(grid.to_vec(), values, PredictionMethod::Quadrature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

    const TWO_OVER_PI: f64 = 0.636_619_772_367_581_4;
    const ONE_OVER_PI: f64 = 0.318_309_886_183_790_7;
    const SQRT_2_OVER_2: f64 = 0.707_106_781_186_547_6;

    #[test]
    fn density_point_values_and_symmetry() {
        let mid = energy_density(0.5, 1.0).unwrap();
        assert!((mid - TWO_OVER_PI).abs() < 1e-15, "got {mid}");
        assert_eq!(
            energy_density(0.1, 1.0).unwrap(),
            energy_density(0.9, 1.0).unwrap()
        );
    }

    #[test]
    fn density_domain_errors() {
        assert!(matches!(energy_density(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(energy_density(1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(energy_density(-0.3, 1.0), Err(Error::Domain(_))));
        assert!(matches!(energy_density(1.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(energy_density(0.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(energy_density(0.5, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn density_normalizes_to_one() {
        // Substituting E = Emax·sin²u turns density·dE into the constant
        // 2/π; integrating the *computed* density against the Jacobian over
        // almost all of [0, π/2] (the clipped endpoint slivers contribute
        // exactly (2/π)·ε each) must recover total probability 1.
        let eps = 1e-5;
        for emax in [0.5, 1.0, 2.0] {
            let integrand = |u: f64| {
                let s = u.sin();
                let e = emax * s * s;
                energy_density(e, emax).unwrap() * emax * (2.0 * u).sin()
            };
            let bulk = adaptive_simpson(&integrand, eps, FRAC_PI_2 - eps, 1e-11).unwrap();
            let total = bulk + 2.0 * TWO_OVER_PI * eps;
            assert!((total - 1.0).abs() < 1e-9, "Emax={emax}: total {total}");
        }
    }

    #[test]
    fn ideal_click_probability_fixed_points() {
        let p = ideal_click_probability(2.0, 1.0, Angle::ZERO, Arm::Transmitted);
        assert!((p - 0.5).abs() < 1e-12, "got {p}");

        // At a π/4 offset the arm tops out exactly at the threshold.
        let z = ideal_click_probability(2.0, 1.0, Angle::new(FRAC_PI_4), Arm::Transmitted);
        assert_eq!(z, 0.0);

        let p = ideal_click_probability(4.0, 1.0, Angle::ZERO, Arm::Transmitted);
        assert!((p - 2.0 / 3.0).abs() < 1e-12, "got {p}");

        // The reflected arm at π/2 sees the whole pulse.
        let r = ideal_click_probability(2.0, 1.0, Angle::new(FRAC_PI_2), Arm::Reflected);
        assert_eq!(r, ideal_click_probability(2.0, 1.0, Angle::ZERO, Arm::Transmitted));
    }

    #[test]
    fn ideal_arms_complement_under_quarter_turn() {
        // transmitted(rel) and reflected(rel + π/2) describe the same arm.
        // Near the threshold zero the arccos amplifies last-ulp noise in the
        // Malus factor to ~1e−8, so the comparison tolerance is 1e−7.
        for i in 0..=40 {
            let rel = -FRAC_PI_2 + i as f64 * PI / 40.0;
            let t = ideal_click_probability(2.0, 1.0, Angle::new(rel), Arm::Transmitted);
            let r = ideal_click_probability(2.0, 1.0, Angle::new(rel + FRAC_PI_2), Arm::Reflected);
            assert!((t - r).abs() < 1e-7, "rel={rel}: {t} vs {r}");
        }
    }

    #[test]
    fn ideal_monotonicity_and_period() {
        // Non-increasing in |rel| on [0, π/4].
        let mut last = f64::INFINITY;
        for i in 0..=16 {
            let rel = i as f64 * FRAC_PI_4 / 16.0;
            let p = ideal_click_probability(2.0, 1.0, Angle::new(rel), Arm::Transmitted);
            assert!(p <= last + 1e-12, "rel={rel} rose: {p} after {last}");
            last = p;
        }
        // Non-increasing in Φ/E0.
        let mut last = f64::INFINITY;
        for i in 1..=20 {
            let threshold = 0.1 * i as f64;
            let p = ideal_click_probability(2.0, threshold, Angle::ZERO, Arm::Transmitted);
            assert!(p <= last + 1e-12);
            last = p;
        }
        // Period π in rel; a π/2 shift exchanges the two arms.
        for i in 0..10 {
            let rel = -1.4 + 0.3 * i as f64;
            let t = |r: f64| ideal_click_probability(3.0, 1.0, Angle::new(r), Arm::Transmitted);
            let refl = |r: f64| ideal_click_probability(3.0, 1.0, Angle::new(r), Arm::Reflected);
            assert!((t(rel) - t(rel + PI)).abs() < 1e-7);
            assert!((t(rel + FRAC_PI_2) - refl(rel)).abs() < 1e-7);
            assert!((refl(rel + FRAC_PI_2) - t(rel)).abs() < 1e-7);
        }
    }

    #[test]
    fn closed_form_agrees_with_density_quadrature() {
        // Independent route: integrate the computed density above the
        // threshold in u-space, starting from asin√(Φ/Emax) instead of the
        // closed form's arccos, with an exact constant-value tail.
        let (e0, threshold) = (2.0, 1.0);
        let eps = 1e-6;
        for i in 0..=32 {
            let rel = Angle::new(i as f64 * FRAC_PI_2 / 32.0);
            let closed = ideal_click_probability(e0, threshold, rel, Arm::Transmitted);
            let emax = {
                let (c2, _) = crate::optics::malus_fractions(rel);
                e0 * c2
            };
            let quad = if emax <= threshold {
                0.0
            } else {
                let u_phi = (threshold / emax).sqrt().asin();
                let hi = FRAC_PI_2 - eps;
                let bulk = if u_phi < hi {
                    adaptive_simpson(
                        &|u: f64| {
                            let s = u.sin();
                            energy_density(emax * s * s, emax).unwrap() * emax * (2.0 * u).sin()
                        },
                        u_phi,
                        hi,
                        1e-10,
                    )
                    .unwrap()
                } else {
                    0.0
                };
                bulk + TWO_OVER_PI * (FRAC_PI_2 - u_phi.max(hi))
            };
            assert!(
                (closed - quad).abs() < 1e-7,
                "rel={}: closed {closed} vs quadrature {quad}",
                rel.radians()
            );
        }
    }

    #[test]
    fn linear_click_probability_fixed_points() {
        let p = linear_click_probability(2.0, 1.0, 2.0, Angle::ZERO, Arm::Transmitted).unwrap();
        assert!((p - ONE_OVER_PI).abs() < 1e-8, "got {p}");

        let z = linear_click_probability(2.0, 1.0, 2.0, Angle::new(FRAC_PI_4), Arm::Transmitted)
            .unwrap();
        assert_eq!(z, 0.0);

        // Saturation collapsing onto the threshold recovers the step response.
        let nearly_ideal =
            linear_click_probability(2.0, 1.0, 1.0 + 1e-9, Angle::ZERO, Arm::Transmitted).unwrap();
        let ideal = ideal_click_probability(2.0, 1.0, Angle::ZERO, Arm::Transmitted);
        assert!((nearly_ideal - ideal).abs() < 1e-4, "{nearly_ideal} vs {ideal}");
    }

    #[test]
    fn linear_rejects_bad_parameters() {
        assert!(linear_click_probability(2.0, 0.0, 2.0, Angle::ZERO, Arm::Transmitted).is_err());
        assert!(linear_click_probability(2.0, 1.0, 0.5, Angle::ZERO, Arm::Transmitted).is_err());
        assert!(linear_click_probability(0.0, 1.0, 2.0, Angle::ZERO, Arm::Transmitted).is_err());
    }

    #[test]
    fn attack_correlation_matches_quantum_pattern() {
        // The headline claim: ideal Alice + linear Bob at E0 = 2Φ shows the
        // full cos 2Δ correlation on detected coincidences.
        let alice = DetectorModel::IdealThreshold { threshold: 1.0 };
        let bob = DetectorModel::LinearThreshold { threshold: 1.0, saturation: 2.0 };

        let at_zero = predict_attack_correlation(&alice, &bob, 2.0, Angle::ZERO).unwrap();
        assert!((at_zero - 1.0).abs() < 1e-6, "got {at_zero}");

        let at_eighth =
            predict_attack_correlation(&alice, &bob, 2.0, Angle::new(FRAC_PI_8)).unwrap();
        assert!((at_eighth - SQRT_2_OVER_2).abs() < 1e-6, "got {at_eighth}");

        let at_quarter =
            predict_attack_correlation(&alice, &bob, 2.0, Angle::new(FRAC_PI_4)).unwrap();
        assert!(at_quarter.abs() < 1e-6, "got {at_quarter}");

        for i in 0..=16 {
            let delta = i as f64 * FRAC_PI_2 / 16.0;
            let e = predict_attack_correlation(&alice, &bob, 2.0, Angle::new(delta)).unwrap();
            let expected = (2.0 * delta).cos();
            assert!((e - expected).abs() < 1e-5, "Δ={delta}: {e} vs {expected}");
        }
    }

    #[test]
    fn symmetric_ideal_attack_gives_triangle_correlation() {
        // Two ideal stations at E0 = 2Φ produce the sign-overlap triangle
        // E(Δ) = 1 − 4Δ/π, the classic local-model correlation.
        let ideal = DetectorModel::IdealThreshold { threshold: 1.0 };
        for (delta, expected) in [(0.0, 1.0), (FRAC_PI_8, 0.5), (FRAC_PI_4, 0.0), (0.4, 1.0 - 1.6 / PI)]
        {
            let e = predict_attack_correlation(&ideal, &ideal, 2.0, Angle::new(delta)).unwrap();
            assert!((e - expected).abs() < 1e-6, "Δ={delta}: {e} vs {expected}");
        }
    }

    #[test]
    fn attack_correlation_error_paths() {
        let ideal = DetectorModel::IdealThreshold { threshold: 1.0 };
        let qe = DetectorModel::QuantumEfficiency { eta: 1.0 };
        assert!(matches!(
            predict_attack_correlation(&ideal, &qe, 2.0, Angle::ZERO),
            Err(Error::Config(_))
        ));
        // E0 below threshold: nothing ever clicks, no coincidences to correlate.
        assert!(matches!(
            predict_attack_correlation(&ideal, &ideal, 0.5, Angle::ZERO),
            Err(Error::DegenerateScenario(_))
        ));
    }

    #[test]
    fn critical_efficiency_value() {
        let v = critical_efficiency();
        assert!((v - 0.828_427_124_746_190_3).abs() < 1e-15, "got {v}");
        assert!(v > 0.82 && v < 0.83);
    }

    #[test]
    fn prediction_curves_validate_and_dispatch() {
        let ideal = DetectorModel::IdealThreshold { threshold: 1.0 };
        let grid: Vec<f64> = (0..9).map(|i| i as f64 * FRAC_PI_2 / 8.0).collect();
        let curve = singles_curve(&ideal, 2.0, &grid, Arm::Transmitted).unwrap();
        assert_eq!(curve.method, PredictionMethod::ClosedForm);
        assert_eq!(curve.values.len(), 9);
        assert!((curve.values[0] - 0.5).abs() < 1e-12);
        assert_eq!(curve.values[4], 0.0);

        let linear = DetectorModel::LinearThreshold { threshold: 1.0, saturation: 2.0 };
        let curve = singles_curve(&linear, 2.0, &grid, Arm::Transmitted).unwrap();
        assert_eq!(curve.method, PredictionMethod::Quadrature);
        assert!((curve.values[0] - ONE_OVER_PI).abs() < 1e-8);

        let qe = DetectorModel::QuantumEfficiency { eta: 0.5 };
        assert!(singles_curve(&qe, 2.0, &grid, Arm::Transmitted).is_err());

        let bad_grid = [0.0, 0.5, 0.5];
        assert!(singles_curve(&ideal, 2.0, &bad_grid, Arm::Transmitted).is_err());

        let bob = DetectorModel::LinearThreshold { threshold: 1.0, saturation: 2.0 };
        let corr = attack_correlation_curve(&ideal, &bob, 2.0, &grid).unwrap();
        assert_eq!(corr.method, PredictionMethod::Quadrature);
        assert!(corr.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
