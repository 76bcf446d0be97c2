//! Polarization angles, classical pulses, Malus-law beamsplitting and the
//! detector response models.
//!
//! Everything downstream — station pipelines, closed forms, the Monte-Carlo
//! engine — funnels through the two primitives defined here: [`split_pulse`]
//! for one polarizing beamsplitter and [`DetectorModel::click_probability`]
//! for the detector behind it.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Sub;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A polarization angle, reduced modulo π.
///
/// Polarization is axis-like: θ and θ + π describe the same physical axis, so
/// the canonical representative lives in `[−π/2, π/2)`. Differences of two
/// `Angle`s are therefore well defined modulo π, which is all any Malus-law
/// expression ever needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Builds an angle from radians, reducing to the canonical interval.
    pub fn new(radians: f64) -> Self {
        Angle(canonical(radians))
    }

    /// Canonical value in `[−π/2, π/2)`.
    pub fn radians(self) -> f64 {
        self.0
    }

    /// The orthogonal axis (self + π/2, canonicalized).
    pub fn orthogonal(self) -> Angle {
        Angle::new(self.0 + FRAC_PI_2)
    }

    /// Absolute axis-to-axis separation in `[0, π/2]`.
    pub fn offset_magnitude(self, other: Angle) -> f64 {
        (self - other).radians().abs()
    }

    /// True when the two axes coincide within `tol` radians.
    pub fn approx_eq(self, other: Angle, tol: f64) -> bool {
        self.offset_magnitude(other) < tol
    }
}

impl Sub for Angle {
    type Output = Angle;

    fn sub(self, rhs: Angle) -> Angle {
        Angle::new(self.0 - rhs.0)
    }
}

impl From<f64> for Angle {
    fn from(radians: f64) -> Self {
        Angle::new(radians)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

fn canonical(radians: f64) -> f64 {
    // Already-canonical values pass through bit-identically: the wrapping
    // arithmetic below costs a couple of ulp, and the threshold boundaries
    // downstream (exact 0.5 fractions at π/4 offsets) only survive if a
    // difference like Angle(π/4) − Angle(0) stays exactly fl(π/4).
    if (-FRAC_PI_2..FRAC_PI_2).contains(&radians) {
        return radians;
    }
    let c = (radians + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    // rem_euclid can round up to exactly π for tiny negative inputs, which
    // would leave c == π/2; fold that back onto the canonical interval.
    if c >= FRAC_PI_2 {
        c - PI
    } else {
        c
    }
}

/// A classical light pulse: nonnegative energy plus a polarization axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub energy: f64,
    pub polarization: Angle,
}

impl Pulse {
    pub fn new(energy: f64, polarization: Angle) -> Self {
        debug_assert!(energy >= 0.0, "pulse energy must be nonnegative");
        Pulse { energy, polarization }
    }
}

/// Malus-law intensity fractions (cos²Δ, sin²Δ) for a relative angle.
///
/// Computed through the half-angle identity cos²Δ = (1 + cos 2Δ)/2 rather
/// than by squaring sin/cos. Near the protocol's critical geometries the
/// doubled argument lands on values the libm cosine resolves cleanly
/// (cos 2Δ ≈ 0 at Δ = π/4, ±√2/2 at the π/8 grid): an aligned axis
/// transmits exactly everything, an offset of exactly π/4 puts the cos²
/// share at exactly one half (the sin² share at worst one ulp under), and
/// the smaller share never rounds above one half — so a strict threshold
/// sitting on the boundary stays on the silent side.
pub(crate) fn malus_fractions(delta: Angle) -> (f64, f64) {
    let c = (2.0 * delta.radians()).cos();
    (0.5 * (1.0 + c), 0.5 * (1.0 - c))
}

/// Splits a pulse on a polarizing beamsplitter oriented along `axis`.
///
/// The transmitted pulse carries `energy·cos²(axis − polarization)` and is
/// polarized along `axis`; the reflected pulse carries the complementary
/// `sin²` share and is polarized along the orthogonal axis. Total energy is
/// conserved to within a few ulp.
pub fn split_pulse(p: &Pulse, axis: Angle) -> (Pulse, Pulse) {
    let (t, r) = malus_fractions(axis - p.polarization);
    (
        Pulse { energy: p.energy * t, polarization: axis },
        Pulse { energy: p.energy * r, polarization: axis.orthogonal() },
    )
}

/// Energy reaching a detector behind two cascaded beamsplitters.
///
/// A pulse of energy `e0` polarized along `lambda` passes an analyzer at
/// `phi` and then a polarimeter axis at `theta`; the transmitted-transmitted
/// arm receives `e0·cos²(phi − theta)·cos²(phi − lambda)`, identical to two
/// chained [`split_pulse`] calls.
pub fn cascaded_energy(e0: f64, lambda: Angle, phi: Angle, theta: Angle) -> f64 {
    let (ct, _) = malus_fractions(phi - theta);
    let (cl, _) = malus_fractions(phi - lambda);
    e0 * ct * cl
}

/// Detector response: how incident energy turns into a click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DetectorModel {
    /// Clicks with certainty when the energy strictly exceeds `threshold`.
    #[serde(rename = "ideal")]
    IdealThreshold { threshold: f64 },
    /// Click probability ramps linearly from `threshold` up to `saturation`.
    #[serde(rename = "linear")]
    LinearThreshold { threshold: f64, saturation: f64 },
    /// Clicks with probability `eta` whenever any light (a photon) arrives.
    #[serde(rename = "efficiency")]
    QuantumEfficiency { eta: f64 },
}

impl DetectorModel {
    /// Probability of a click for incident energy `energy`.
    ///
    /// Zero energy never clicks, for any model: the efficiency model reads
    /// `energy > 0` as "a photon is present".
    pub fn click_probability(&self, energy: f64) -> f64 {
        match *self {
            DetectorModel::IdealThreshold { threshold } => {
                if energy > threshold {
                    1.0
                } else {
                    0.0
                }
            }
            DetectorModel::LinearThreshold { threshold, saturation } => {
                ((energy - threshold) / (saturation - threshold)).clamp(0.0, 1.0)
            }
            DetectorModel::QuantumEfficiency { eta } => {
                if energy > 0.0 {
                    eta
                } else {
                    0.0
                }
            }
        }
    }

    /// Bernoulli draw over [`click_probability`](Self::click_probability):
    /// clicks iff `r < p`, for `r` uniform in `[0, 1)`.
    pub fn sample_click(&self, energy: f64, r: f64) -> bool {
        r < self.click_probability(energy)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DetectorModel::IdealThreshold { threshold } => {
                if !threshold.is_finite() || threshold <= 0.0 {
                    return Err(Error::Config(format!(
                        "ideal detector threshold must be positive and finite, got {threshold}"
                    )));
                }
            }
            DetectorModel::LinearThreshold { threshold, saturation } => {
                if !threshold.is_finite() || threshold <= 0.0 {
                    return Err(Error::Config(format!(
                        "linear detector threshold must be positive and finite, got {threshold}"
                    )));
                }
                if !saturation.is_finite() || saturation <= threshold {
                    return Err(Error::Config(format!(
                        "linear detector saturation must exceed its threshold \
                         (threshold {threshold}, saturation {saturation})"
                    )));
                }
            }
            DetectorModel::QuantumEfficiency { eta } => {
                if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
                    return Err(Error::Config(format!(
                        "detector efficiency must lie in [0, 1], got {eta}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True for the photon-counting (efficiency) model.
    pub fn is_quantum_efficiency(&self) -> bool {
        matches!(self, DetectorModel::QuantumEfficiency { .. })
    }
}
