//! Emission models: genuine entangled pairs or Eve's classical pulse pairs.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::Angle;

/// What the source sends down the two wings each round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SourceModel {
    /// A maximally entangled photon pair per round.
    #[serde(rename = "quantum")]
    EntangledPairs,
    /// Eve's substitute: two classical pulses of energy `e0` sharing one
    /// uniformly random polarization λ.
    #[serde(rename = "classical")]
    ClassicalPulsePairs { e0: f64 },
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        if let SourceModel::ClassicalPulsePairs { e0 } = *self {
            if !e0.is_finite() || e0 <= 0.0 {
                return Err(Error::Config(format!(
                    "classical pulse energy must be positive and finite, got {e0}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, SourceModel::EntangledPairs)
    }
}

/// One round's emission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emission {
    Quantum,
    Classical { lambda: Angle },
}

/// Draws one emission from the source.
///
/// Classical pairs receive λ uniform on `[−π/2, π/2)` — one `f64` draw;
/// the quantum source consumes no randomness here (the joint outcome is
/// sampled at measurement time).
pub fn emit<R: Rng + ?Sized>(source: &SourceModel, rng: &mut R) -> Emission {
    match source {
        SourceModel::EntangledPairs => Emission::Quantum,
        SourceModel::ClassicalPulsePairs { .. } => {
            let u: f64 = rng.random();
            Emission::Classical { lambda: Angle::new((u - 0.5) * PI) }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn quantum_source_is_quantum_always() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            assert_eq!(emit(&SourceModel::EntangledPairs, &mut rng), Emission::Quantum);
        }
    }

    #[test]
    fn lambda_is_uniform_over_the_half_open_interval() {
        const DRAWS: usize = 1_000_000;
        const BINS: usize = 36;
        let source = SourceModel::ClassicalPulsePairs { e0: 2.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_817);
        let mut counts = [0u64; BINS];
        for _ in 0..DRAWS {
            let Emission::Classical { lambda } = emit(&source, &mut rng) else {
                panic!("classical source emitted a quantum round");
            };
            let l = lambda.radians();
            assert!((-FRAC_PI_2..FRAC_PI_2).contains(&l));
            let bin = (((l + FRAC_PI_2) / std::f64::consts::PI) * BINS as f64) as usize;
            counts[bin.min(BINS - 1)] += 1;
        }
        let expected = DRAWS as f64 / BINS as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        let dist = ChiSquared::new((BINS - 1) as f64).unwrap();
        let p = 1.0 - dist.cdf(chi2);
        assert!(p > 0.001, "uniformity rejected: chi2 = {chi2:.1}, p = {p:.5}");
    }

    #[test]
    fn emission_sequence_is_deterministic() {
        let source = SourceModel::ClassicalPulsePairs { e0: 2.0 };
        let draw = |seed: u64| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|_| match emit(&source, &mut rng) {
                    Emission::Classical { lambda } => lambda.radians(),
                    Emission::Quantum => unreachable!(),
                })
                .collect()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn source_validation() {
        assert!(SourceModel::EntangledPairs.validate().is_ok());
        assert!(SourceModel::ClassicalPulsePairs { e0: 2.0 }.validate().is_ok());
        assert!(SourceModel::ClassicalPulsePairs { e0: 0.0 }.validate().is_err());
        assert!(SourceModel::ClassicalPulsePairs { e0: -1.0 }.validate().is_err());
        assert!(SourceModel::ClassicalPulsePairs { e0: f64::INFINITY }.validate().is_err());
    }

    #[test]
    fn source_serde_names() {
        assert_eq!(
            serde_json::to_string(&SourceModel::EntangledPairs).unwrap(),
            r#"{"kind":"quantum"}"#
        );
        let s: SourceModel = serde_json::from_str(r#"{"kind":"classical","e0":2.0}"#).unwrap();
        assert_eq!(s, SourceModel::ClassicalPulsePairs { e0: 2.0 });
    }
}
