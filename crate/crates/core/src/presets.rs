//! Ready-made scenarios behind a runtime registry.
//!
//! Each preset is a strategy object implementing [`ScenarioPreset`]; the CLI
//! looks presets up by name at run time, applies user overrides, and gets a
//! fully validated [`SessionConfig`]. All presets share the standard
//! geometry: Alice switches among {0, π/8, π/4} with test orientation 0, Bob
//! among {π/8, π/4, 3π/8} with test orientation π/8, keys come from the
//! shared settings {π/8, π/4}, and the Bell combination pairs (0, π/4) with
//! (π/8, 3π/8).

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

use crate::error::{Error, Result};
use crate::optics::{Angle, DetectorModel};
use crate::session::{FairSamplingConfig, SessionConfig};
use crate::source::SourceModel;
use crate::station::StationConfig;

/// User-tunable knobs applied on top of a preset's defaults. Every field is
/// optional; a preset rejects overrides that do not apply to it.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PresetOverrides {
    pub rounds: Option<u64>,
    pub seed: Option<u64>,
    /// Detector efficiency, genuine preset only.
    pub eta: Option<f64>,
    /// Pulse energy as a multiple of the click threshold, high-energy attack
    /// preset only.
    pub energy_ratio: Option<f64>,
}

/// A named scenario that can build a session configuration.
pub trait ScenarioPreset: Sync + Send {
    fn name(&self) -> &'static str;
    /// One-line description for `presets` listings.
    fn summary(&self) -> &'static str;
    fn build(&self, overrides: &PresetOverrides) -> Result<SessionConfig>;
}

const DEFAULT_ROUNDS: u64 = 100_000;
const DEFAULT_SEED: u64 = 1;

fn alice_station(detectors: [DetectorModel; 4]) -> StationConfig {
    StationConfig {
        settings: vec![Angle::ZERO, Angle::new(FRAC_PI_8), Angle::new(FRAC_PI_4)],
        theta_ch1: Angle::ZERO,
        theta_ch0: Angle::ZERO,
        detectors,
    }
}

fn bob_station(detectors: [DetectorModel; 4]) -> StationConfig {
    StationConfig {
        settings: vec![Angle::new(FRAC_PI_8), Angle::new(FRAC_PI_4), Angle::new(3.0 * FRAC_PI_8)],
        theta_ch1: Angle::new(FRAC_PI_8),
        theta_ch0: Angle::new(FRAC_PI_8),
        detectors,
    }
}

fn base_config(source: SourceModel, alice: StationConfig, bob: StationConfig) -> SessionConfig {
    SessionConfig {
        rounds: DEFAULT_ROUNDS,
        seed: DEFAULT_SEED,
        source,
        alice,
        bob,
        chsh_settings: [
            (Angle::ZERO, Angle::new(FRAC_PI_8)),
            (Angle::ZERO, Angle::new(3.0 * FRAC_PI_8)),
            (Angle::new(FRAC_PI_4), Angle::new(FRAC_PI_8)),
            (Angle::new(FRAC_PI_4), Angle::new(3.0 * FRAC_PI_8)),
        ],
        key_settings: vec![Angle::new(FRAC_PI_8), Angle::new(FRAC_PI_4)],
        fair_sampling: FairSamplingConfig::default(),
    }
}

fn apply_common(cfg: &mut SessionConfig, overrides: &PresetOverrides) {
    if let Some(rounds) = overrides.rounds {
        cfg.rounds = rounds;
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
}

fn reject_eta(name: &str, overrides: &PresetOverrides) -> Result<()> {
    if overrides.eta.is_some() {
        return Err(Error::Config(format!(
            "preset '{name}' has no detector efficiency to override; --eta applies to 'genuine'"
        )));
    }
    Ok(())
}

fn reject_energy_ratio(name: &str, overrides: &PresetOverrides) -> Result<()> {
    if overrides.energy_ratio.is_some() {
        return Err(Error::Config(format!(
            "preset '{name}' pins the pulse energy; --energy-ratio applies to 'attack-high-energy'"
        )));
    }
    Ok(())
}

/// Entangled-pair source with equal-efficiency detectors everywhere.
struct Genuine;

impl ScenarioPreset for Genuine {
    fn name(&self) -> &'static str {
        "genuine"
    }

    fn summary(&self) -> &'static str {
        "entangled-pair source, efficiency detectors (η configurable via --eta)"
    }

    fn build(&self, overrides: &PresetOverrides) -> Result<SessionConfig> {
        reject_energy_ratio(self.name(), overrides)?;
        let eta = overrides.eta.unwrap_or(1.0);
        let detectors = [DetectorModel::QuantumEfficiency { eta }; 4];
        let mut cfg = base_config(SourceModel::EntangledPairs, alice_station(detectors), bob_station(detectors));
        apply_common(&mut cfg, overrides);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The asymmetric attack: pulses at twice the threshold, ideal detectors at
/// Alice, linear detectors saturating at the pulse energy at Bob.
struct AttackIdealLinear;

impl ScenarioPreset for AttackIdealLinear {
    fn name(&self) -> &'static str {
        "attack-ideal-linear"
    }

    fn summary(&self) -> &'static str {
        "classical pulses at E0 = 2Φ; ideal thresholds at Alice, linear (E_sat = 2Φ) at Bob"
    }

    fn build(&self, overrides: &PresetOverrides) -> Result<SessionConfig> {
        reject_eta(self.name(), overrides)?;
        reject_energy_ratio(self.name(), overrides)?;
        let mut cfg = base_config(
            SourceModel::ClassicalPulsePairs { e0: 2.0 },
            alice_station([DetectorModel::IdealThreshold { threshold: 1.0 }; 4]),
            bob_station([DetectorModel::LinearThreshold { threshold: 1.0, saturation: 2.0 }; 4]),
        );
        apply_common(&mut cfg, overrides);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The symmetric attack: ideal thresholds on both sides at E0 = 2Φ.
struct AttackIdealIdeal;

impl ScenarioPreset for AttackIdealIdeal {
    fn name(&self) -> &'static str {
        "attack-ideal-ideal"
    }

    fn summary(&self) -> &'static str {
        "classical pulses at E0 = 2Φ; ideal threshold detectors on both sides"
    }

    fn build(&self, overrides: &PresetOverrides) -> Result<SessionConfig> {
        reject_eta(self.name(), overrides)?;
        reject_energy_ratio(self.name(), overrides)?;
        let mut cfg = base_config(
            SourceModel::ClassicalPulsePairs { e0: 2.0 },
            alice_station([DetectorModel::IdealThreshold { threshold: 1.0 }; 4]),
            bob_station([DetectorModel::IdealThreshold { threshold: 1.0 }; 4]),
        );
        apply_common(&mut cfg, overrides);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The over-driven attack: all-ideal detectors with E0 > 2Φ, where double
/// counts appear and the faked correlations start to decay.
struct AttackHighEnergy;

impl ScenarioPreset for AttackHighEnergy {
    fn name(&self) -> &'static str {
        "attack-high-energy"
    }

    fn summary(&self) -> &'static str {
        "classical pulses above 2Φ (set with --energy-ratio, default 4); ideal detectors"
    }

    fn build(&self, overrides: &PresetOverrides) -> Result<SessionConfig> {
        reject_eta(self.name(), overrides)?;
        let ratio = overrides.energy_ratio.unwrap_or(4.0);
        if !ratio.is_finite() || ratio <= 2.0 {
            return Err(Error::Config(format!(
                "attack-high-energy needs an energy ratio strictly above 2 (got {ratio}); \
                 at exactly 2 use attack-ideal-ideal"
            )));
        }
        let mut cfg = base_config(
            SourceModel::ClassicalPulsePairs { e0: ratio },
            alice_station([DetectorModel::IdealThreshold { threshold: 1.0 }; 4]),
            bob_station([DetectorModel::IdealThreshold { threshold: 1.0 }; 4]),
        );
        apply_common(&mut cfg, overrides);
        cfg.validate()?;
        Ok(cfg)
    }
}

static REGISTRY: [&dyn ScenarioPreset; 4] =
    [&Genuine, &AttackIdealLinear, &AttackIdealIdeal, &AttackHighEnergy];

/// All registered presets, in listing order.
pub fn registry() -> &'static [&'static dyn ScenarioPreset] {
    &REGISTRY
}

/// Looks a preset up by its exact name.
pub fn find(name: &str) -> Option<&'static dyn ScenarioPreset> {
    REGISTRY.iter().copied().find(|p| p.name() == name)
}
