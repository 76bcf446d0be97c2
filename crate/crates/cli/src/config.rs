//! TOML session files for the `run` subcommand.
//!
//! A file mirrors [`SessionConfig`] section by section, with one addition: a
//! mandatory top-level `angle_unit` key that fixes the unit for *every* angle
//! in the file. There is no default unit on purpose — a config that does not
//! say what its numbers mean is rejected before anything runs.
//!
//! ```toml
//! angle_unit = "degrees"
//! rounds = 100000
//! seed = 1
//! chsh_settings = [[0.0, 22.5], [0.0, 67.5], [45.0, 22.5], [45.0, 67.5]]
//! key_settings = [22.5, 45.0]
//!
//! [source]
//! kind = "classical"
//! energy_ratio = 2.0
//!
//! [alice]
//! settings = [0.0, 22.5, 45.0]
//! theta_ch1 = 0.0
//! theta_ch0 = 0.0
//!
//! [alice.detectors]
//! kind = "ideal"
//! threshold = 1.0
//!
//! [bob]
//! settings = [22.5, 45.0, 67.5]
//! theta_ch1 = 22.5
//! theta_ch0 = 22.5
//!
//! [bob.detectors]
//! kind = "linear"
//! threshold = 1.0
//! saturation = 2.0
//! ```
//!
//! Top-level keys (`chsh_settings`, `key_settings`, …) must appear before the
//! first `[section]` header, per TOML's usual scoping.

use std::path::Path;

use anyhow::{bail, Context, Result};
use e91sim_core::{
    Angle, DetectorModel, FairSamplingConfig, SessionConfig, SourceModel, StationConfig,
};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AngleUnit {
    Degrees,
    Radians,
}

impl AngleUnit {
    fn angle(self, value: f64) -> Angle {
        match self {
            AngleUnit::Degrees => Angle::new(value.to_radians()),
            AngleUnit::Radians => Angle::new(value),
        }
    }
}

/// Whole-file schema. Unknown keys anywhere are hard errors so a typo can't
/// silently fall back to a default.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionFile {
    angle_unit: AngleUnit,
    #[serde(default = "default_rounds")]
    rounds: u64,
    #[serde(default = "default_seed")]
    seed: u64,
    source: SourceSpec,
    alice: StationSpec,
    bob: StationSpec,
    /// Exactly four `[a, b]` setting pairs, in the order their correlations
    /// enter `S = E1 - E2 + E3 + E4`.
    chsh_settings: Vec<[f64; 2]>,
    /// Settings both parties share that produce key bits on a match.
    key_settings: Vec<f64>,
    #[serde(default)]
    fair_sampling: FairSamplingSpec,
}

fn default_rounds() -> u64 {
    100_000
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SourceKind {
    Quantum,
    Classical,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSpec {
    kind: SourceKind,
    /// Pulse energy as a multiple of the nominal click threshold (Φ = 1).
    /// Classical sources only.
    energy_ratio: Option<f64>,
}

impl SourceSpec {
    fn resolve(&self) -> Result<SourceModel> {
        match (self.kind, self.energy_ratio) {
            (SourceKind::Quantum, None) => Ok(SourceModel::EntangledPairs),
            (SourceKind::Quantum, Some(_)) => {
                bail!("energy_ratio only applies to a classical source")
            }
            (SourceKind::Classical, Some(ratio)) => {
                Ok(SourceModel::ClassicalPulsePairs { e0: ratio })
            }
            (SourceKind::Classical, None) => {
                bail!("a classical source needs energy_ratio (pulse energy over Φ = 1)")
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StationSpec {
    settings: Vec<f64>,
    theta_ch1: f64,
    theta_ch0: f64,
    detectors: DetectorsSpec,
}

/// Either one detector table applied to all four outputs, or an array of
/// exactly four tables in `[ch1+, ch1-, ch0+, ch0-]` order.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DetectorsSpec {
    Same(DetectorSpec),
    Each([DetectorSpec; 4]),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DetectorKind {
    Ideal,
    Linear,
    Efficiency,
}

/// One detector. `kind` picks the model and decides which parameters are
/// required: "ideal" takes `threshold`, "linear" takes `threshold` and
/// `saturation`, "efficiency" takes `eta`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorSpec {
    kind: DetectorKind,
    threshold: Option<f64>,
    saturation: Option<f64>,
    eta: Option<f64>,
}

impl DetectorSpec {
    fn resolve(&self) -> Result<DetectorModel> {
        let reject = |field: &str, value: Option<f64>| -> Result<()> {
            if value.is_some() {
                bail!("{field} does not apply to a {:?} detector", self.kind);
            }
            Ok(())
        };
        match self.kind {
            DetectorKind::Ideal => {
                reject("saturation", self.saturation)?;
                reject("eta", self.eta)?;
                let threshold = self.threshold.context("an ideal detector needs threshold")?;
                Ok(DetectorModel::IdealThreshold { threshold })
            }
            DetectorKind::Linear => {
                reject("eta", self.eta)?;
                let threshold = self.threshold.context("a linear detector needs threshold")?;
                let saturation =
                    self.saturation.context("a linear detector needs saturation")?;
                Ok(DetectorModel::LinearThreshold { threshold, saturation })
            }
            DetectorKind::Efficiency => {
                reject("threshold", self.threshold)?;
                reject("saturation", self.saturation)?;
                let eta = self.eta.context("an efficiency detector needs eta")?;
                Ok(DetectorModel::QuantumEfficiency { eta })
            }
        }
    }
}

impl StationSpec {
    fn resolve(&self, unit: AngleUnit, who: &str) -> Result<StationConfig> {
        let detectors = match &self.detectors {
            DetectorsSpec::Same(spec) => {
                let model = spec.resolve().with_context(|| format!("{who}.detectors"))?;
                [model; 4]
            }
            DetectorsSpec::Each(specs) => {
                let mut models = [DetectorModel::IdealThreshold { threshold: 1.0 }; 4];
                for (i, spec) in specs.iter().enumerate() {
                    models[i] = spec
                        .resolve()
                        .with_context(|| format!("{who}.detectors[{i}]"))?;
                }
                models
            }
        };
        Ok(StationConfig {
            settings: self.settings.iter().map(|&s| unit.angle(s)).collect(),
            theta_ch1: unit.angle(self.theta_ch1),
            theta_ch0: unit.angle(self.theta_ch0),
            detectors,
        })
    }
}

/// Mirrors [`FairSamplingConfig`]; every field falls back to the library
/// default so a file can override just one knob.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FairSamplingSpec {
    min_counts: u64,
    ratio_threshold: f64,
    z_threshold: f64,
    test_fraction: f64,
}

impl Default for FairSamplingSpec {
    fn default() -> Self {
        let d = FairSamplingConfig::default();
        FairSamplingSpec {
            min_counts: d.min_counts,
            ratio_threshold: d.ratio_threshold,
            z_threshold: d.z_threshold,
            test_fraction: d.test_fraction,
        }
    }
}

impl SessionFile {
    fn resolve(&self) -> Result<SessionConfig> {
        let unit = self.angle_unit;
        if self.chsh_settings.len() != 4 {
            bail!(
                "chsh_settings needs exactly four [a, b] pairs, got {}",
                self.chsh_settings.len()
            );
        }
        let mut chsh = [(Angle::ZERO, Angle::ZERO); 4];
        for (slot, pair) in chsh.iter_mut().zip(&self.chsh_settings) {
            *slot = (unit.angle(pair[0]), unit.angle(pair[1]));
        }
        Ok(SessionConfig {
            rounds: self.rounds,
            seed: self.seed,
            source: self.source.resolve().context("source")?,
            alice: self.alice.resolve(unit, "alice")?,
            bob: self.bob.resolve(unit, "bob")?,
            chsh_settings: chsh,
            key_settings: self.key_settings.iter().map(|&s| unit.angle(s)).collect(),
            fair_sampling: FairSamplingConfig {
                min_counts: self.fair_sampling.min_counts,
                ratio_threshold: self.fair_sampling.ratio_threshold,
                z_threshold: self.fair_sampling.z_threshold,
                test_fraction: self.fair_sampling.test_fraction,
            },
        })
    }
}

/// Reads and resolves one session file. Parse errors come back with the
/// offending line and column.
pub fn load_session_file(path: &Path) -> Result<SessionConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let file: SessionFile = toml::from_str(&text)
        .with_context(|| format!("invalid config {}", path.display()))?;
    file.resolve()
        .with_context(|| format!("invalid config {}", path.display()))
}
