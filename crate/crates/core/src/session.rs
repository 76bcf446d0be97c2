//! Session configuration: the source, both stations, the setting pairs used
//! for key and Bell statistics, and the fair-sampling monitor parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::Angle;
use crate::source::SourceModel;
use crate::station::StationConfig;
use crate::stats::SessionLayout;

/// Angle matching tolerance (radians) when resolving configured setting
/// values against a station's setting list.
pub(crate) const ANGLE_TOL: f64 = 1e-9;

/// Parameters of the local fair-sampling monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairSamplingConfig {
    /// Minimum fixed-mode rounds required per offset group before the test
    /// renders a verdict other than inconclusive.
    pub min_counts: u64,
    /// A singles-rate ratio below this counts as setting dependence.
    pub ratio_threshold: f64,
    /// The rate difference must also exceed this many standard errors.
    pub z_threshold: f64,
    /// Probability that a station's polarimeters hold the fixed test
    /// orientation in a given round instead of tracking the analyzer.
    pub test_fraction: f64,
}

impl Default for FairSamplingConfig {
    fn default() -> Self {
        FairSamplingConfig {
            min_counts: 1000,
            ratio_threshold: 0.9,
            z_threshold: 5.0,
            test_fraction: 0.25,
        }
    }
}

impl FairSamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_counts == 0 {
            return Err(Error::Config("fair-sampling min_counts must be at least 1".into()));
        }
        if !self.ratio_threshold.is_finite() || !(0.0..=1.0).contains(&self.ratio_threshold) {
            return Err(Error::Config(format!(
                "fair-sampling ratio threshold must lie in [0, 1], got {}",
                self.ratio_threshold
            )));
        }
        if !self.z_threshold.is_finite() || self.z_threshold < 0.0 {
            return Err(Error::Config(format!(
                "fair-sampling z threshold must be finite and non-negative, got {}",
                self.z_threshold
            )));
        }
        if !self.test_fraction.is_finite() || !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!(
                "fair-sampling test fraction must lie in [0, 1], got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Complete description of one simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Number of emission rounds. Zero is legal and produces empty tallies.
    pub rounds: u64,
    /// Master seed; every derived stream is a pure function of this value.
    pub seed: u64,
    pub source: SourceModel,
    pub alice: StationConfig,
    pub bob: StationConfig,
    /// The four (Alice, Bob) setting pairs entering `S = E₁ − E₂ + E₃ + E₄`,
    /// in that order. Each angle must match a configured station setting.
    pub chsh_settings: [(Angle, Angle); 4],
    /// Settings shared by both parties that produce key bits when both
    /// happen to select them.
    pub key_settings: Vec<Angle>,
    pub fair_sampling: FairSamplingConfig,
}

fn find_setting(settings: &[Angle], target: Angle) -> Option<usize> {
    settings.iter().position(|s| s.approx_eq(target, ANGLE_TOL))
}

impl SessionConfig {
    /// Checks the whole configuration and resolves angles to setting
    /// indices, returning the layout the engine and estimators run against.
    pub fn validate(&self) -> Result<SessionLayout> {
        self.source.validate()?;
        self.alice.validate()?;
        self.bob.validate()?;
        self.fair_sampling.validate()?;

        let is_quantum = self.source.is_quantum();
        if is_quantum && !(self.alice.all_quantum_efficiency() && self.bob.all_quantum_efficiency())
        {
            return Err(Error::Config(
                "an entangled-pair source requires efficiency detector models at every output; \
                 threshold models only make sense for classical pulses"
                    .into(),
            ));
        }

        let mut chsh_pairs = [(0usize, 0usize); 4];
        for (k, &(a, b)) in self.chsh_settings.iter().enumerate() {
            let ai = find_setting(&self.alice.settings, a).ok_or_else(|| {
                Error::Config(format!(
                    "Bell pair #{k}: Alice has no setting at {:.6} rad",
                    a.radians()
                ))
            })?;
            let bi = find_setting(&self.bob.settings, b).ok_or_else(|| {
                Error::Config(format!(
                    "Bell pair #{k}: Bob has no setting at {:.6} rad",
                    b.radians()
                ))
            })?;
            chsh_pairs[k] = (ai, bi);
        }

        for (i, a) in self.key_settings.iter().enumerate() {
            for (j, b) in self.key_settings.iter().enumerate().skip(i + 1) {
                if a.approx_eq(*b, ANGLE_TOL) {
                    return Err(Error::Config(format!(
                        "key settings #{i} and #{j} coincide"
                    )));
                }
            }
        }
        let mut key_pairs = Vec::with_capacity(self.key_settings.len());
        for (k, &s) in self.key_settings.iter().enumerate() {
            let ai = find_setting(&self.alice.settings, s).ok_or_else(|| {
                Error::Config(format!(
                    "key setting #{k} ({:.6} rad) is not among Alice's settings",
                    s.radians()
                ))
            })?;
            let bi = find_setting(&self.bob.settings, s).ok_or_else(|| {
                Error::Config(format!(
                    "key setting #{k} ({:.6} rad) is not among Bob's settings",
                    s.radians()
                ))
            })?;
            key_pairs.push((ai, bi));
        }

        let min_eta = if self.alice.all_quantum_efficiency() && self.bob.all_quantum_efficiency() {
            self.alice
                .detectors
                .iter()
                .chain(self.bob.detectors.iter())
                .map(|d| match d {
                    crate::optics::DetectorModel::QuantumEfficiency { eta } => *eta,
                    _ => unreachable!("guarded by all_quantum_efficiency"),
                })
                .fold(f64::INFINITY, f64::min)
                .into()
        } else {
            None
        };

        Ok(SessionLayout::assemble(
            self.alice.settings.clone(),
            self.bob.settings.clone(),
            (self.alice.theta_ch1, self.alice.theta_ch0),
            (self.bob.theta_ch1, self.bob.theta_ch0),
            chsh_pairs,
            key_pairs,
            is_quantum,
            min_eta,
        ))
    }
}
