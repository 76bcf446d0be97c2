//! One party's measurement station: an analyzer beamsplitter at the active
//! setting, one polarimeter (a second beamsplitter plus two detectors) per
//! output channel — four detectors in all.
//!
//! Detector order everywhere is `[ch1+, ch1−, ch0+, ch0−]`: channel 1 is the
//! analyzer's transmitted output (bit 1), channel 0 the reflected one
//! (bit 0), and ± are the polarimeter outputs inside each channel.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{malus_fractions, split_pulse, Angle, DetectorModel, Pulse};

/// Human-readable labels for the four detector slots.
pub const DETECTOR_LABELS: [&str; 4] = ["ch1+", "ch1-", "ch0+", "ch0-"];

/// Which party a station belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationRole {
    Alice,
    Bob,
}

impl StationRole {
    pub fn label(&self) -> &'static str {
        match self {
            StationRole::Alice => "alice",
            StationRole::Bob => "bob",
        }
    }
}

/// Static description of one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    /// Analyzer orientations the party switches among, uniformly at random.
    pub settings: Vec<Angle>,
    /// Polarimeter axis in channel 1 (the test orientation).
    pub theta_ch1: Angle,
    /// Polarimeter axis in channel 0.
    pub theta_ch0: Angle,
    /// Detectors at `[ch1+, ch1−, ch0+, ch0−]`.
    pub detectors: [DetectorModel; 4],
}

impl StationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.settings.is_empty() {
            return Err(Error::Config("station needs at least one analyzer setting".into()));
        }
        for (i, a) in self.settings.iter().enumerate() {
            if !a.radians().is_finite() {
                return Err(Error::Config(format!("setting #{i} is not finite")));
            }
            for (j, b) in self.settings.iter().enumerate().skip(i + 1) {
                if a.approx_eq(*b, 1e-9) {
                    return Err(Error::Config(format!(
                        "settings #{i} and #{j} coincide; setting lists must be distinct"
                    )));
                }
            }
        }
        for d in &self.detectors {
            d.validate()?;
        }
        Ok(())
    }

    /// True when all four detectors are photon-counting (efficiency) models.
    pub fn all_quantum_efficiency(&self) -> bool {
        self.detectors.iter().all(DetectorModel::is_quantum_efficiency)
    }
}

/// Click pattern of one station in one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationOutcome {
    /// Clicks at `[ch1+, ch1−, ch0+, ch0−]`. Multiple simultaneous clicks
    /// are physical (classical pulses can fire several detectors) and are
    /// exactly what the double-count monitor watches for.
    pub clicks: [bool; 4],
    /// The analyzer setting active during the round.
    pub setting_used: Angle,
}

impl StationOutcome {
    pub fn any_click(&self) -> bool {
        self.clicks.iter().any(|&c| c)
    }

    /// Did channel 1 (either polarimeter output) click?
    pub fn channel1(&self) -> bool {
        self.clicks[0] || self.clicks[1]
    }

    /// Did channel 0 click?
    pub fn channel0(&self) -> bool {
        self.clicks[2] || self.clicks[3]
    }

    /// Both outputs of one polarimeter fired: `[ch1 double, ch0 double]`.
    pub fn polarimeter_doubles(&self) -> [bool; 2] {
        [self.clicks[0] && self.clicks[1], self.clicks[2] && self.clicks[3]]
    }

    /// Both channels fired in the same round.
    pub fn channel_double(&self) -> bool {
        self.channel1() && self.channel0()
    }

    /// The round's key bit: `1` for a clean channel-1 click, `0` for a clean
    /// channel-0 click, `None` when silent or ambiguous (both channels).
    pub fn bit(&self) -> Option<u8> {
        match (self.channel1(), self.channel0()) {
            (true, false) => Some(1),
            (false, true) => Some(0),
            _ => None,
        }
    }
}

/// Energies incident on the four detectors for a classical pulse.
///
/// The pulse splits at the analyzer `setting` into the two channels, and each
/// channel pulse splits again at its polarimeter axis (`axes` = channel 1's,
/// channel 0's). Total energy is conserved across the four outputs.
pub fn channel_energies(setting: Angle, axes: (Angle, Angle), pulse: &Pulse) -> [f64; 4] {
    let (ch1, ch0) = split_pulse(pulse, setting);
    let (e1p, e1m) = split_pulse(&ch1, axes.0);
    let (e0p, e0m) = split_pulse(&ch0, axes.1);
    [e1p.energy, e1m.energy, e0p.energy, e0m.energy]
}

/// Measures a classical pulse with explicit polarimeter axes.
///
/// Consumes exactly four uniform draws, one per detector in slot order.
pub fn measure_classical_with_axes<R: Rng + ?Sized>(
    station: &StationConfig,
    setting: Angle,
    axes: (Angle, Angle),
    pulse: &Pulse,
    rng: &mut R,
) -> StationOutcome {
    let energies = channel_energies(setting, axes, pulse);
    let mut clicks = [false; 4];
    for (slot, &energy) in energies.iter().enumerate() {
        let r: f64 = rng.random();
        clicks[slot] = station.detectors[slot].sample_click(energy, r);
    }
    StationOutcome { clicks, setting_used: setting }
}

/// Measures a classical pulse with the station's configured (test) axes.
pub fn measure_classical<R: Rng + ?Sized>(
    station: &StationConfig,
    setting: Angle,
    pulse: &Pulse,
    rng: &mut R,
) -> StationOutcome {
    measure_classical_with_axes(station, setting, (station.theta_ch1, station.theta_ch0), pulse, rng)
}

/// Samples the joint channel outcome of a maximally entangled pair.
///
/// For settings `a`, `b` the correlated state gives
/// `P(1,1) = P(0,0) = cos²(a−b)/2` and `P(1,0) = P(0,1) = sin²(a−b)/2`;
/// `u` is one uniform draw, consumed in the cell order (1,1), (0,0), (1,0),
/// (0,1). Returns (alice channel-1?, bob channel-1?).
pub fn sample_joint_channels(a: Angle, b: Angle, u: f64) -> (bool, bool) {
    let (c2, s2) = malus_fractions(a - b);
    let same = 0.5 * c2;
    let diff = 0.5 * s2;
    if u < same {
        (true, true)
    } else if u < 2.0 * same {
        (false, false)
    } else if u < 2.0 * same + diff {
        (true, false)
    } else {
        (false, true)
    }
}

/// Measures one entangled pair at both stations, with explicit polarimeter
/// axes per station (channel 1's, channel 0's).
///
/// The channel outcome is drawn from the exact joint distribution; each
/// photon then routes through its channel's polarimeter by Malus law on its
/// actual polarization (along the setting for channel 1, orthogonal for
/// channel 0) and is detected with that arm's efficiency. At most one
/// detector per station can click. Consumes five uniform draws in the order:
/// joint outcome, Alice routing, Alice detection, Bob routing, Bob detection.
pub fn measure_quantum_pair<R: Rng + ?Sized>(
    alice: &StationConfig,
    a: Angle,
    alice_axes: (Angle, Angle),
    bob: &StationConfig,
    b: Angle,
    bob_axes: (Angle, Angle),
    rng: &mut R,
) -> Result<(StationOutcome, StationOutcome)> {
    if !alice.all_quantum_efficiency() || !bob.all_quantum_efficiency() {
        return Err(Error::Config(
            "genuine-photon measurement requires efficiency detector models at all outputs".into(),
        ));
    }
    let u: f64 = rng.random();
    let (alice_ch1, bob_ch1) = sample_joint_channels(a, b, u);
    let alice_outcome = route_and_detect(alice, a, alice_axes, alice_ch1, rng);
    let bob_outcome = route_and_detect(bob, b, bob_axes, bob_ch1, rng);
    Ok((alice_outcome, bob_outcome))
}

fn route_and_detect<R: Rng + ?Sized>(
    station: &StationConfig,
    setting: Angle,
    axes: (Angle, Angle),
    ch1: bool,
    rng: &mut R,
) -> StationOutcome {
    let (polarization, axis) = if ch1 {
        (setting, axes.0)
    } else {
        (setting.orthogonal(), axes.1)
    };
    let (p_plus, _) = malus_fractions(axis - polarization);
    let routing: f64 = rng.random();
    let plus = routing < p_plus;
    let slot = match (ch1, plus) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    };
    let detection: f64 = rng.random();
    let mut clicks = [false; 4];
    // One photon at one detector; "present" is encoded as unit energy.
    clicks[slot] = station.detectors[slot].sample_click(1.0, detection);
    StationOutcome { clicks, setting_used: setting }
}
