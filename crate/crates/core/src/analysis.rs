//! Estimators over session tallies: CHSH correlation, QBER, double-count
//! rates, the local fair-sampling test, and the detection-loophole summary.
//!
//! All of them are pure functions of the integer tallies plus the resolved
//! layout, so they can be re-run offline on stored results and cross-checked
//! against brute-force recomputations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::Angle;
use crate::session::{FairSamplingConfig, ANGLE_TOL};
use crate::station::{StationConfig, StationRole};
use crate::stats::{SessionLayout, StationTallies, Tallies};
use std::f64::consts::FRAC_PI_4;

/// Correlation at one Bell-test setting pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub a_setting: f64,
    pub b_setting: f64,
    /// Detected coincidences at this pair (the correlation denominator).
    pub coincidences: u64,
    pub correlation: f64,
    pub stderr: f64,
}

/// The CHSH estimate `S = E₁ − E₂ + E₃ + E₄` over the configured pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub pairs: [PairCorrelation; 4],
    pub s: f64,
    pub stderr: f64,
}

/// Signs applied to the four pair correlations, in configured order.
const CHSH_SIGNS: [f64; 4] = [1.0, -1.0, 1.0, 1.0];

/// Estimates the CHSH quantity from post-selected coincidences.
///
/// Each pair correlation is `(N₊₊ + N₋₋ − N₊₋ − N₋₊) / N`, where `N` counts
/// every detected coincidence at that pair — rounds where a station fired
/// both channels stay in the denominator but fill no cell, so ambiguous
/// events dilute the visibility instead of being silently dropped. The
/// standard error treats the signed cell sum as a bounded per-round score:
/// `var(E) = (p_clean − E²)/N`, with `p_clean` the clean-bit fraction.
pub fn estimate_chsh(tallies: &Tallies, layout: &SessionLayout) -> Result<ChshEstimate> {
    let mut pairs = [PairCorrelation {
        a_setting: 0.0,
        b_setting: 0.0,
        coincidences: 0,
        correlation: 0.0,
        stderr: 0.0,
    }; 4];
    let mut s = 0.0;
    let mut var_sum = 0.0;
    for (k, &(ai, bi)) in layout.chsh_pairs.iter().enumerate() {
        let pair = layout.pair_index(ai, bi);
        let n = tallies.coincidences[pair];
        if n == 0 {
            return Err(Error::InsufficientData(format!(
                "Bell pair #{k} has no detected coincidences"
            )));
        }
        let cells = tallies.bits[pair];
        let agree = cells[0] + cells[3];
        let disagree = cells[1] + cells[2];
        let e = (agree as f64 - disagree as f64) / n as f64;
        let p_clean = (agree + disagree) as f64 / n as f64;
        let var = ((p_clean - e * e) / n as f64).max(0.0);
        pairs[k] = PairCorrelation {
            a_setting: layout.alice_settings[ai].radians(),
            b_setting: layout.bob_settings[bi].radians(),
            coincidences: n,
            correlation: e,
            stderr: var.sqrt(),
        };
        s += CHSH_SIGNS[k] * e;
        var_sum += var;
    }
    Ok(ChshEstimate { pairs, s, stderr: var_sum.sqrt() })
}

/// Sifted-key error statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    pub agreements: u64,
    pub disagreements: u64,
    pub qber: f64,
}

/// Quantum bit error rate over the sifted key.
///
/// A round enters the sifted key when both parties chose the same key
/// setting and both produced a clean bit; the QBER is the disagreeing
/// fraction of those rounds.
pub fn compute_qber(tallies: &Tallies, layout: &SessionLayout) -> Result<QberEstimate> {
    let mut agreements = 0u64;
    let mut disagreements = 0u64;
    for &(ai, bi) in &layout.key_pairs {
        let cells = tallies.bits[layout.pair_index(ai, bi)];
        agreements += cells[0] + cells[3];
        disagreements += cells[1] + cells[2];
    }
    let total = agreements + disagreements;
    if total == 0 {
        return Err(Error::InsufficientData("sifted key is empty".into()));
    }
    Ok(QberEstimate {
        agreements,
        disagreements,
        qber: disagreements as f64 / total as f64,
    })
}

/// Outcome of the fair-sampling test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Detailed result of the local fair-sampling test at one station.
///
/// Counts come from fixed-mode rounds only: the rounds in which the
/// polarimeters held the test orientation θ*. `rel0` pools the settings
/// aligned with θ*, `rel45` the settings at π/4 from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairSamplingVerdict {
    /// Rounds with any click while a rel-0 setting was active.
    pub singles_at_rel0: u64,
    /// Rounds with any click while a rel-π/4 setting was active.
    pub singles_at_rel45: u64,
    pub rounds_at_rel0: u64,
    pub rounds_at_rel45: u64,
    /// min/max of the two singles rates; 1 when both rates vanish.
    pub ratio: f64,
    /// Two-proportion z statistic for the rate difference.
    pub z_score: f64,
    pub verdict: Verdict,
}

/// Runs the local fair-sampling test for one station.
///
/// Singles are pooled per relative offset between the active analyzer
/// setting and the polarimeter test orientation θ*, then compared between
/// the offset-0 and offset-π/4 groups. A genuinely fair detection chain
/// shows the same rate in both; a setting-dependent one does not.
///
/// Fails with a configuration error when the station's polarimeter axes
/// disagree (the monitor needs a single θ*) or when its settings list lacks
/// one of the two required offsets.
pub fn fair_sampling_test(
    tallies: &Tallies,
    layout: &SessionLayout,
    role: StationRole,
    cfg: &FairSamplingConfig,
) -> Result<FairSamplingVerdict> {
    let (station, settings, axes): (&StationTallies, &[Angle], (Angle, Angle)) = match role {
        StationRole::Alice => (&tallies.alice, &layout.alice_settings, layout.alice_axes),
        StationRole::Bob => (&tallies.bob, &layout.bob_settings, layout.bob_axes),
    };
    if !axes.0.approx_eq(axes.1, ANGLE_TOL) {
        return Err(Error::Config(format!(
            "{} polarimeter axes differ ({:.6} vs {:.6} rad); the fair-sampling \
             monitor requires a single test orientation",
            role.label(),
            axes.0.radians(),
            axes.1.radians()
        )));
    }
    let theta = axes.0;

    let mut singles = [0u64; 2];
    let mut rounds = [0u64; 2];
    let mut present = [false; 2];
    for (i, setting) in settings.iter().enumerate() {
        let offset = setting.offset_magnitude(theta);
        let group = if offset < ANGLE_TOL {
            0
        } else if (offset - FRAC_PI_4).abs() < ANGLE_TOL {
            1
        } else {
            continue;
        };
        present[group] = true;
        let fixed = crate::stats::PolarimeterMode::Fixed.idx();
        rounds[group] += station.setting_rounds[i][fixed];
        singles[group] += station.any_click[i][fixed];
    }
    if !present[0] || !present[1] {
        return Err(Error::Config(format!(
            "{} settings must include orientations at offsets 0 and π/4 from the \
             polarimeter test orientation {:.6} rad",
            role.label(),
            theta.radians()
        )));
    }

    let rate = |s: u64, n: u64| if n == 0 { 0.0 } else { s as f64 / n as f64 };
    let r0 = rate(singles[0], rounds[0]);
    let r45 = rate(singles[1], rounds[1]);
    let hi = r0.max(r45);
    let ratio = if hi == 0.0 { 1.0 } else { r0.min(r45) / hi };

    let diff = r0 - r45;
    let z_score = if diff == 0.0 {
        0.0
    } else {
        let pooled = (singles[0] + singles[1]) as f64 / (rounds[0] + rounds[1]) as f64;
        let denom =
            (pooled * (1.0 - pooled) * (1.0 / rounds[0] as f64 + 1.0 / rounds[1] as f64)).sqrt();
        if denom == 0.0 {
            f64::INFINITY
        } else {
            diff.abs() / denom
        }
    };

    let verdict = if rounds[0] < cfg.min_counts || rounds[1] < cfg.min_counts {
        Verdict::Inconclusive
    } else if ratio < cfg.ratio_threshold && z_score > cfg.z_threshold {
        Verdict::Fail
    } else {
        Verdict::Pass
    };

    Ok(FairSamplingVerdict {
        singles_at_rel0: singles[0],
        singles_at_rel45: singles[1],
        rounds_at_rel0: rounds[0],
        rounds_at_rel45: rounds[1],
        ratio,
        z_score,
        verdict,
    })
}

/// Double-click statistics for one station, as counts and per-round rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationDoubles {
    /// Rounds where both outputs of the channel-1 polarimeter fired.
    pub polarimeter_ch1_rounds: u64,
    /// Rounds where both outputs of the channel-0 polarimeter fired.
    pub polarimeter_ch0_rounds: u64,
    /// Rounds where both analyzer channels fired.
    pub both_channels_rounds: u64,
    pub polarimeter_ch1: f64,
    pub polarimeter_ch0: f64,
    pub both_channels: f64,
}

/// Double-click rates for the whole session, denominated in total rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleCountReport {
    pub rounds: u64,
    pub alice: StationDoubles,
    pub bob: StationDoubles,
}

fn station_doubles(station: &StationTallies, rounds: u64) -> StationDoubles {
    let mut ch1 = 0u64;
    let mut ch0 = 0u64;
    for per_setting in &station.polarimeter_doubles {
        for mode in per_setting {
            ch1 += mode[0];
            ch0 += mode[1];
        }
    }
    let both: u64 = station.channel_doubles.iter().map(|m| m[0] + m[1]).sum();
    let rate = |c: u64| if rounds == 0 { 0.0 } else { c as f64 / rounds as f64 };
    StationDoubles {
        polarimeter_ch1_rounds: ch1,
        polarimeter_ch0_rounds: ch0,
        both_channels_rounds: both,
        polarimeter_ch1: rate(ch1),
        polarimeter_ch0: rate(ch0),
        both_channels: rate(both),
    }
}

/// Per-polarimeter and per-station double-click rates over all rounds.
pub fn double_count_rate(tallies: &Tallies) -> DoubleCountReport {
    DoubleCountReport {
        rounds: tallies.rounds,
        alice: station_doubles(&tallies.alice, tallies.rounds),
        bob: station_doubles(&tallies.bob, tallies.rounds),
    }
}

/// How the per-station efficiencies in a [`LoopholeReport`] were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyBasis {
    /// Smallest configured detector efficiency per station.
    ConfiguredEta,
    /// Singles rate measured over tracking-mode rounds.
    MeasuredSingles,
}

/// Detection-loophole summary: are the observed (or configured) station
/// efficiencies high enough that post-selected Bell statistics can be
/// trusted without a fair-sampling assumption?
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopholeReport {
    /// The efficiency below which post-selection opens the loophole.
    pub critical_efficiency: f64,
    pub alice_efficiency: f64,
    pub bob_efficiency: f64,
    pub basis: EfficiencyBasis,
    /// True when either station sits below the critical efficiency.
    pub open: bool,
}

fn min_configured_eta(station: &StationConfig) -> Option<f64> {
    station
        .detectors
        .iter()
        .map(|d| match d {
            crate::optics::DetectorModel::QuantumEfficiency { eta } => Some(*eta),
            _ => None,
        })
        .try_fold(f64::INFINITY, |acc, eta| eta.map(|e| acc.min(e)))
}

/// Builds the loophole summary for a finished session.
///
/// Entangled-pair sessions use the configured efficiencies (they are exact);
/// classical sessions fall back to the singles rates measured over the
/// tracking-mode rounds that feed the Bell statistics.
pub fn loophole_report(
    tallies: &Tallies,
    layout: &SessionLayout,
    alice: &StationConfig,
    bob: &StationConfig,
) -> LoopholeReport {
    let critical = crate::analytics::critical_efficiency();
    let configured = if layout.is_quantum {
        min_configured_eta(alice).zip(min_configured_eta(bob))
    } else {
        None
    };
    let (alice_eff, bob_eff, basis) = match configured {
        Some((a, b)) => (a, b, EfficiencyBasis::ConfiguredEta),
        None => {
            let rate = |clicks: &[u64]| {
                if tallies.data_rounds == 0 {
                    0.0
                } else {
                    clicks.iter().sum::<u64>() as f64 / tallies.data_rounds as f64
                }
            };
            (
                rate(&tallies.alice_clicks_by_pair),
                rate(&tallies.bob_clicks_by_pair),
                EfficiencyBasis::MeasuredSingles,
            )
        }
    };
    LoopholeReport {
        critical_efficiency: critical,
        alice_efficiency: alice_eff,
        bob_efficiency: bob_eff,
        basis,
        open: alice_eff.min(bob_eff) < critical,
    }
}
