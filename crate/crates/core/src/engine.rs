//! Session execution: the round loop, its parallel reduction, and the
//! single-station scan used to compare against analytic click curves.
//!
//! Determinism contract: every round owns its own counter-derived RNG
//! stream, seeded from the session seed and the round index. Rounds are
//! therefore independent of scheduling, and the integer tallies merge
//! associatively, so identical configurations give bit-identical results on
//! any worker count — including the sequential recorded variant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis;
use crate::error::Result;
use crate::optics::{cascaded_energy, Angle, DetectorModel, Pulse};
use crate::session::SessionConfig;
use crate::source::{emit, Emission, SourceModel};
use crate::station::{
    measure_classical_with_axes, measure_quantum_pair, StationConfig, StationRole,
};
use crate::stats::{PolarimeterMode, RoundRecord, SessionLayout, SessionStats, Tallies};

/// RNG for one unit of work: one ChaCha stream per index, all derived from
/// the same master seed.
fn unit_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn polarimeter_axes(
    station: &StationConfig,
    setting: Angle,
    mode: PolarimeterMode,
) -> (Angle, Angle) {
    match mode {
        PolarimeterMode::Fixed => (station.theta_ch1, station.theta_ch0),
        // Tracking polarimeters follow the analyzer, so the channel-1 pulse
        // arrives aligned with its axis and the channel-0 pulse orthogonal
        // to it: the polarimeters become transparent pass-throughs.
        PolarimeterMode::Tracking => (setting, setting),
    }
}

/// Plays one round. Draw order is part of the determinism contract:
/// Alice setting, Bob setting, Alice mode, Bob mode, then the source and
/// measurement draws.
fn draw_round<R: Rng + ?Sized>(
    cfg: &SessionConfig,
    layout: &SessionLayout,
    rng: &mut R,
) -> RoundRecord {
    let a_index = rng.random_range(0..layout.alice_settings.len());
    let b_index = rng.random_range(0..layout.bob_settings.len());
    let a_setting = layout.alice_settings[a_index];
    let b_setting = layout.bob_settings[b_index];

    let fraction = cfg.fair_sampling.test_fraction;
    let draw_mode = |rng: &mut R| {
        if rng.random::<f64>() < fraction {
            PolarimeterMode::Fixed
        } else {
            PolarimeterMode::Tracking
        }
    };
    let alice_mode = draw_mode(rng);
    let bob_mode = draw_mode(rng);

    let alice_axes = polarimeter_axes(&cfg.alice, a_setting, alice_mode);
    let bob_axes = polarimeter_axes(&cfg.bob, b_setting, bob_mode);

    let (alice_outcome, bob_outcome) = match emit(&cfg.source, rng) {
        Emission::Quantum => measure_quantum_pair(
            &cfg.alice,
            a_setting,
            alice_axes,
            &cfg.bob,
            b_setting,
            bob_axes,
            rng,
        )
        .expect("validated configuration guarantees efficiency detectors"),
        Emission::Classical { lambda } => {
            let e0 = match &cfg.source {
                SourceModel::ClassicalPulsePairs { e0 } => *e0,
                SourceModel::EntangledPairs => unreachable!("classical emission from a quantum source"),
            };
            // Both wings carry the full pulse energy at the shared random
            // polarization.
            let pulse = Pulse::new(e0, lambda);
            let alice_outcome =
                measure_classical_with_axes(&cfg.alice, a_setting, alice_axes, &pulse, rng);
            let bob_outcome =
                measure_classical_with_axes(&cfg.bob, b_setting, bob_axes, &pulse, rng);
            (alice_outcome, bob_outcome)
        }
    };

    RoundRecord {
        a_setting,
        b_setting,
        a_index,
        b_index,
        alice_mode,
        bob_mode,
        alice_outcome,
        bob_outcome,
    }
}

fn assemble_stats(cfg: &SessionConfig, layout: SessionLayout, tallies: Tallies) -> SessionStats {
    let chsh = analysis::estimate_chsh(&tallies, &layout).ok();
    let qber = analysis::compute_qber(&tallies, &layout).ok();
    let sifted_key_length = layout
        .key_pairs
        .iter()
        .map(|&(a, b)| tallies.clean_coincidences(layout.pair_index(a, b)))
        .sum();
    let alice_fair =
        analysis::fair_sampling_test(&tallies, &layout, StationRole::Alice, &cfg.fair_sampling)
            .ok();
    let bob_fair =
        analysis::fair_sampling_test(&tallies, &layout, StationRole::Bob, &cfg.fair_sampling).ok();
    let doubles = analysis::double_count_rate(&tallies);
    let loophole = analysis::loophole_report(&tallies, &layout, &cfg.alice, &cfg.bob);
    SessionStats {
        layout,
        tallies,
        chsh,
        qber,
        sifted_key_length,
        alice_fair,
        bob_fair,
        doubles,
        loophole,
    }
}

/// Runs a full session in parallel over the ambient rayon thread pool.
///
/// The result is a pure function of the configuration (seed included) —
/// re-running with more or fewer workers changes nothing.
pub fn run_session(cfg: &SessionConfig) -> Result<SessionStats> {
    let layout = cfg.validate()?;
    let tallies = (0..cfg.rounds)
        .into_par_iter()
        .fold(
            || Tallies::new(&layout),
            |mut tallies, round| {
                let mut rng = unit_rng(cfg.seed, round);
                let rec = draw_round(cfg, &layout, &mut rng);
                tallies.record(&layout, &rec);
                tallies
            },
        )
        .reduce(|| Tallies::new(&layout), Tallies::merge);
    Ok(assemble_stats(cfg, layout, tallies))
}

/// Sequential variant that also returns the raw per-round records, for
/// brute-force recomputation and debugging. Tallies are identical to
/// [`run_session`]'s for the same configuration.
pub fn run_session_recorded(cfg: &SessionConfig) -> Result<(SessionStats, Vec<RoundRecord>)> {
    let layout = cfg.validate()?;
    let mut tallies = Tallies::new(&layout);
    let mut records = Vec::with_capacity(cfg.rounds.min(1 << 24) as usize);
    for round in 0..cfg.rounds {
        let mut rng = unit_rng(cfg.seed, round);
        let rec = draw_round(cfg, &layout, &mut rng);
        tallies.record(&layout, &rec);
        records.push(rec);
    }
    Ok((assemble_stats(cfg, layout, tallies), records))
}

/// Monte-Carlo scan of a single polarimeter arm: one station, analyzer at
/// relative angle `rel` from the polarimeter axis, classical pulses of
/// energy `e0` at uniformly random polarization. Returns the number of
/// clicks of the transmitted-arm detector over `samples` pulses.
///
/// Each sample consumes its own RNG stream (polarization, then the click
/// draw), so the count is deterministic in (`seed`, `samples`) alone.
pub fn scan_single_station(
    e0: f64,
    detector: &DetectorModel,
    rel: Angle,
    samples: u64,
    seed: u64,
) -> Result<u64> {
    detector.validate()?;
    if !(e0 > 0.0) || !e0.is_finite() {
        return Err(crate::error::Error::Config(format!(
            "pulse energy must be positive and finite, got {e0}"
        )));
    }
    let clicks = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = unit_rng(seed, i);
            let lambda = Angle::new((rng.random::<f64>() - 0.5) * std::f64::consts::PI);
            let energy = cascaded_energy(e0, lambda, rel, Angle::ZERO);
            let r: f64 = rng.random();
            detector.sample_click(energy, r) as u64
        })
        .sum();
    Ok(clicks)
}
