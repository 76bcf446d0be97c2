//! Integer tallies accumulated over a session, plus the resolved session
//! layout the estimators interpret them against.
//!
//! Everything here is exact counting: tallies are `u64` histograms that merge
//! by field-wise addition, so a parallel run reduces to the same numbers as a
//! sequential one regardless of how rounds are chunked.

use serde::{Deserialize, Serialize};

use crate::optics::Angle;
use crate::station::StationOutcome;

/// What a station's polarimeters do during one round.
///
/// In `Fixed` rounds the polarimeter axes stay at the configured test
/// orientation regardless of the analyzer setting — these rounds feed the
/// fair-sampling monitor. In `Tracking` rounds each polarimeter axis follows
/// the active analyzer setting, which makes the polarimeters transparent
/// bookkeeping devices; only tracking rounds contribute key and CHSH data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarimeterMode {
    Fixed,
    Tracking,
}

impl PolarimeterMode {
    /// Index used by the `[mode]` axis of the tally arrays: fixed = 0,
    /// tracking = 1.
    pub fn idx(&self) -> usize {
        match self {
            PolarimeterMode::Fixed => 0,
            PolarimeterMode::Tracking => 1,
        }
    }
}

/// Everything that happened in a single round, for callers that want the
/// raw stream instead of aggregated tallies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub a_setting: Angle,
    pub b_setting: Angle,
    pub a_index: usize,
    pub b_index: usize,
    pub alice_mode: PolarimeterMode,
    pub bob_mode: PolarimeterMode,
    pub alice_outcome: StationOutcome,
    pub bob_outcome: StationOutcome,
}

/// Per-station counters, resolved by analyzer setting and polarimeter mode.
///
/// Outer index is the setting slot; the inner `[u64; 2]` axis is the
/// polarimeter mode (`PolarimeterMode::idx`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationTallies {
    /// Rounds in which this setting/mode combination was active.
    pub setting_rounds: Vec<[u64; 2]>,
    /// Rounds with at least one detector click.
    pub any_click: Vec<[u64; 2]>,
    /// Click counts per detector slot `[ch1+, ch1−, ch0+, ch0−]`.
    pub detector_clicks: Vec<[[u64; 4]; 2]>,
    /// Rounds in which both outputs of one polarimeter fired: `[ch1, ch0]`.
    pub polarimeter_doubles: Vec<[[u64; 2]; 2]>,
    /// Rounds in which both analyzer channels fired.
    pub channel_doubles: Vec<[u64; 2]>,
}

impl StationTallies {
    pub fn new(n_settings: usize) -> Self {
        StationTallies {
            setting_rounds: vec![[0; 2]; n_settings],
            any_click: vec![[0; 2]; n_settings],
            detector_clicks: vec![[[0; 4]; 2]; n_settings],
            polarimeter_doubles: vec![[[0; 2]; 2]; n_settings],
            channel_doubles: vec![[0; 2]; n_settings],
        }
    }

    fn record(&mut self, setting: usize, mode: PolarimeterMode, outcome: &StationOutcome) {
        let m = mode.idx();
        self.setting_rounds[setting][m] += 1;
        if outcome.any_click() {
            self.any_click[setting][m] += 1;
        }
        for (slot, &click) in outcome.clicks.iter().enumerate() {
            self.detector_clicks[setting][m][slot] += click as u64;
        }
        let [d1, d0] = outcome.polarimeter_doubles();
        self.polarimeter_doubles[setting][m][0] += d1 as u64;
        self.polarimeter_doubles[setting][m][1] += d0 as u64;
        self.channel_doubles[setting][m] += outcome.channel_double() as u64;
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.setting_rounds.iter_mut().zip(other.setting_rounds) {
            a[0] += b[0];
            a[1] += b[1];
        }
        for (a, b) in self.any_click.iter_mut().zip(other.any_click) {
            a[0] += b[0];
            a[1] += b[1];
        }
        for (a, b) in self.detector_clicks.iter_mut().zip(other.detector_clicks) {
            for m in 0..2 {
                for s in 0..4 {
                    a[m][s] += b[m][s];
                }
            }
        }
        for (a, b) in self.polarimeter_doubles.iter_mut().zip(other.polarimeter_doubles) {
            for m in 0..2 {
                a[m][0] += b[m][0];
                a[m][1] += b[m][1];
            }
        }
        for (a, b) in self.channel_doubles.iter_mut().zip(other.channel_doubles) {
            a[0] += b[0];
            a[1] += b[1];
        }
        self
    }

    /// Total clicks in one detector slot at one setting, both modes pooled.
    pub fn slot_clicks(&self, setting: usize, slot: usize) -> u64 {
        self.detector_clicks[setting][0][slot] + self.detector_clicks[setting][1][slot]
    }

    /// Rounds at one setting, both modes pooled.
    pub fn rounds_at(&self, setting: usize) -> u64 {
        self.setting_rounds[setting][0] + self.setting_rounds[setting][1]
    }
}

/// Joint counters for a whole session.
///
/// Pair-resolved vectors are indexed by `SessionLayout::pair_index`, i.e.
/// `a_index * n_bob + b_index`. The `bits` cells are `bit_a * 2 + bit_b`,
/// counting only rounds in which both stations produced a clean bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tallies {
    /// Total rounds fed into the tally.
    pub rounds: u64,
    pub alice: StationTallies,
    pub bob: StationTallies,
    /// Rounds with both stations in tracking mode (clicks or not). These are
    /// the rounds eligible for key and Bell data.
    pub data_rounds: u64,
    /// Data rounds per setting pair; sums to `data_rounds`.
    pub pair_rounds: Vec<u64>,
    /// Data rounds per pair in which Alice clicked at all.
    pub alice_clicks_by_pair: Vec<u64>,
    /// Data rounds per pair in which Bob clicked at all.
    pub bob_clicks_by_pair: Vec<u64>,
    /// Data rounds per pair in which both stations clicked — the detected
    /// coincidences the post-selected statistics condition on.
    pub coincidences: Vec<u64>,
    /// Clean-bit cell counts per pair, cell = `bit_a * 2 + bit_b`.
    pub bits: Vec<[u64; 4]>,
    /// Rounds (any mode) in which Alice saw both channels fire.
    pub alice_doubles: u64,
    /// Rounds (any mode) in which Bob saw both channels fire.
    pub bob_doubles: u64,
    /// Rounds (any mode) in which at least one station saw both channels.
    pub either_double: u64,
    /// Rounds dropped because at least one station was silent.
    pub discarded_no_click: u64,
    /// Coincidence rounds at an identical-setting key pair.
    pub key_rounds: u64,
    /// Coincidence rounds at a Bell-test pair (key pairs take precedence).
    pub chsh_rounds: u64,
    /// Every remaining round: fixed-mode coincidences and pairs outside the
    /// key/Bell lists.
    pub other_rounds: u64,
}

impl Tallies {
    pub fn new(layout: &SessionLayout) -> Self {
        let n_pairs = layout.n_pairs();
        Tallies {
            rounds: 0,
            alice: StationTallies::new(layout.alice_settings.len()),
            bob: StationTallies::new(layout.bob_settings.len()),
            data_rounds: 0,
            pair_rounds: vec![0; n_pairs],
            alice_clicks_by_pair: vec![0; n_pairs],
            bob_clicks_by_pair: vec![0; n_pairs],
            coincidences: vec![0; n_pairs],
            bits: vec![[0; 4]; n_pairs],
            alice_doubles: 0,
            bob_doubles: 0,
            either_double: 0,
            discarded_no_click: 0,
            key_rounds: 0,
            chsh_rounds: 0,
            other_rounds: 0,
        }
    }

    /// Folds one round into the tally.
    pub fn record(&mut self, layout: &SessionLayout, rec: &RoundRecord) {
        self.rounds += 1;
        self.alice.record(rec.a_index, rec.alice_mode, &rec.alice_outcome);
        self.bob.record(rec.b_index, rec.bob_mode, &rec.bob_outcome);

        let a_double = rec.alice_outcome.channel_double();
        let b_double = rec.bob_outcome.channel_double();
        self.alice_doubles += a_double as u64;
        self.bob_doubles += b_double as u64;
        self.either_double += (a_double || b_double) as u64;

        let a_click = rec.alice_outcome.any_click();
        let b_click = rec.bob_outcome.any_click();
        let pair = layout.pair_index(rec.a_index, rec.b_index);
        let both_tracking = rec.alice_mode == PolarimeterMode::Tracking
            && rec.bob_mode == PolarimeterMode::Tracking;

        if both_tracking {
            self.data_rounds += 1;
            self.pair_rounds[pair] += 1;
            self.alice_clicks_by_pair[pair] += a_click as u64;
            self.bob_clicks_by_pair[pair] += b_click as u64;
            if a_click && b_click {
                self.coincidences[pair] += 1;
                if let (Some(ba), Some(bb)) = (rec.alice_outcome.bit(), rec.bob_outcome.bit()) {
                    self.bits[pair][(ba * 2 + bb) as usize] += 1;
                }
            }
        }

        // Partition counter: silence dominates, then key before Bell.
        if !a_click || !b_click {
            self.discarded_no_click += 1;
        } else if both_tracking && layout.is_key_pair(pair) {
            self.key_rounds += 1;
        } else if both_tracking && layout.is_chsh_pair(pair) {
            self.chsh_rounds += 1;
        } else {
            self.other_rounds += 1;
        }
    }

    /// Field-wise addition; associative and commutative, so any reduction
    /// tree over per-chunk tallies yields identical totals.
    pub fn merge(mut self, other: Self) -> Self {
        self.rounds += other.rounds;
        self.alice = self.alice.merge(other.alice);
        self.bob = self.bob.merge(other.bob);
        self.data_rounds += other.data_rounds;
        for (a, b) in self.pair_rounds.iter_mut().zip(other.pair_rounds) {
            *a += b;
        }
        for (a, b) in self.alice_clicks_by_pair.iter_mut().zip(other.alice_clicks_by_pair) {
            *a += b;
        }
        for (a, b) in self.bob_clicks_by_pair.iter_mut().zip(other.bob_clicks_by_pair) {
            *a += b;
        }
        for (a, b) in self.coincidences.iter_mut().zip(other.coincidences) {
            *a += b;
        }
        for (a, b) in self.bits.iter_mut().zip(other.bits) {
            for c in 0..4 {
                a[c] += b[c];
            }
        }
        self.alice_doubles += other.alice_doubles;
        self.bob_doubles += other.bob_doubles;
        self.either_double += other.either_double;
        self.discarded_no_click += other.discarded_no_click;
        self.key_rounds += other.key_rounds;
        self.chsh_rounds += other.chsh_rounds;
        self.other_rounds += other.other_rounds;
        self
    }

    /// Clean-bit coincidences in one pair (all four cells).
    pub fn clean_coincidences(&self, pair: usize) -> u64 {
        self.bits[pair].iter().sum()
    }
}

/// Resolved, validated description of a session's measurement geometry.
///
/// Built by `SessionConfig::validate`; all indices elsewhere refer to the
/// setting slots recorded here. `pair_index(a, b) = a * n_bob + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLayout {
    pub alice_settings: Vec<Angle>,
    pub bob_settings: Vec<Angle>,
    /// Alice's fixed polarimeter axes `(θ_ch1, θ_ch0)`.
    pub alice_axes: (Angle, Angle),
    /// Bob's fixed polarimeter axes `(θ_ch1, θ_ch0)`.
    pub bob_axes: (Angle, Angle),
    /// The four Bell-test setting pairs, in the order the CHSH combination
    /// `S = E₁ − E₂ + E₃ + E₄` expects.
    pub chsh_pairs: [(usize, usize); 4],
    /// Identical-setting pairs used for key generation.
    pub key_pairs: Vec<(usize, usize)>,
    /// True when the source is a genuine entangled-pair source.
    pub is_quantum: bool,
    /// Smallest configured detector efficiency across both stations, when
    /// every detector is an efficiency model.
    pub min_eta: Option<f64>,
    pub(crate) key_pair_lut: Vec<bool>,
    pub(crate) chsh_pair_lut: Vec<bool>,
}

impl SessionLayout {
    /// Builds the layout and its pair lookup tables.
    pub(crate) fn assemble(
        alice_settings: Vec<Angle>,
        bob_settings: Vec<Angle>,
        alice_axes: (Angle, Angle),
        bob_axes: (Angle, Angle),
        chsh_pairs: [(usize, usize); 4],
        key_pairs: Vec<(usize, usize)>,
        is_quantum: bool,
        min_eta: Option<f64>,
    ) -> Self {
        let n_pairs = alice_settings.len() * bob_settings.len();
        let n_bob = bob_settings.len();
        let mut key_pair_lut = vec![false; n_pairs];
        for &(a, b) in &key_pairs {
            key_pair_lut[a * n_bob + b] = true;
        }
        let mut chsh_pair_lut = vec![false; n_pairs];
        for &(a, b) in &chsh_pairs {
            chsh_pair_lut[a * n_bob + b] = true;
        }
        SessionLayout {
            alice_settings,
            bob_settings,
            alice_axes,
            bob_axes,
            chsh_pairs,
            key_pairs,
            is_quantum,
            min_eta,
            key_pair_lut,
            chsh_pair_lut,
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.alice_settings.len() * self.bob_settings.len()
    }

    pub fn pair_index(&self, a_index: usize, b_index: usize) -> usize {
        a_index * self.bob_settings.len() + b_index
    }

    /// The settings behind a pair index.
    pub fn pair_settings(&self, pair: usize) -> (Angle, Angle) {
        let n_bob = self.bob_settings.len();
        (self.alice_settings[pair / n_bob], self.bob_settings[pair % n_bob])
    }

    pub fn is_key_pair(&self, pair: usize) -> bool {
        self.key_pair_lut[pair]
    }

    pub fn is_chsh_pair(&self, pair: usize) -> bool {
        self.chsh_pair_lut[pair]
    }
}

/// Full derived output of one simulated session.
///
/// Estimators that cannot run (no coincidences in some pair, degenerate
/// geometry) leave their slot empty rather than failing the session.
#[derive(Debug, Clone, Serialize)]
pub struct SessionStats {
    #[serde(skip)]
    pub layout: SessionLayout,
    pub tallies: Tallies,
    pub chsh: Option<crate::analysis::ChshEstimate>,
    pub qber: Option<crate::analysis::QberEstimate>,
    /// Rounds contributing a clean key bit (agreements + disagreements).
    pub sifted_key_length: u64,
    pub alice_fair: Option<crate::analysis::FairSamplingVerdict>,
    pub bob_fair: Option<crate::analysis::FairSamplingVerdict>,
    pub doubles: crate::analysis::DoubleCountReport,
    pub loophole: crate::analysis::LoopholeReport,
}
